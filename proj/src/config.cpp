#include "cbmv/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace cbmv {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string show(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
std::string show(int v) { return std::to_string(v); }
std::string show(std::uint64_t v) { return std::to_string(v); }
std::string show(bool v) { return v ? "true" : "false"; }

void read_value(const std::string& key, const std::string& s, double& out) {
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw ConfigError(key + ": expected a number, got '" + s + "'");
}

template <typename Int>
void read_value(const std::string& key, const std::string& s, Int& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(key + ": expected an integer, got '" + s + "'");
  }
}

void read_value(const std::string& key, const std::string& s, bool& out) {
  if (s == "true" || s == "1") {
    out = true;
  } else if (s == "false" || s == "0") {
    out = false;
  } else {
    throw ConfigError(key + ": expected true or false, got '" + s + "'");
  }
}

struct Field {
  const char* key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

template <typename T>
Field field(const char* key, T PipelineConfig::*member) {
  return {key, [member](const PipelineConfig& c) { return show(c.*member); },
          [key, member](PipelineConfig& c, const std::string& v) {
            read_value(key, v, c.*member);
          }};
}

template <typename Section, typename T>
Field field(const char* key, Section PipelineConfig::*section, T Section::*member) {
  return {key,
          [section, member](const PipelineConfig& c) { return show(c.*section.*member); },
          [key, section, member](PipelineConfig& c, const std::string& v) {
            read_value(key, v, c.*section.*member);
          }};
}

const std::vector<Field>& fields() {
  using C = PipelineConfig;
  static const std::vector<Field> table = {
      field("d_max", &C::d_max),
      field("seed", &C::seed),
      field("matcher.ncc_window", &C::matchers, &MatcherParams::ncc_window),
      field("matcher.zsad_window", &C::matchers, &MatcherParams::zsad_window),
      field("matcher.census_window", &C::matchers, &MatcherParams::census_window),
      field("matcher.sobel_window", &C::matchers, &MatcherParams::sobel_sad_window),
      field("sigma.ncc", &C::confidence, &ConfidenceParams::sigma_ncc),
      field("sigma.census", &C::confidence, &ConfidenceParams::sigma_census),
      field("sigma.zsad", &C::confidence, &ConfidenceParams::sigma_zsad),
      field("sigma.sobel", &C::confidence, &ConfidenceParams::sigma_sobel),
      field("forest.n_trees", &C::forest, &ForestParams::n_trees),
      field("forest.max_depth", &C::forest, &ForestParams::max_depth),
      field("forest.min_samples_leaf", &C::forest, &ForestParams::min_samples_leaf),
      field("forest.features_per_split", &C::forest, &ForestParams::features_per_split),
      field("forest.bootstrap", &C::forest, &ForestParams::bootstrap),
      field("forest.augment_swapped", &C::augment_swapped),
      field("cbca.tau", &C::cbca, &CbcaParams::tau),
      field("cbca.l_max", &C::cbca, &CbcaParams::l_max),
      field("cbca.iters_pre", &C::cbca, &CbcaParams::iterations_pre),
      field("cbca.iters_post", &C::cbca, &CbcaParams::iterations_post),
      field("sgm.p1", &C::sgm, &SgmParams::p1),
      field("sgm.p2", &C::sgm, &SgmParams::p2),
      field("sgm.tau_so", &C::sgm, &SgmParams::tau_so),
      field("sgm.edge_divisor", &C::sgm, &SgmParams::edge_divisor),
      field("sgm.paths", &C::sgm, &SgmParams::paths),
      field("post.lr_tolerance", &C::post, &PostParams::lr_tolerance),
      field("post.median_window", &C::post, &PostParams::median_window),
      field("post.bilateral_spatial_sigma", &C::post, &PostParams::bilateral_spatial_sigma),
      field("post.bilateral_range_sigma", &C::post, &PostParams::bilateral_range_sigma),
  };
  return table;
}

const Field& find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (key == f.key) return f;
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

}  // namespace

void PipelineConfig::validate() const {
  if (d_max < 0) throw ConfigError("d_max must be non-negative");
  matchers.validate();
  confidence.validate();
  forest.validate();
  cbca.validate();
  sgm.validate();
  post.validate();
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  find_field(key).set(*this, value);
}

std::string PipelineConfig::get(const std::string& key) const {
  return find_field(key).get(*this);
}

std::vector<std::string> PipelineConfig::keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.emplace_back(f.key);
  return out;
}

std::string PipelineConfig::to_string() const {
  std::ostringstream os;
  os << "# cbmv pipeline configuration\n"
     << "# sigma.zsad and sigma.sobel are on the [0,1] intensity scale (100/255).\n";
  for (const Field& f : fields()) os << f.key << '=' << f.get(*this) << '\n';
  return os.str();
}

PipelineConfig PipelineConfig::parse(const std::string& text) {
  PipelineConfig config;
  std::istringstream is(text);
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected key=value");
    }
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  config.validate();
  return config;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse(buf.str());
}

void PipelineConfig::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path + " for writing");
  os << to_string();
  if (!os) throw DataError("failed writing " + path);
}

}  // namespace cbmv
