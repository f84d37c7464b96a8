#include "cbmv/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace cbmv {
namespace {

template <typename Fn>
long for_each_evaluated(const DisparityMap& pred, const DisparityMap& gt,
                        const std::optional<Mask>& nonocc, Fn&& fn) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw ConfigError("prediction and ground truth differ in size");
  }
  if (nonocc && (nonocc->rows() != gt.rows() || nonocc->cols() != gt.cols())) {
    throw ConfigError("mask and ground truth differ in size");
  }
  long n = 0;
  for (Eigen::Index y = 0; y < gt.rows(); ++y) {
    for (Eigen::Index x = 0; x < gt.cols(); ++x) {
      const double g = gt(y, x);
      if (!std::isfinite(g) || !is_valid_disparity(g)) continue;
      if (nonocc && !(*nonocc)(y, x)) continue;
      const double p = is_valid_disparity(pred(y, x)) ? pred(y, x) : 0.0;
      fn(std::abs(p - g));
      ++n;
    }
  }
  if (n == 0) throw DataError("no pixels to evaluate");
  return n;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

EvalReport evaluate(const DisparityMap& pred, const DisparityMap& gt,
                    const std::optional<Mask>& nonocc) {
  long bad05 = 0, bad1 = 0, bad2 = 0;
  double abs_sum = 0.0, sq_sum = 0.0;
  const long n = for_each_evaluated(pred, gt, nonocc, [&](double err) {
    bad05 += err > 0.5;
    bad1 += err > 1.0;
    bad2 += err > 2.0;
    abs_sum += err;
    sq_sum += err * err;
  });
  EvalReport r;
  r.pixel_count = n;
  r.bad_05 = double(bad05) / double(n);
  r.bad_1 = double(bad1) / double(n);
  r.bad_2 = double(bad2) / double(n);
  r.avg_err = abs_sum / double(n);
  r.rms_err = std::sqrt(sq_sum / double(n));
  r.mask_kind = nonocc ? MaskKind::nonocc : MaskKind::all;
  return r;
}

std::vector<double> bad_fractions(const DisparityMap& pred, const DisparityMap& gt,
                                  const std::vector<double>& taus,
                                  const std::optional<Mask>& nonocc) {
  std::vector<long> counts(taus.size(), 0);
  const long n = for_each_evaluated(pred, gt, nonocc, [&](double err) {
    for (std::size_t i = 0; i < taus.size(); ++i) counts[i] += err > taus[i];
  });
  std::vector<double> out(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i) out[i] = double(counts[i]) / double(n);
  return out;
}

std::string EvalReport::to_text() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "evaluated pixels : %ld (%s)\n"
                "bad-0.5          : %.2f %%\n"
                "bad-1.0          : %.2f %%\n"
                "bad-2.0          : %.2f %%\n"
                "avg error        : %.4f px\n"
                "rms error        : %.4f px\n",
                pixel_count, mask_kind == MaskKind::all ? "all" : "nonocc",
                100.0 * bad_05, 100.0 * bad_1, 100.0 * bad_2, avg_err, rms_err);
  return buf;
}

std::string EvalReport::to_key_values() const {
  std::ostringstream os;
  os << "mask=" << (mask_kind == MaskKind::all ? "all" : "nonocc") << '\n'
     << "pixels=" << pixel_count << '\n'
     << "bad_0.5=" << format_double(bad_05) << '\n'
     << "bad_1.0=" << format_double(bad_1) << '\n'
     << "bad_2.0=" << format_double(bad_2) << '\n'
     << "avg=" << format_double(avg_err) << '\n'
     << "rms=" << format_double(rms_err) << '\n';
  return os.str();
}

EvalReport EvalReport::from_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw DataError(std::string("report lacks '") + key + "'");
    return it->second;
  };
  EvalReport r;
  const std::string& mask = get("mask");
  if (mask != "all" && mask != "nonocc") throw DataError("unknown mask kind " + mask);
  r.mask_kind = mask == "all" ? MaskKind::all : MaskKind::nonocc;
  r.pixel_count = std::stol(get("pixels"));
  r.bad_05 = std::strtod(get("bad_0.5").c_str(), nullptr);
  r.bad_1 = std::strtod(get("bad_1.0").c_str(), nullptr);
  r.bad_2 = std::strtod(get("bad_2.0").c_str(), nullptr);
  r.avg_err = std::strtod(get("avg").c_str(), nullptr);
  r.rms_err = std::strtod(get("rms").c_str(), nullptr);
  return r;
}

}  // namespace cbmv
