#include "cbmv/forest.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace cbmv {
namespace {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Uniform integer in [0, n); rejection sampling keeps it exact and portable.
std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

// Runs body(i) for i in [0, n) over up to `threads` workers, strided.
template <typename Body>
void parallel_for(int n, int threads, Body&& body) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < n; i += threads) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();
};

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& samples, const ForestParams& params, Rng rng)
      : samples_(samples), params_(params), rng_(std::move(rng)) {}

  DecisionTree build(std::vector<int> indices) {
    tree_.nodes.clear();
    grow(indices, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<int>& indices, int depth) {
    const int node_id = int(tree_.nodes.size());
    tree_.nodes.emplace_back();

    const int n = int(indices.size());
    int pos = 0;
    for (int i : indices) pos += samples_.labels(i) != 0;
    tree_.nodes[node_id].value = double(pos) / double(n);

    const bool pure = pos == 0 || pos == n;
    if (pure || depth >= params_.max_depth || n < 2 * params_.min_samples_leaf) {
      return node_id;
    }

    const Split split = find_split(indices, pos);
    if (split.feature < 0) return node_id;

    std::vector<int> left_idx, right_idx;
    left_idx.reserve(indices.size());
    right_idx.reserve(indices.size());
    for (int i : indices) {
      (samples_.features(i, split.feature) <= split.threshold ? left_idx : right_idx)
          .push_back(i);
    }
    indices.clear();
    indices.shrink_to_fit();

    const int left = grow(left_idx, depth + 1);
    const int right = grow(right_idx, depth + 1);
    auto& node = tree_.nodes[node_id];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return node_id;
  }

  // Weighted Gini of the best split. Features are tried in random order; at
  // least features_per_split are examined, and the search continues past
  // that only while no impurity-reducing split has been found.
  Split find_split(const std::vector<int>& indices, int pos) {
    const int n = int(indices.size());
    const double parent = 2.0 * pos * double(n - pos) / n;

    std::array<int, kFeatureCount> order;
    std::iota(order.begin(), order.end(), 0);

    Split best;
    std::vector<std::pair<double, std::uint8_t>> column(indices.size());
    for (int k = 0; k < kFeatureCount; ++k) {
      const int pick = k + int(uniform_below(rng_, std::uint64_t(kFeatureCount - k)));
      std::swap(order[k], order[pick]);
      const int f = order[k];

      if (k >= params_.features_per_split && best.feature >= 0) break;

      for (int i = 0; i < n; ++i) {
        column[i] = {samples_.features(indices[i], f), samples_.labels(indices[i])};
      }
      std::sort(column.begin(), column.end());

      int left_pos = 0;
      const int min_leaf = params_.min_samples_leaf;
      for (int i = 0; i + 1 < n; ++i) {
        left_pos += column[i].second != 0;
        const int nl = i + 1;
        const int nr = n - nl;
        if (nl < min_leaf) continue;
        if (nr < min_leaf) break;
        if (!(column[i].first < column[i + 1].first)) continue;
        const int right_pos = pos - left_pos;
        const double impurity = 2.0 * left_pos * double(nl - left_pos) / nl +
                                2.0 * right_pos * double(nr - right_pos) / nr;
        if (impurity < best.impurity && impurity < parent - 1e-12) {
          const double a = column[i].first;
          const double b = column[i + 1].first;
          double t = a + 0.5 * (b - a);
          if (!(t < b)) t = a;
          best = {f, t, impurity};
        }
      }
    }
    return best;
  }

  const TrainingSet& samples_;
  const ForestParams& params_;
  Rng rng_;
  DecisionTree tree_;
};

void require_finite(const TrainingSet& s) {
  if (!s.features.allFinite()) throw TrainingError("training features must be finite");
}

}  // namespace

void TrainingSet::append(const TrainingSet& other) {
  const Eigen::Index n = size();
  features.conservativeResize(n + other.size(), Eigen::NoChange);
  features.bottomRows(other.size()) = other.features;
  labels.conservativeResize(n + other.size());
  labels.tail(other.size()) = other.labels;
}

TrainingSet sample_training_set(const FeatureVolume& fv, const DisparityMap& gt,
                                const SamplingParams& params) {
  if (gt.rows() != fv.height() || gt.cols() != fv.width()) {
    throw ConfigError("ground truth does not match the feature volume");
  }
  Rng rng(splitmix64(params.seed));
  const int d_max = fv.d_max();

  std::vector<Eigen::Index> cells;
  std::vector<std::uint8_t> labels;
  std::vector<int> lower, upper;
  bool any_labelled = false;

  auto take = [&](std::vector<int>& pool) {
    const std::size_t k = uniform_below(rng, pool.size());
    const int d = pool[k];
    pool.erase(pool.begin() + std::ptrdiff_t(k));
    return d;
  };

  for (int y = 0; y < fv.height(); ++y) {
    for (int x = 0; x < fv.width(); ++x) {
      const double g = gt(y, x);
      if (!is_valid_disparity(g) || !std::isfinite(g)) continue;
      any_labelled = true;
      const int d_pos = int(std::lround(g));
      if (d_pos > d_max || !fv.valid(y, x, d_pos)) continue;

      cells.push_back(fv.index(y, x, d_pos));
      labels.push_back(1);

      lower.clear();
      upper.clear();
      for (int d = 0; d <= d_pos - 2; ++d) {
        if (fv.valid(y, x, d)) lower.push_back(d);
      }
      for (int d = d_pos + 2; d <= d_max; ++d) {
        if (fv.valid(y, x, d)) upper.push_back(d);
      }

      std::vector<int> picks;
      if (!lower.empty() && !upper.empty()) {
        picks = {take(lower), take(upper)};
      } else {
        std::vector<int>& side = lower.empty() ? upper : lower;
        for (int k = 0; k < 2 && !side.empty(); ++k) picks.push_back(take(side));
      }
      for (int d : picks) {
        cells.push_back(fv.index(y, x, d));
        labels.push_back(0);
      }
    }
  }
  if (!any_labelled) throw TrainingError("ground truth has no labelled pixels");
  if (cells.empty()) throw TrainingError("no labelled pixel has a valid hypothesis");

  const Eigen::Index copies = params.augment_swapped ? 2 : 1;
  const Eigen::Index n = Eigen::Index(cells.size());
  TrainingSet set;
  set.features.resize(n * copies, kFeatureCount);
  set.labels.resize(n * copies);
  for (Eigen::Index i = 0; i < n; ++i) {
    const FeatureVector f = fv.data().row(cells[std::size_t(i)]);
    set.features.row(i) = f;
    set.labels(i) = labels[std::size_t(i)];
    if (copies == 2) {
      set.features.row(n + i) = swap_directions(f);
      set.labels(n + i) = labels[std::size_t(i)];
    }
  }
  return set;
}

void ForestParams::validate() const {
  if (n_trees <= 0 || max_depth <= 0 || min_samples_leaf <= 0 ||
      features_per_split <= 0 || features_per_split > kFeatureCount) {
    throw ConfigError("forest parameters must be positive with features_per_split <= 20");
  }
}

double DecisionTree::predict(const FeatureVector& f) const {
  int i = 0;
  while (!nodes[std::size_t(i)].is_leaf()) {
    const Node& n = nodes[std::size_t(i)];
    i = f(n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[std::size_t(i)].value;
}

int DecisionTree::depth() const {
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[std::size_t(nodes[i].left)] = level[i] + 1;
      level[std::size_t(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

double ForestModel::predict(const FeatureVector& f) const {
  double sum = 0.0;
  for (const DecisionTree& t : trees) sum += t.predict(f);
  return std::clamp(sum / double(trees.size()), 0.0, 1.0);
}

void ForestModel::validate() const {
  if (trees.empty()) throw DataError("model has no trees");
  for (const DecisionTree& t : trees) {
    const int n = int(t.nodes.size());
    if (n == 0) throw DataError("model contains an empty tree");
    std::vector<int> parents(t.nodes.size(), 0);
    for (int i = 0; i < n; ++i) {
      const auto& node = t.nodes[std::size_t(i)];
      if (node.is_leaf()) {
        if (node.feature != -1 || !(node.value >= 0.0 && node.value <= 1.0)) {
          throw DataError("leaf fraction outside [0,1]");
        }
        continue;
      }
      if (node.feature >= kFeatureCount) {
        throw DataError("split feature index out of range");
      }
      if (!std::isfinite(node.threshold)) throw DataError("non-finite threshold");
      for (int c : {node.left, node.right}) {
        if (c <= i || c >= n) throw DataError("inconsistent child links");
        ++parents[std::size_t(c)];
      }
    }
    for (int i = 1; i < n; ++i) {
      if (parents[std::size_t(i)] != 1) throw DataError("inconsistent child links");
    }
  }
}

ForestModel train_forest(const TrainingSet& samples, const ForestParams& params,
                         int threads) {
  params.validate();
  if (samples.size() == 0) throw TrainingError("empty training set");
  if (samples.positives() == 0 || samples.negatives() == 0) {
    throw TrainingError("training set contains a single class");
  }
  require_finite(samples);

  ForestModel model;
  model.trees.resize(std::size_t(params.n_trees));
  const int n = int(samples.size());
  parallel_for(params.n_trees, threads, [&](int t) {
    Rng rng(splitmix64(params.seed ^ splitmix64(std::uint64_t(t) + 1)));
    std::vector<int> indices(static_cast<std::size_t>(n));
    if (params.bootstrap) {
      for (int& i : indices) i = int(uniform_below(rng, std::uint64_t(n)));
      std::sort(indices.begin(), indices.end());
    } else {
      std::iota(indices.begin(), indices.end(), 0);
    }
    TreeBuilder builder(samples, params, std::move(rng));
    model.trees[std::size_t(t)] = builder.build(std::move(indices));
  });
  return model;
}

double training_accuracy(const ForestModel& model, const TrainingSet& samples) {
  if (samples.size() == 0) return 0.0;
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    const bool predicted = model.predict(samples.features.row(i)) >= 0.5;
    correct += predicted == (samples.labels(i) != 0);
  }
  return double(correct) / double(samples.size());
}

CostVolume predict_volume(const ForestModel& model, const FeatureVolume& fv,
                          int threads) {
  model.validate();
  CostVolume out(fv.height(), fv.width(), fv.range(), 1.0, Side::left);
  parallel_for(fv.height(), threads, [&](int y) {
    for (int x = 0; x < fv.width(); ++x) {
      for (int d = 0; d <= fv.d_max(); ++d) {
        if (!out.valid(y, x, d)) continue;
        out(y, x, d) = 1.0 - model.predict(fv.row(y, x, d));
      }
    }
  });
  return out;
}

namespace {

constexpr const char* kModelMagic = "cbmv-forest";

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void malformed(const std::string& what) {
  throw DataError("malformed model file: " + what);
}

std::istringstream next_line(std::istream& is, const char* expect) {
  std::string line;
  if (!std::getline(is, line)) malformed(std::string("missing ") + expect);
  return std::istringstream(line);
}

}  // namespace

void write_model(const ForestModel& model, std::ostream& os) {
  os << kModelMagic << ' ' << ForestModel::kFormatVersion << '\n';
  os << "features " << kFeatureCount << '\n';
  os << "trees " << model.trees.size() << '\n';
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const auto& nodes = model.trees[t].nodes;
    os << "tree " << t << ' ' << nodes.size() << '\n';
    for (const auto& node : nodes) {
      if (node.is_leaf()) {
        os << "leaf " << format_double(node.value) << '\n';
      } else {
        os << "split " << node.feature << ' ' << format_double(node.threshold) << ' '
           << node.left << ' ' << node.right << ' ' << format_double(node.value)
           << '\n';
      }
    }
  }
}

ForestModel read_model(std::istream& is) {
  std::string word;
  int version = 0;
  {
    auto line = next_line(is, "header");
    if (!(line >> word >> version) || word != kModelMagic) malformed("bad header");
    if (version != ForestModel::kFormatVersion) {
      throw DataError("model format version " + std::to_string(version) +
                      " is not supported");
    }
  }
  {
    auto line = next_line(is, "feature count");
    int features = 0;
    if (!(line >> word >> features) || word != "features") malformed("feature count");
    if (features != kFeatureCount) {
      throw DataError("model expects " + std::to_string(features) +
                      " features, this build produces " +
                      std::to_string(kFeatureCount));
    }
  }
  std::size_t tree_count = 0;
  {
    auto line = next_line(is, "tree count");
    if (!(line >> word >> tree_count) || word != "trees") malformed("tree count");
  }

  ForestModel model;
  model.trees.resize(tree_count);
  for (std::size_t t = 0; t < tree_count; ++t) {
    std::size_t index = 0, count = 0;
    auto header = next_line(is, "tree header");
    if (!(header >> word >> index >> count) || word != "tree" || index != t) {
      malformed("tree header");
    }
    auto& nodes = model.trees[t].nodes;
    nodes.resize(count);
    for (auto& node : nodes) {
      auto line = next_line(is, "node");
      std::string a, b, c;
      if (!(line >> word)) malformed("node record");
      if (word == "leaf") {
        if (!(line >> a)) malformed("leaf record");
        node.value = std::strtod(a.c_str(), nullptr);
      } else if (word == "split") {
        if (!(line >> node.feature >> b >> node.left >> node.right >> c)) {
          malformed("split record");
        }
        if (node.feature < 0) malformed("negative feature index");
        node.threshold = std::strtod(b.c_str(), nullptr);
        node.value = std::strtod(c.c_str(), nullptr);
      } else {
        malformed("unknown record '" + word + "'");
      }
    }
  }
  model.validate();
  return model;
}

void save_model(const ForestModel& model, const std::string& path) {
  model.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  write_model(model, os);
  if (!os) throw DataError("failed writing " + path);
}

ForestModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  return read_model(is);
}

}  // namespace cbmv
