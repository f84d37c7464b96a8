#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cbmv/confidence.hpp"
#include "cbmv/volume.hpp"

namespace cbmv {

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Row-per-sample design matrix with 0/1 labels (1 = correct hypothesis).
struct TrainingSet {
  Eigen::Matrix<double, Eigen::Dynamic, kFeatureCount, Eigen::RowMajor> features;
  Eigen::Array<std::uint8_t, Eigen::Dynamic, 1> labels;

  Eigen::Index size() const { return labels.size(); }
  Eigen::Index positives() const { return (labels != 0).count(); }
  Eigen::Index negatives() const { return size() - positives(); }

  /// Appends `other` below the current samples.
  void append(const TrainingSet& other);
};

struct SamplingParams {
  std::uint64_t seed = 0;
  /// Also emit a direction-swapped copy of every sample.
  bool augment_swapped = false;
};

/// One positive at round(gt) and two negatives outside gt +- 1 per labelled
/// pixel. Pixels whose positive hypothesis falls outside the valid range are
/// skipped. Throws TrainingError when no pixel is labelled.
TrainingSet sample_training_set(const FeatureVolume& fv, const DisparityMap& gt,
                                const SamplingParams& params);

struct ForestParams {
  int n_trees = 40;
  int max_depth = 25;
  int min_samples_leaf = 10;
  int features_per_split = 4;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Flat binary tree; node 0 is the root. Split nodes send x[feature] <=
/// threshold to `left`. Leaves store the fraction of positive training samples.
struct DecisionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
  };

  std::vector<Node> nodes;

  double predict(const FeatureVector& f) const;
  int depth() const;
};

struct ForestModel {
  static constexpr int kFormatVersion = 1;

  std::vector<DecisionTree> trees;

  /// Mean leaf fraction over trees, in [0,1].
  double predict(const FeatureVector& f) const;

  /// Throws DataError on any structural violation.
  void validate() const;
};

ForestModel train_forest(const TrainingSet& samples, const ForestParams& params,
                         int threads = 1);

/// Fraction of samples whose thresholded prediction (p >= 0.5) matches the label.
double training_accuracy(const ForestModel& model, const TrainingSet& samples);

/// The coalesced volume: 1 - p on valid hypotheses, 1 elsewhere.
CostVolume predict_volume(const ForestModel& model, const FeatureVolume& fv,
                          int threads = 1);

void write_model(const ForestModel& model, std::ostream& os);
ForestModel read_model(std::istream& is);
void save_model(const ForestModel& model, const std::string& path);
ForestModel load_model(const std::string& path);

}  // namespace cbmv
