#include "cbmv/pipeline.hpp"

#include "cbmv/optimize.hpp"

namespace cbmv {
namespace {

void check_pair(const GrayImage& left, const GrayImage& right) {
  validate_image(left, "left image");
  validate_image(right, "right image");
  require_same_size(left, right);
}

}  // namespace

TrainingReport train_model(const std::vector<LabelledPair>& pairs,
                           const PipelineConfig& config, int threads) {
  config.validate();
  if (pairs.empty()) throw ConfigError("training needs at least one pair");
  const DisparityRange range{config.d_max};

  TrainingSet pooled;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const LabelledPair& p = pairs[i];
    check_pair(p.left, p.right);
    if (p.gt.rows() != p.left.rows() || p.gt.cols() != p.left.cols()) {
      throw ConfigError("ground truth of pair " + std::to_string(i) +
                        " does not match its images");
    }
    const FeatureVolume fv =
        compute_features(p.left, p.right, range, config.matchers, config.confidence);
    SamplingParams sampling{config.seed + i, config.augment_swapped};
    pooled.append(sample_training_set(fv, p.gt, sampling));
  }

  TrainingReport report;
  ForestParams forest = config.forest;
  forest.seed = config.seed;
  report.model = train_forest(pooled, forest, threads);
  report.samples = pooled.size();
  report.positives = pooled.positives();
  report.negatives = pooled.negatives();
  report.accuracy = training_accuracy(report.model, pooled);
  return report;
}

CostVolume compute_cbmv(const GrayImage& left, const GrayImage& right,
                        const ForestModel& model, const PipelineConfig& config,
                        int threads) {
  config.validate();
  check_pair(left, right);
  const FeatureVolume fv = compute_features(left, right, DisparityRange{config.d_max},
                                            config.matchers, config.confidence);
  return predict_volume(model, fv, threads);
}

PredictResult predict_disparity(const GrayImage& left, const GrayImage& right,
                                const ForestModel& model, const PipelineConfig& config,
                                const PredictOptions& options) {
  PredictResult result;
  result.cbmv_left = compute_cbmv(left, right, model, config, options.threads);
  if (options.skip_optimization) {
    result.disparity = wta(result.cbmv_left);
    if (options.sink) options.sink("wta_left", result.disparity);
    return result;
  }
  // The right volume is a re-indexing of the left one, never a re-prediction.
  const CostVolume cbmv_right = shift_to_right_volume(result.cbmv_left);
  const CostVolume opt_left =
      optimize_volume(result.cbmv_left, left, right, config.cbca, config.sgm);
  const CostVolume opt_right =
      optimize_volume(cbmv_right, left, right, config.cbca, config.sgm);
  result.disparity =
      postprocess_pipeline(opt_left, opt_right, left, right, config.post, options.sink);
  return result;
}

}  // namespace cbmv
