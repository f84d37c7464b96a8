#pragma once

#include <string>
#include <vector>

#include "cbmv/config.hpp"
#include "cbmv/forest.hpp"
#include "cbmv/postprocess.hpp"

namespace cbmv {

/// Rectified pair with ground truth, for training.
struct LabelledPair {
  GrayImage left;
  GrayImage right;
  DisparityMap gt;
};

struct TrainingReport {
  ForestModel model;
  Eigen::Index samples = 0;
  Eigen::Index positives = 0;
  Eigen::Index negatives = 0;
  double accuracy = 0.0;
};

/// Features per pair, samples pooled across pairs, one forest over all.
TrainingReport train_model(const std::vector<LabelledPair>& pairs,
                           const PipelineConfig& config, int threads = 1);

/// Left coalesced volume of a pair.
CostVolume compute_cbmv(const GrayImage& left, const GrayImage& right,
                        const ForestModel& model, const PipelineConfig& config,
                        int threads = 1);

struct PredictOptions {
  bool skip_optimization = false;
  StageSink sink;
  int threads = 1;
};

struct PredictResult {
  CostVolume cbmv_left;
  DisparityMap disparity;
};

/// Full flow: matchers, features, forest, right volume by shifting, optimize
/// both volumes, post-process. With skip_optimization the result is plain
/// WTA on the left coalesced volume.
PredictResult predict_disparity(const GrayImage& left, const GrayImage& right,
                                const ForestModel& model, const PipelineConfig& config,
                                const PredictOptions& options = {});

}  // namespace cbmv
