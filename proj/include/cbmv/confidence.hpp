#pragma once

#include <array>
#include <string>

#include "cbmv/matchers.hpp"
#include "cbmv/volume.hpp"

namespace cbmv {

/// Scan direction of a confidence measure. `left` walks the cost curve of a
/// left pixel (constant x_L); `right` walks the hypotheses that share one
/// right pixel (constant x_R = x_L - d).
enum class Direction { left, right };

/// Minimum valid cost per scan line, with the smallest disparity attaining it.
/// For Direction::right the planes are indexed by x_R.
struct PixelMinima {
  Plane<double> c_min;
  Plane<int> d_min;
};

PixelMinima minima_left(const CostVolume& vol);
PixelMinima minima_right(const CostVolume& vol);

inline constexpr double kRatioEpsilon = 1e-6;

/// (c_min + eps) / (C + eps) for every valid hypothesis of `vol`.
CostVolume ratio_volume(const CostVolume& vol, const PixelMinima& minima,
                        Direction direction);

/// Cost curve turned into a distribution along the scan line:
/// exp(-(C - c_min)^2 / 2 sigma^2), normalized over the valid cells of the line.
CostVolume likelihood_volume(const CostVolume& vol, const PixelMinima& minima,
                             Direction direction, double sigma);

inline constexpr int kFeaturesPerMatcher = 5;
inline constexpr int kFeatureCount = kMatcherCount * kFeaturesPerMatcher;

/// Offsets inside one matcher block: [C, L^L, R^L, L^R, R^R].
enum FeatureSlot : int {
  kSlotCost = 0,
  kSlotLikelihoodLeft = 1,
  kSlotRatioLeft = 2,
  kSlotLikelihoodRight = 3,
  kSlotRatioRight = 4,
};

constexpr int feature_index(Matcher m, FeatureSlot slot) {
  return int(m) * kFeaturesPerMatcher + slot;
}

std::string feature_name(int index);

using FeatureVector = Eigen::Matrix<double, 1, kFeatureCount>;

/// Exchanges the left and right confidence pairs in every matcher block.
FeatureVector swap_directions(const FeatureVector& f);

/// Likelihood sigma per matcher, on the raw scale of its costs.
struct ConfidenceParams {
  // NCC costs are already normalized; CENSUS counts bits.
  double sigma_ncc = 0.02;
  double sigma_census = 8.0;
  // 100 on 8-bit intensities, rescaled to the [0,1] intensity scale. The
  // original tuning scale of these two is an inference (100 / 255).
  double sigma_zsad = 100.0 / 255.0;
  double sigma_sobel = 100.0 / 255.0;

  double sigma(Matcher m) const;
  void validate() const;
};

/// One 20-vector per hypothesis of an H x W x (d_max+1) grid.
class FeatureVolume {
 public:
  using Storage = Eigen::Matrix<double, Eigen::Dynamic, kFeatureCount, Eigen::RowMajor>;

  FeatureVolume(int height, int width, DisparityRange range);

  int height() const { return height_; }
  int width() const { return width_; }
  int d_max() const { return range_.d_max; }
  DisparityRange range() const { return range_; }
  Eigen::Index cells() const { return data_.rows(); }

  Eigen::Index index(int y, int x, int d) const {
    return (Eigen::Index(y) * width_ + x) * range_.count() + d;
  }
  bool valid(int /*y*/, int x, int d) const { return hypothesis_valid(x, d, width_); }

  auto row(int y, int x, int d) { return data_.row(index(y, x, d)); }
  auto row(int y, int x, int d) const { return data_.row(index(y, x, d)); }

  const Storage& data() const { return data_; }
  Storage& data() { return data_; }

 private:
  int height_;
  int width_;
  DisparityRange range_;
  Storage data_;
};

/// Builds the feature volume from the four raw volumes (Matcher order).
/// Invalid hypotheses hold NaN in every feature.
FeatureVolume assemble_features(const std::array<CostVolume, kMatcherCount>& volumes,
                                const ConfidenceParams& params);

/// Raw volumes plus features in one call.
FeatureVolume compute_features(const GrayImage& left, const GrayImage& right,
                               DisparityRange range, const MatcherParams& matchers,
                               const ConfidenceParams& confidence);

/// Binary dump: "CBMVFEAT", u32 version, u32 height, width, d_max, feature
/// count, then every cell's features as little-endian float32 (NaN = invalid).
void write_feature_volume(const FeatureVolume& fv, const std::string& path);
FeatureVolume read_feature_volume(const std::string& path);

}  // namespace cbmv
