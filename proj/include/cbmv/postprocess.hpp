#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "cbmv/volume.hpp"

namespace cbmv {

enum class PixelStatus : std::uint8_t { valid = 0, occlusion = 1, mismatch = 2 };

using StatusMap = Plane<PixelStatus>;

struct PostParams {
  double lr_tolerance = 1.0;
  int median_window = 5;
  // Calibrated on random-dot fixtures, where the guide carries no edge cue.
  double bilateral_spatial_sigma = 1.0;
  double bilateral_range_sigma = 0.01;

  void validate() const;
};

/// Smallest disparity attaining the minimum valid cost of each pixel.
DisparityMap wta(const CostVolume& vol);

/// Parabola through C(d-1), C(d), C(d+1); the offset is clamped to
/// [-0.5, 0.5] and skipped at range borders or non-convex neighbourhoods.
DisparityMap subpixel_refine(const DisparityMap& map, const CostVolume& vol);

/// Left map indexed by x_L, right map by x_R.
StatusMap lr_check(const DisparityMap& left, const DisparityMap& right, int d_max,
                   double tolerance = 1.0);

/// Occlusions take the nearest valid disparity to their left (else right);
/// mismatches take the median of the nearest valid disparities along 16
/// directions. Rows without any valid pixel copy the nearest filled row.
DisparityMap fill_invalid(const DisparityMap& map, const StatusMap& status);

/// Median over a window x window neighbourhood with replicate borders.
/// Invalid pixels do not vote.
DisparityMap median_filter(const DisparityMap& map, int window = 5);

/// Spatial Gaussian times guide-intensity Gaussian, normalized per pixel.
/// spatial_sigma <= 0 is the identity; range_sigma <= 0 only mixes pixels of
/// identical guide intensity.
DisparityMap bilateral_filter(const DisparityMap& map, const GrayImage& guide,
                              double spatial_sigma = 5.0, double range_sigma = 0.03);

/// Observer for intermediate maps, called with a stage name.
using StageSink = std::function<void(const std::string&, const DisparityMap&)>;

/// WTA and sub-pixel on both volumes, left-right check, hole filling, median
/// and bilateral filtering. Returns the left map, clamped to [0, d_max].
DisparityMap postprocess_pipeline(const CostVolume& left_vol,
                                  const CostVolume& right_vol,
                                  const GrayImage& left_img, const GrayImage& right_img,
                                  const PostParams& params,
                                  const StageSink& sink = {});

}  // namespace cbmv
