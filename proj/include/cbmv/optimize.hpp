#pragma once

#include <vector>

#include "cbmv/volume.hpp"

namespace cbmv {

/// Arm lengths of the adaptive cross at every pixel.
struct CrossArms {
  Plane<int> left, right, up, down;
};

struct CbcaParams {
  double tau = 0.08;
  int l_max = 14;
  int iterations_pre = 2;
  int iterations_post = 2;

  void validate() const;
};

struct SgmParams {
  double p1 = 0.03;
  double p2 = 0.3;
  /// Intensity step above which P2 is divided by edge_divisor.
  double tau_so = 0.08;
  double edge_divisor = 4.0;
  int paths = 4;

  void validate() const;
};

/// Each arm grows while the next pixel q satisfies |I(q) - I(p)| <= tau and
/// |I(q) - I(q_prev)| <= tau, up to l_max pixels and the image border.
CrossArms build_cross_arms(const GrayImage& img, const CbcaParams& params);

/// Cross-based aggregation. The support of hypothesis (x, d) is the
/// intersection of the reference cross at x and the matching-image cross at
/// the matched column. Even iterations sum horizontally then vertically, odd
/// iterations the other way round; each pass replaces the cost by the mean
/// over the support. Invalid cells are excluded and left unchanged.
///
/// `arms_ref` belongs to the image the volume is indexed by, `arms_match` to
/// the other view.
CostVolume cbca_aggregate(const CostVolume& vol, const CrossArms& arms_ref,
                          const CrossArms& arms_match, int iterations);

/// Unit step of an SGM path, in (dx, dy).
struct PathStep {
  int dx;
  int dy;
};

/// The 4 (axis-aligned) or 8 (plus diagonal) path directions.
std::vector<PathStep> sgm_directions(int paths);

/// Path cost L_r for a single direction. `guide` is the reference image of
/// the volume and drives the edge-adaptive P2.
CostVolume sgm_path(const CostVolume& vol, const GrayImage& guide,
                    const SgmParams& params, PathStep step);

/// Semi-global matching: C + mean over directions of (L_r - C).
CostVolume sgm(const CostVolume& vol, const GrayImage& left, const GrayImage& right,
               const SgmParams& params);

/// CBCA (pre) -> SGM -> CBCA (post), applied to one volume.
CostVolume optimize_volume(const CostVolume& vol, const GrayImage& left,
                           const GrayImage& right, const CbcaParams& cbca,
                           const SgmParams& sgm_params);

}  // namespace cbmv
