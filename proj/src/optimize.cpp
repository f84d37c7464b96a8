#include "cbmv/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cbmv {
namespace {

int arm_length(const GrayImage& img, int y, int x, int dx, int dy, double tau,
               int l_max) {
  const int h = int(img.rows());
  const int w = int(img.cols());
  const double centre = img(y, x);
  double prev = centre;
  int len = 0;
  for (int k = 1; k <= l_max; ++k) {
    const int qx = x + k * dx;
    const int qy = y + k * dy;
    if (qx < 0 || qx >= w || qy < 0 || qy >= h) break;
    const double q = img(qy, qx);
    if (std::abs(q - centre) > tau || std::abs(q - prev) > tau) break;
    prev = q;
    len = k;
  }
  return len;
}

struct Arms {
  int left, right, up, down;
};

Arms combined_arms(const CrossArms& ref, const CrossArms& match, int y, int x,
                   int xm) {
  return {std::min(ref.left(y, x), match.left(y, xm)),
          std::min(ref.right(y, x), match.right(y, xm)),
          std::min(ref.up(y, x), match.up(y, xm)),
          std::min(ref.down(y, x), match.down(y, xm))};
}

void require_arms(const CostVolume& vol, const CrossArms& arms) {
  if (arms.left.rows() != vol.height() || arms.left.cols() != vol.width()) {
    throw ConfigError("cross arms do not match the volume dimensions");
  }
}

// One aggregation iteration; `horizontal_first` selects the pass order.
CostVolume aggregate_once(const CostVolume& vol, const CrossArms& ref,
                          const CrossArms& match, bool horizontal_first) {
  const int h = vol.height();
  const int w = vol.width();
  CostVolume sum = vol;
  Eigen::ArrayXd count = Eigen::ArrayXd::Zero(vol.size());

  // First pass: along the first axis of every cell's own cross.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int d = 0; d <= vol.d_max(); ++d) {
        if (!vol.valid(y, x, d)) continue;
        const Arms a = combined_arms(ref, match, y, x, matching_column(vol.side(), x, d));
        double s = 0.0;
        int n = 0;
        if (horizontal_first) {
          for (int k = -a.left; k <= a.right; ++k) {
            if (x + k < 0 || x + k >= w || !vol.valid(y, x + k, d)) continue;
            s += vol(y, x + k, d);
            ++n;
          }
        } else {
          for (int k = -a.up; k <= a.down; ++k) {
            s += vol(y + k, x, d);
            ++n;
          }
        }
        sum(y, x, d) = s;
        count(vol.index(y, x, d)) = n;
      }
    }
  }

  // Second pass: along the other axis, accumulating first-pass sums.
  CostVolume out = vol;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int d = 0; d <= vol.d_max(); ++d) {
        if (!vol.valid(y, x, d)) continue;
        const Arms a = combined_arms(ref, match, y, x, matching_column(vol.side(), x, d));
        double s = 0.0;
        double n = 0.0;
        if (horizontal_first) {
          for (int k = -a.up; k <= a.down; ++k) {
            s += sum(y + k, x, d);
            n += count(vol.index(y + k, x, d));
          }
        } else {
          for (int k = -a.left; k <= a.right; ++k) {
            if (x + k < 0 || x + k >= w || !vol.valid(y, x + k, d)) continue;
            s += sum(y, x + k, d);
            n += count(vol.index(y, x + k, d));
          }
        }
        out(y, x, d) = s / n;
      }
    }
  }
  return out;
}

// Runs the recurrence for one direction, writing L_r into `path` and adding
// L_r - C into `excess` when given.
void run_path(const CostVolume& vol, const GrayImage& guide, const SgmParams& params,
              PathStep step, CostVolume& path, Eigen::ArrayXd* excess) {
  const int h = vol.height();
  const int w = vol.width();
  const int dmax = vol.d_max();

  // Visit order guarantees p - r is finished before p.
  for (int iy = 0; iy < h; ++iy) {
    const int y = step.dy >= 0 ? iy : h - 1 - iy;
    for (int ix = 0; ix < w; ++ix) {
      const int x = step.dx >= 0 ? ix : w - 1 - ix;
      const int px = x - step.dx;
      const int py = y - step.dy;
      const bool has_prev = px >= 0 && px < w && py >= 0 && py < h;

      if (!has_prev) {
        for (int d = 0; d <= dmax; ++d) {
          if (vol.valid(y, x, d)) path(y, x, d) = vol(y, x, d);
        }
        continue;
      }

      double min_prev = std::numeric_limits<double>::infinity();
      for (int k = 0; k <= dmax; ++k) {
        if (vol.valid(py, px, k)) min_prev = std::min(min_prev, path(py, px, k));
      }
      const double p2 = std::abs(guide(y, x) - guide(py, px)) > params.tau_so
                            ? params.p2 / params.edge_divisor
                            : params.p2;

      for (int d = 0; d <= dmax; ++d) {
        if (!vol.valid(y, x, d)) continue;
        // A disparity that was out of range one step back starts its path
        // fresh, as if the previous cell held the running minimum.
        double best = vol.valid(py, px, d) ? std::min(min_prev + p2, path(py, px, d)) : min_prev;
        if (d > 0 && vol.valid(py, px, d - 1)) {
          best = std::min(best, path(py, px, d - 1) + params.p1);
        }
        if (d < dmax && vol.valid(py, px, d + 1)) {
          best = std::min(best, path(py, px, d + 1) + params.p1);
        }
        const double delta = best - min_prev;
        path(y, x, d) = vol(y, x, d) + delta;
        if (excess) (*excess)(vol.index(y, x, d)) += delta;
      }
    }
  }
}

const GrayImage& reference_image(const CostVolume& vol, const GrayImage& left,
                                 const GrayImage& right) {
  return vol.side() == Side::left ? left : right;
}

}  // namespace

void CbcaParams::validate() const {
  if (!(tau >= 0.0) || l_max < 0 || iterations_pre < 0 || iterations_post < 0) {
    throw ConfigError("cbca parameters must be non-negative");
  }
}

void SgmParams::validate() const {
  if (p1 < 0.0 || p2 < p1 || !(edge_divisor > 0.0) || !(tau_so >= 0.0)) {
    throw ConfigError("sgm parameters require 0 <= p1 <= p2 and edge_divisor > 0");
  }
  if (paths != 4 && paths != 8) throw ConfigError("sgm paths must be 4 or 8");
}

CrossArms build_cross_arms(const GrayImage& img, const CbcaParams& params) {
  params.validate();
  const int h = int(img.rows());
  const int w = int(img.cols());
  CrossArms arms{Plane<int>(h, w), Plane<int>(h, w), Plane<int>(h, w),
                 Plane<int>(h, w)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      arms.left(y, x) = arm_length(img, y, x, -1, 0, params.tau, params.l_max);
      arms.right(y, x) = arm_length(img, y, x, 1, 0, params.tau, params.l_max);
      arms.up(y, x) = arm_length(img, y, x, 0, -1, params.tau, params.l_max);
      arms.down(y, x) = arm_length(img, y, x, 0, 1, params.tau, params.l_max);
    }
  }
  return arms;
}

CostVolume cbca_aggregate(const CostVolume& vol, const CrossArms& arms_ref,
                          const CrossArms& arms_match, int iterations) {
  require_arms(vol, arms_ref);
  require_arms(vol, arms_match);
  CostVolume out = vol;
  for (int i = 0; i < iterations; ++i) {
    out = aggregate_once(out, arms_ref, arms_match, i % 2 == 0);
  }
  return out;
}

std::vector<PathStep> sgm_directions(int paths) {
  std::vector<PathStep> steps = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  if (paths == 8) {
    steps.insert(steps.end(), {{1, 1}, {-1, 1}, {1, -1}, {-1, -1}});
  } else if (paths != 4) {
    throw ConfigError("sgm paths must be 4 or 8");
  }
  return steps;
}

CostVolume sgm_path(const CostVolume& vol, const GrayImage& guide,
                    const SgmParams& params, PathStep step) {
  if (guide.rows() != vol.height() || guide.cols() != vol.width()) {
    throw ConfigError("guide image does not match the volume");
  }
  CostVolume path = vol;
  run_path(vol, guide, params, step, path, nullptr);
  return path;
}

CostVolume sgm(const CostVolume& vol, const GrayImage& left, const GrayImage& right,
               const SgmParams& params) {
  params.validate();
  const GrayImage& guide = reference_image(vol, left, right);
  if (guide.rows() != vol.height() || guide.cols() != vol.width()) {
    throw ConfigError("guide image does not match the volume");
  }
  const auto steps = sgm_directions(params.paths);
  Eigen::ArrayXd excess = Eigen::ArrayXd::Zero(vol.size());
  CostVolume path = vol;
  for (const PathStep& step : steps) {
    run_path(vol, guide, params, step, path, &excess);
  }
  CostVolume out = vol;
  out.values() = vol.values() + excess / double(steps.size());
  out.restore_sentinels();
  return out;
}

CostVolume optimize_volume(const CostVolume& vol, const GrayImage& left,
                           const GrayImage& right, const CbcaParams& cbca,
                           const SgmParams& sgm_params) {
  cbca.validate();
  sgm_params.validate();
  const bool is_left = vol.side() == Side::left;
  const CrossArms arms_left = build_cross_arms(left, cbca);
  const CrossArms arms_right = build_cross_arms(right, cbca);
  const CrossArms& ref = is_left ? arms_left : arms_right;
  const CrossArms& match = is_left ? arms_right : arms_left;

  CostVolume out = cbca_aggregate(vol, ref, match, cbca.iterations_pre);
  out = sgm(out, left, right, sgm_params);
  return cbca_aggregate(out, ref, match, cbca.iterations_post);
}

}  // namespace cbmv
