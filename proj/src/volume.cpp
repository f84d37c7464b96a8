#include "cbmv/volume.hpp"

#include <cmath>

namespace cbmv {
namespace {

CostVolume flip_side(const CostVolume& vol, Side target) {
  CostVolume out(vol.height(), vol.width(), vol.range(), vol.sentinel(), target);
  for (int y = 0; y < vol.height(); ++y) {
    for (int x = 0; x < vol.width(); ++x) {
      for (int d = 0; d <= vol.d_max(); ++d) {
        if (!out.valid(y, x, d)) continue;
        out(y, x, d) = vol(y, matching_column(target, x, d), d);
      }
    }
  }
  return out;
}

}  // namespace

CostVolume shift_to_right_volume(const CostVolume& vol) {
  if (vol.side() != Side::left) {
    throw ConfigError("shift_to_right_volume expects a left-indexed volume");
  }
  return flip_side(vol, Side::right);
}

CostVolume shift_to_left_volume(const CostVolume& vol) {
  if (vol.side() != Side::right) {
    throw ConfigError("shift_to_left_volume expects a right-indexed volume");
  }
  return flip_side(vol, Side::left);
}

void validate_image(const GrayImage& img, const std::string& what) {
  if (img.size() == 0) throw ConfigError(what + ": empty image");
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    const double v = img.data()[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ConfigError(what + ": intensities must lie in [0,1]");
    }
  }
}

void require_same_size(const GrayImage& left, const GrayImage& right) {
  if (left.rows() != right.rows() || left.cols() != right.cols()) {
    throw ConfigError("left and right images differ in size");
  }
}

}  // namespace cbmv
