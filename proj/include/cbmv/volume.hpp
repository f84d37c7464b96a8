#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace cbmv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent parameters or mismatched dimensions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, malformed or otherwise unusable input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Row-major 2D plane; rows = image height, cols = image width.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Rectified grayscale view, intensities in [0,1].
using GrayImage = Plane<double>;

/// Real-valued disparities; any negative value marks an invalid pixel.
using DisparityMap = Plane<double>;

/// Per-pixel boolean mask.
using Mask = Plane<bool>;

inline constexpr double kInvalidDisparity = -1.0;

inline bool is_valid_disparity(double d) { return d >= 0.0; }

/// Candidate disparities are the integers 0..d_max.
struct DisparityRange {
  int d_max = 0;

  int count() const { return d_max + 1; }
  bool contains(int d) const { return d >= 0 && d <= d_max; }
};

/// Which image a volume is indexed by. A left volume stores C(x_L, d) and
/// matches column x_L - d in the right image; a right volume stores
/// C(x_R, d) and matches column x_R + d in the left image.
enum class Side { left, right };

/// True iff the right-image column x_L - d exists.
inline bool hypothesis_valid(int x_left, int d, int width) {
  const int x_right = x_left - d;
  return x_right >= 0 && x_right < width;
}

/// Column in the other image that hypothesis (x, d) refers to.
inline int matching_column(Side side, int x, int d) {
  return side == Side::left ? x - d : x + d;
}

/// Dense H x W x (d_max+1) volume with a per-cell validity flag.
///
/// Storage is (row y, column x, disparity d) with d innermost. Invalid cells
/// hold `sentinel()`; every routine that reduces over cells skips them.
template <typename Scalar>
class Volume {
 public:
  using Values = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using Flags = Eigen::Array<bool, Eigen::Dynamic, 1>;

  Volume() = default;

  /// Creates a volume whose validity mask follows the geometry of `side`
  /// and whose cells all hold `sentinel`.
  Volume(int height, int width, DisparityRange range, Scalar sentinel,
         Side side = Side::left)
      : height_(height), width_(width), range_(range), side_(side),
        sentinel_(sentinel) {
    if (height <= 0 || width <= 0 || range.d_max < 0) {
      throw ConfigError("volume dimensions must be positive");
    }
    cost_ = Values::Constant(size(), sentinel);
    valid_.resize(size());
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        for (int d = 0; d <= range_.d_max; ++d) {
          const int xm = matching_column(side_, x, d);
          valid_(index(y, x, d)) = xm >= 0 && xm < width_;
        }
      }
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int d_max() const { return range_.d_max; }
  int disparities() const { return range_.count(); }
  DisparityRange range() const { return range_; }
  Side side() const { return side_; }
  Scalar sentinel() const { return sentinel_; }
  Eigen::Index size() const {
    return Eigen::Index(height_) * width_ * range_.count();
  }

  Eigen::Index index(int y, int x, int d) const {
    return (Eigen::Index(y) * width_ + x) * range_.count() + d;
  }

  Scalar operator()(int y, int x, int d) const { return cost_(index(y, x, d)); }
  Scalar& operator()(int y, int x, int d) { return cost_(index(y, x, d)); }
  bool valid(int y, int x, int d) const { return valid_(index(y, x, d)); }

  /// Writable cost curve of pixel (y, x) over all disparities.
  auto curve(int y, int x) { return cost_.segment(index(y, x, 0), range_.count()); }
  auto curve(int y, int x) const {
    return cost_.segment(index(y, x, 0), range_.count());
  }

  const Values& values() const { return cost_; }
  Values& values() { return cost_; }
  const Flags& flags() const { return valid_; }

  /// Resets every invalid cell to the sentinel.
  void restore_sentinels() {
    cost_ = valid_.select(cost_, Values::Constant(size(), sentinel_));
  }

 private:
  int height_ = 0;
  int width_ = 0;
  DisparityRange range_{};
  Side side_ = Side::left;
  Scalar sentinel_ = Scalar(1);
  Values cost_;
  Flags valid_;
};

using CostVolume = Volume<double>;

/// Re-indexes a left volume by right-image column: C_R(x_R, d) = C_L(x_R + d, d).
/// A right volume is mapped back the same way. Values are copied, never
/// recomputed.
CostVolume shift_to_right_volume(const CostVolume& vol);

/// Inverse of shift_to_right_volume.
CostVolume shift_to_left_volume(const CostVolume& vol);

/// Throws ConfigError when `img` is empty or holds values outside [0,1].
void validate_image(const GrayImage& img, const std::string& what);

/// Throws ConfigError unless both views have identical dimensions.
void require_same_size(const GrayImage& left, const GrayImage& right);

}  // namespace cbmv
