#include "cbmv/postprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace cbmv {
namespace {

double median_of(std::vector<double>& values) {
  const std::size_t n = values.size();
  const auto mid = values.begin() + std::ptrdiff_t(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

void require_same_shape(const DisparityMap& a, const DisparityMap& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError("disparity maps differ in size");
  }
}

}  // namespace

void PostParams::validate() const {
  if (lr_tolerance < 0.0) throw ConfigError("lr tolerance must be non-negative");
  if (median_window < 1 || median_window % 2 == 0) {
    throw ConfigError("median window must be odd and positive");
  }
}

DisparityMap wta(const CostVolume& vol) {
  DisparityMap out(vol.height(), vol.width());
  for (int y = 0; y < vol.height(); ++y) {
    for (int x = 0; x < vol.width(); ++x) {
      int best_d = -1;
      double best = 0.0;
      for (int d = 0; d <= vol.d_max(); ++d) {
        if (!vol.valid(y, x, d)) continue;
        if (best_d < 0 || vol(y, x, d) < best) {
          best = vol(y, x, d);
          best_d = d;
        }
      }
      out(y, x) = best_d < 0 ? kInvalidDisparity : double(best_d);
    }
  }
  return out;
}

DisparityMap subpixel_refine(const DisparityMap& map, const CostVolume& vol) {
  if (map.rows() != vol.height() || map.cols() != vol.width()) {
    throw ConfigError("disparity map does not match the volume");
  }
  DisparityMap out = map;
  for (int y = 0; y < vol.height(); ++y) {
    for (int x = 0; x < vol.width(); ++x) {
      if (!is_valid_disparity(map(y, x))) continue;
      const int d = int(std::lround(map(y, x)));
      if (d <= 0 || d >= vol.d_max()) continue;
      if (!vol.valid(y, x, d - 1) || !vol.valid(y, x, d + 1)) continue;
      const double cm = vol(y, x, d - 1);
      const double c0 = vol(y, x, d);
      const double cp = vol(y, x, d + 1);
      const double denom = cp - 2.0 * c0 + cm;
      if (!(denom > 0.0)) continue;
      const double offset = std::clamp(-(cp - cm) / (2.0 * denom), -0.5, 0.5);
      out(y, x) = d + offset;
    }
  }
  return out;
}

StatusMap lr_check(const DisparityMap& left, const DisparityMap& right, int d_max,
                   double tolerance) {
  require_same_shape(left, right);
  const int h = int(left.rows());
  const int w = int(left.cols());
  StatusMap status(h, w);

  auto consistent = [&](int y, int xr, double d) {
    if (xr < 0 || xr >= w) return false;
    const double dr = right(y, xr);
    return is_valid_disparity(dr) && std::abs(d - dr) <= tolerance;
  };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dl = left(y, x);
      if (is_valid_disparity(dl) && consistent(y, x - int(std::lround(dl)), dl)) {
        status(y, x) = PixelStatus::valid;
        continue;
      }
      bool any = false;
      for (int d = 0; d <= d_max && !any; ++d) any = consistent(y, x - d, double(d));
      status(y, x) = any ? PixelStatus::mismatch : PixelStatus::occlusion;
    }
  }
  return status;
}

DisparityMap fill_invalid(const DisparityMap& map, const StatusMap& status) {
  if (status.rows() != map.rows() || status.cols() != map.cols()) {
    throw ConfigError("status map does not match the disparity map");
  }
  const int h = int(map.rows());
  const int w = int(map.cols());
  auto source = [&](int y, int x) {
    return status(y, x) == PixelStatus::valid && is_valid_disparity(map(y, x));
  };

  auto along_row = [&](int y, int x) {
    for (int k = x - 1; k >= 0; --k) {
      if (source(y, k)) return map(y, k);
    }
    for (int k = x + 1; k < w; ++k) {
      if (source(y, k)) return map(y, k);
    }
    return kInvalidDisparity;
  };

  constexpr int kDirections = 16;
  std::array<double, kDirections> dir_x{}, dir_y{};
  for (int k = 0; k < kDirections; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / kDirections;
    dir_x[std::size_t(k)] = std::cos(angle);
    dir_y[std::size_t(k)] = std::sin(angle);
  }
  const int reach = w + h;

  DisparityMap out = map;
  std::vector<double> found;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (source(y, x)) continue;
      double value = kInvalidDisparity;
      if (status(y, x) == PixelStatus::mismatch) {
        found.clear();
        for (int k = 0; k < kDirections; ++k) {
          for (int t = 1; t <= reach; ++t) {
            const int qx = x + int(std::lround(t * dir_x[std::size_t(k)]));
            const int qy = y + int(std::lround(t * dir_y[std::size_t(k)]));
            if (qx < 0 || qx >= w || qy < 0 || qy >= h) break;
            if (source(qy, qx)) {
              found.push_back(map(qy, qx));
              break;
            }
          }
        }
        if (!found.empty()) value = median_of(found);
      }
      if (!is_valid_disparity(value)) value = along_row(y, x);
      out(y, x) = value;
    }
  }

  // Rows with no valid pixel at all borrow from the nearest filled row.
  std::vector<bool> row_ok(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    row_ok[std::size_t(y)] = (out.row(y) >= 0.0).all();
  }
  for (int y = 0; y < h; ++y) {
    if (row_ok[std::size_t(y)]) continue;
    for (int off = 1; off < h; ++off) {
      const int candidates[2] = {y - off, y + off};
      bool done = false;
      for (int yy : candidates) {
        if (yy >= 0 && yy < h && row_ok[std::size_t(yy)]) {
          out.row(y) = out.row(yy);
          done = true;
          break;
        }
      }
      if (done) break;
    }
  }
  return out;
}

DisparityMap median_filter(const DisparityMap& map, int window) {
  if (window < 1 || window % 2 == 0) throw ConfigError("median window must be odd");
  if (window == 1) return map;
  const int h = int(map.rows());
  const int w = int(map.cols());
  const int r = window / 2;
  DisparityMap out(h, w);
  std::vector<double> values;
  values.reserve(std::size_t(window * window));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      values.clear();
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const double v = map(std::clamp(y + dy, 0, h - 1), std::clamp(x + dx, 0, w - 1));
          if (is_valid_disparity(v)) values.push_back(v);
        }
      }
      out(y, x) = values.empty() ? map(y, x) : median_of(values);
    }
  }
  return out;
}

DisparityMap bilateral_filter(const DisparityMap& map, const GrayImage& guide,
                              double spatial_sigma, double range_sigma) {
  if (guide.rows() != map.rows() || guide.cols() != map.cols()) {
    throw ConfigError("guide image does not match the disparity map");
  }
  if (!(spatial_sigma > 0.0)) return map;
  const int h = int(map.rows());
  const int w = int(map.cols());
  const int r = int(std::ceil(3.0 * spatial_sigma));

  Plane<double> spatial(2 * r + 1, 2 * r + 1);
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      spatial(dy + r, dx + r) =
          std::exp(-double(dx * dx + dy * dy) / (2.0 * spatial_sigma * spatial_sigma));
    }
  }

  DisparityMap out = map;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!is_valid_disparity(map(y, x))) continue;
      const double centre = guide(y, x);
      double num = 0.0;
      double den = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        const int qy = y + dy;
        if (qy < 0 || qy >= h) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const int qx = x + dx;
          if (qx < 0 || qx >= w || !is_valid_disparity(map(qy, qx))) continue;
          const double diff = guide(qy, qx) - centre;
          double range_w;
          if (range_sigma > 0.0) {
            range_w = std::exp(-(diff * diff) / (2.0 * range_sigma * range_sigma));
          } else {
            range_w = diff == 0.0 ? 1.0 : 0.0;
          }
          const double weight = spatial(dy + r, dx + r) * range_w;
          num += weight * (map(qy, qx) - map(y, x));
          den += weight;
        }
      }
      // The centre always contributes weight 1, so den > 0. Averaging offsets
      // from the centre keeps constant maps bit-exact.
      out(y, x) = map(y, x) + num / den;
    }
  }
  return out;
}

DisparityMap postprocess_pipeline(const CostVolume& left_vol,
                                  const CostVolume& right_vol,
                                  const GrayImage& left_img, const GrayImage& right_img,
                                  const PostParams& params, const StageSink& sink) {
  params.validate();
  if (left_vol.side() != Side::left || right_vol.side() != Side::right) {
    throw ConfigError("postprocess expects a left and a right volume");
  }
  require_same_size(left_img, right_img);
  auto emit = [&](const char* name, const DisparityMap& m) {
    if (sink) sink(name, m);
  };

  const DisparityMap wta_left = wta(left_vol);
  const DisparityMap wta_right = wta(right_vol);
  emit("wta_left", wta_left);
  emit("wta_right", wta_right);

  const DisparityMap sub_left = subpixel_refine(wta_left, left_vol);
  const DisparityMap sub_right = subpixel_refine(wta_right, right_vol);
  emit("subpixel_left", sub_left);

  const StatusMap status =
      lr_check(sub_left, sub_right, left_vol.d_max(), params.lr_tolerance);
  DisparityMap status_plane = status.cast<std::uint8_t>().cast<double>();
  emit("lr_status", status_plane);

  const DisparityMap filled = fill_invalid(sub_left, status);
  emit("filled", filled);
  const DisparityMap median = median_filter(filled, params.median_window);
  emit("median", median);
  DisparityMap result = bilateral_filter(median, left_img, params.bilateral_spatial_sigma,
                                         params.bilateral_range_sigma);
  const double d_max = left_vol.d_max();
  result = result.unaryExpr([d_max](double d) {
    return is_valid_disparity(d) ? std::clamp(d, 0.0, d_max) : d;
  });
  emit("final", result);
  return result;
}

}  // namespace cbmv
