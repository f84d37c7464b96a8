#include "cbmv/matchers.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace cbmv {
namespace {

using PatchMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Variance sums at or below this are treated as a constant patch.
constexpr double kFlatPatch = 1e-12;

int clamp_index(int v, int n) { return std::clamp(v, 0, n - 1); }

void require_window(int window, const char* name) {
  if (window < 3 || window % 2 == 0) {
    throw ConfigError(std::string(name) + " window must be odd and >= 3");
  }
}

// One row per pixel holding its window, replicate-padded, row-major.
PatchMatrix extract_patches(const Plane<double>& img, int window) {
  const int h = int(img.rows());
  const int w = int(img.cols());
  const int r = window / 2;
  PatchMatrix patches(Eigen::Index(h) * w, window * window);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto row = patches.row(Eigen::Index(y) * w + x);
      int k = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          row(k++) = img(clamp_index(y + dy, h), clamp_index(x + dx, w));
        }
      }
    }
  }
  return patches;
}

PatchMatrix center_rows(const PatchMatrix& patches) {
  const Eigen::VectorXd mean = patches.rowwise().mean();
  return patches.colwise() - mean;
}

// Evaluates `cost(p_left, p_right)` for every valid hypothesis.
template <typename CostFn>
CostVolume fill_volume(int h, int w, DisparityRange range, double max_cost,
                       CostFn&& cost) {
  CostVolume vol(h, w, range, max_cost, Side::left);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Index pl = Eigen::Index(y) * w + x;
      for (int d = 0; d <= range.d_max && x - d >= 0; ++d) {
        vol(y, x, d) = cost(pl, pl - d);
      }
    }
  }
  return vol;
}

void check_inputs(const GrayImage& left, const GrayImage& right,
                  DisparityRange range) {
  require_same_size(left, right);
  if (left.size() == 0) throw ConfigError("empty input images");
  if (range.d_max < 0) throw ConfigError("d_max must be non-negative");
}

}  // namespace

std::string_view matcher_name(Matcher m) {
  switch (m) {
    case Matcher::ncc: return "ncc";
    case Matcher::census: return "census";
    case Matcher::zsad: return "zsad";
    case Matcher::sobel: return "sobel";
  }
  return "unknown";
}

void MatcherParams::validate() const {
  require_window(ncc_window, "ncc");
  require_window(zsad_window, "zsad");
  require_window(census_window, "census");
  require_window(sobel_sad_window, "sobel");
}

CensusImage::CensusImage(int height, int width, int window)
    : height_(height),
      width_(width),
      bits_(window * window - 1),
      words_per_pixel_((window * window - 1 + 63) / 64),
      words_(std::size_t(height) * width * words_per_pixel_, 0) {}

CensusImage census_transform(const GrayImage& img, int window) {
  if (window < 1 || window % 2 == 0) throw ConfigError("census window must be odd");
  const int h = int(img.rows());
  const int w = int(img.cols());
  const int r = window / 2;
  CensusImage out(h, w, window);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double centre = img(y, x);
      auto code = out.code(y, x);
      int bit = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (dy == 0 && dx == 0) continue;
          if (img(clamp_index(y + dy, h), clamp_index(x + dx, w)) < centre) {
            code[bit / 64] |= std::uint64_t{1} << (bit % 64);
          }
          ++bit;
        }
      }
    }
  }
  return out;
}

int hamming_distance(std::span<const std::uint64_t> a,
                     std::span<const std::uint64_t> b) {
  int n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += std::popcount(a[i] ^ b[i]);
  return n;
}

Plane<double> sobel_horizontal(const GrayImage& img) {
  const int h = int(img.rows());
  const int w = int(img.cols());
  Plane<double> out(h, w);
  for (int y = 0; y < h; ++y) {
    const int ym = clamp_index(y - 1, h);
    const int yp = clamp_index(y + 1, h);
    for (int x = 0; x < w; ++x) {
      const int xm = clamp_index(x - 1, w);
      const int xp = clamp_index(x + 1, w);
      out(y, x) = (img(ym, xp) - img(ym, xm)) + 2.0 * (img(y, xp) - img(y, xm)) +
                  (img(yp, xp) - img(yp, xm));
    }
  }
  return out;
}

namespace kernel {

double ncc(std::span<const double> a, std::span<const double> b) {
  const auto va = Eigen::Map<const Eigen::ArrayXd>(a.data(), Eigen::Index(a.size()));
  const auto vb = Eigen::Map<const Eigen::ArrayXd>(b.data(), Eigen::Index(b.size()));
  const Eigen::ArrayXd ca = va - va.mean();
  const Eigen::ArrayXd cb = vb - vb.mean();
  const double saa = ca.square().sum();
  const double sbb = cb.square().sum();
  if (saa <= kFlatPatch || sbb <= kFlatPatch) return 0.0;
  return std::clamp((ca * cb).sum() / std::sqrt(saa * sbb), -1.0, 1.0);
}

double zsad(std::span<const double> a, std::span<const double> b) {
  const auto va = Eigen::Map<const Eigen::ArrayXd>(a.data(), Eigen::Index(a.size()));
  const auto vb = Eigen::Map<const Eigen::ArrayXd>(b.data(), Eigen::Index(b.size()));
  return ((va - va.mean()) - (vb - vb.mean())).abs().sum();
}

double sad(std::span<const double> a, std::span<const double> b) {
  const auto va = Eigen::Map<const Eigen::ArrayXd>(a.data(), Eigen::Index(a.size()));
  const auto vb = Eigen::Map<const Eigen::ArrayXd>(b.data(), Eigen::Index(b.size()));
  return (va - vb).abs().sum();
}

}  // namespace kernel

double declared_max_cost(Matcher m, const MatcherParams& params) {
  switch (m) {
    case Matcher::ncc: return 1.0;
    case Matcher::census:
      return double(params.census_window * params.census_window - 1);
    case Matcher::zsad: return double(params.zsad_window * params.zsad_window);
    case Matcher::sobel:
      // |response| <= 4 for [0,1] inputs, so a per-pixel difference is <= 8.
      return 8.0 * params.sobel_sad_window * params.sobel_sad_window;
  }
  return 1.0;
}

CostVolume cost_volume_census(const GrayImage& left, const GrayImage& right,
                              DisparityRange range, const MatcherParams& params) {
  check_inputs(left, right, range);
  require_window(params.census_window, "census");
  const CensusImage cl = census_transform(left, params.census_window);
  const CensusImage cr = census_transform(right, params.census_window);
  const int w = int(left.cols());
  return fill_volume(int(left.rows()), w, range,
                     declared_max_cost(Matcher::census, params),
                     [&](Eigen::Index pl, Eigen::Index pr) {
                       return double(hamming_distance(
                           cl.code(int(pl / w), int(pl % w)),
                           cr.code(int(pr / w), int(pr % w))));
                     });
}

CostVolume cost_volume_ncc(const GrayImage& left, const GrayImage& right,
                           DisparityRange range, const MatcherParams& params) {
  check_inputs(left, right, range);
  require_window(params.ncc_window, "ncc");
  const PatchMatrix cl = center_rows(extract_patches(left, params.ncc_window));
  const PatchMatrix cr = center_rows(extract_patches(right, params.ncc_window));
  const Eigen::VectorXd nl = cl.rowwise().squaredNorm();
  const Eigen::VectorXd nr = cr.rowwise().squaredNorm();
  return fill_volume(int(left.rows()), int(left.cols()), range, 1.0,
                     [&](Eigen::Index pl, Eigen::Index pr) {
                       double score = 0.0;
                       if (nl(pl) > kFlatPatch && nr(pr) > kFlatPatch) {
                         score = std::clamp(cl.row(pl).dot(cr.row(pr)) /
                                                std::sqrt(nl(pl) * nr(pr)),
                                            -1.0, 1.0);
                       }
                       return 0.5 * (1.0 - score);
                     });
}

CostVolume cost_volume_zsad(const GrayImage& left, const GrayImage& right,
                            DisparityRange range, const MatcherParams& params) {
  check_inputs(left, right, range);
  require_window(params.zsad_window, "zsad");
  const PatchMatrix cl = center_rows(extract_patches(left, params.zsad_window));
  const PatchMatrix cr = center_rows(extract_patches(right, params.zsad_window));
  return fill_volume(int(left.rows()), int(left.cols()), range,
                     declared_max_cost(Matcher::zsad, params),
                     [&](Eigen::Index pl, Eigen::Index pr) {
                       return (cl.row(pl) - cr.row(pr)).cwiseAbs().sum();
                     });
}

CostVolume cost_volume_sobel_sad(const GrayImage& left, const GrayImage& right,
                                 DisparityRange range,
                                 const MatcherParams& params) {
  check_inputs(left, right, range);
  require_window(params.sobel_sad_window, "sobel");
  const PatchMatrix pl_all =
      extract_patches(sobel_horizontal(left), params.sobel_sad_window);
  const PatchMatrix pr_all =
      extract_patches(sobel_horizontal(right), params.sobel_sad_window);
  return fill_volume(int(left.rows()), int(left.cols()), range,
                     declared_max_cost(Matcher::sobel, params),
                     [&](Eigen::Index pl, Eigen::Index pr) {
                       return (pl_all.row(pl) - pr_all.row(pr)).cwiseAbs().sum();
                     });
}

CostVolume cost_volume(Matcher m, const GrayImage& left, const GrayImage& right,
                       DisparityRange range, const MatcherParams& params) {
  switch (m) {
    case Matcher::ncc: return cost_volume_ncc(left, right, range, params);
    case Matcher::census: return cost_volume_census(left, right, range, params);
    case Matcher::zsad: return cost_volume_zsad(left, right, range, params);
    case Matcher::sobel: return cost_volume_sobel_sad(left, right, range, params);
  }
  throw ConfigError("unknown matcher");
}

std::array<CostVolume, kMatcherCount> compute_all_volumes(
    const GrayImage& left, const GrayImage& right, DisparityRange range,
    const MatcherParams& params) {
  params.validate();
  return {cost_volume_ncc(left, right, range, params),
          cost_volume_census(left, right, range, params),
          cost_volume_zsad(left, right, range, params),
          cost_volume_sobel_sad(left, right, range, params)};
}

}  // namespace cbmv
