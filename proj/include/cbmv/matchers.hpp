#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "cbmv/volume.hpp"

namespace cbmv {

/// The four block matchers, in feature-vector order.
enum class Matcher { ncc = 0, census = 1, zsad = 2, sobel = 3 };

inline constexpr int kMatcherCount = 4;
inline constexpr std::array<Matcher, kMatcherCount> kAllMatchers = {
    Matcher::ncc, Matcher::census, Matcher::zsad, Matcher::sobel};

std::string_view matcher_name(Matcher m);

/// Square window side lengths; all must be odd and at least 3.
struct MatcherParams {
  int ncc_window = 3;
  int zsad_window = 5;
  int census_window = 11;
  int sobel_sad_window = 5;

  void validate() const;
};

/// Per-pixel census bit strings, packed into 64-bit words.
///
/// Bit i of a pixel is 1 iff the i-th neighbour (row-major over the window,
/// centre skipped) is strictly darker than the centre.
class CensusImage {
 public:
  CensusImage(int height, int width, int window);

  int height() const { return height_; }
  int width() const { return width_; }
  int bits() const { return bits_; }

  std::span<const std::uint64_t> code(int y, int x) const {
    return {words_.data() + offset(y, x), std::size_t(words_per_pixel_)};
  }
  std::span<std::uint64_t> code(int y, int x) {
    return {words_.data() + offset(y, x), std::size_t(words_per_pixel_)};
  }
  bool bit(int y, int x, int i) const {
    return (code(y, x)[i / 64] >> (i % 64)) & 1u;
  }

 private:
  std::size_t offset(int y, int x) const {
    return (std::size_t(y) * width_ + x) * words_per_pixel_;
  }

  int height_;
  int width_;
  int bits_;
  int words_per_pixel_;
  std::vector<std::uint64_t> words_;
};

CensusImage census_transform(const GrayImage& img, int window);

int hamming_distance(std::span<const std::uint64_t> a,
                     std::span<const std::uint64_t> b);

/// 3x3 horizontal Sobel response [[-1,0,1],[-2,0,2],[-1,0,1]], applied as a
/// correlation (a ramp increasing to the right gives a positive response)
/// with replicate padding.
Plane<double> sobel_horizontal(const GrayImage& img);

/// Window kernels on two equally sized patches.
namespace kernel {
/// Zero-mean normalized cross-correlation; 0 when either patch is constant.
double ncc(std::span<const double> a, std::span<const double> b);
/// Sum of |(a - mean a) - (b - mean b)|.
double zsad(std::span<const double> a, std::span<const double> b);
double sad(std::span<const double> a, std::span<const double> b);
}  // namespace kernel

/// Highest cost each matcher can report for a given window.
double declared_max_cost(Matcher m, const MatcherParams& params);

CostVolume cost_volume_census(const GrayImage& left, const GrayImage& right,
                              DisparityRange range, const MatcherParams& params);
CostVolume cost_volume_ncc(const GrayImage& left, const GrayImage& right,
                           DisparityRange range, const MatcherParams& params);
CostVolume cost_volume_zsad(const GrayImage& left, const GrayImage& right,
                            DisparityRange range, const MatcherParams& params);
CostVolume cost_volume_sobel_sad(const GrayImage& left, const GrayImage& right,
                                 DisparityRange range,
                                 const MatcherParams& params);

CostVolume cost_volume(Matcher m, const GrayImage& left, const GrayImage& right,
                       DisparityRange range, const MatcherParams& params);

/// All four raw volumes, indexed by Matcher.
std::array<CostVolume, kMatcherCount> compute_all_volumes(
    const GrayImage& left, const GrayImage& right, DisparityRange range,
    const MatcherParams& params);

}  // namespace cbmv
