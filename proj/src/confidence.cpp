#include "cbmv/confidence.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace cbmv {
namespace {

// Column of `vol` holding hypothesis d of scan line u. A left scan line is a
// pixel of the volume itself; a right scan line is a pixel of the other view.
int line_column(const CostVolume& vol, Direction dir, int u, int d) {
  if (dir == Direction::left) return u;
  return vol.side() == Side::left ? u + d : u - d;
}

bool line_cell_valid(const CostVolume& vol, int y, int x, int d) {
  return x >= 0 && x < vol.width() && vol.valid(y, x, d);
}

// Scan line that cell (x, d) belongs to.
int line_of(const CostVolume& vol, Direction dir, int x, int d) {
  return dir == Direction::left ? x : matching_column(vol.side(), x, d);
}

PixelMinima scan_minima(const CostVolume& vol, Direction dir) {
  PixelMinima m{Plane<double>(vol.height(), vol.width()),
                Plane<int>(vol.height(), vol.width())};
  for (int y = 0; y < vol.height(); ++y) {
    for (int u = 0; u < vol.width(); ++u) {
      double best = std::numeric_limits<double>::infinity();
      int best_d = 0;
      for (int d = 0; d <= vol.d_max(); ++d) {
        const int x = line_column(vol, dir, u, d);
        if (!line_cell_valid(vol, y, x, d)) continue;
        if (vol(y, x, d) < best) {
          best = vol(y, x, d);
          best_d = d;
        }
      }
      m.c_min(y, u) = best;
      m.d_min(y, u) = best_d;
    }
  }
  return m;
}

double gaussian_score(double cost, double c_min, double sigma) {
  const double diff = cost - c_min;
  return std::exp(-(diff * diff) / (2.0 * sigma * sigma));
}

void require_minima_shape(const CostVolume& vol, const PixelMinima& minima) {
  if (minima.c_min.rows() != vol.height() || minima.c_min.cols() != vol.width()) {
    throw ConfigError("minima do not match the volume dimensions");
  }
}

}  // namespace

PixelMinima minima_left(const CostVolume& vol) {
  return scan_minima(vol, Direction::left);
}

PixelMinima minima_right(const CostVolume& vol) {
  return scan_minima(vol, Direction::right);
}

CostVolume ratio_volume(const CostVolume& vol, const PixelMinima& minima,
                        Direction direction) {
  require_minima_shape(vol, minima);
  CostVolume out(vol.height(), vol.width(), vol.range(), 0.0, vol.side());
  for (int y = 0; y < vol.height(); ++y) {
    for (int x = 0; x < vol.width(); ++x) {
      for (int d = 0; d <= vol.d_max(); ++d) {
        if (!vol.valid(y, x, d)) continue;
        const double c_min = minima.c_min(y, line_of(vol, direction, x, d));
        out(y, x, d) = (c_min + kRatioEpsilon) / (vol(y, x, d) + kRatioEpsilon);
      }
    }
  }
  return out;
}

CostVolume likelihood_volume(const CostVolume& vol, const PixelMinima& minima,
                             Direction direction, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("likelihood sigma must be positive");
  require_minima_shape(vol, minima);

  Plane<double> denom = Plane<double>::Zero(vol.height(), vol.width());
  for (int y = 0; y < vol.height(); ++y) {
    for (int u = 0; u < vol.width(); ++u) {
      double sum = 0.0;
      for (int d = 0; d <= vol.d_max(); ++d) {
        const int x = line_column(vol, direction, u, d);
        if (!line_cell_valid(vol, y, x, d)) continue;
        sum += gaussian_score(vol(y, x, d), minima.c_min(y, u), sigma);
      }
      denom(y, u) = sum;
    }
  }

  CostVolume out(vol.height(), vol.width(), vol.range(), 0.0, vol.side());
  for (int y = 0; y < vol.height(); ++y) {
    for (int x = 0; x < vol.width(); ++x) {
      for (int d = 0; d <= vol.d_max(); ++d) {
        if (!vol.valid(y, x, d)) continue;
        const int u = line_of(vol, direction, x, d);
        // The minimum itself contributes exp(0) = 1, so denom >= 1.
        out(y, x, d) = gaussian_score(vol(y, x, d), minima.c_min(y, u), sigma) /
                       denom(y, u);
      }
    }
  }
  return out;
}

std::string feature_name(int index) {
  static constexpr const char* kSlots[kFeaturesPerMatcher] = {
      "cost", "likelihood_left", "ratio_left", "likelihood_right", "ratio_right"};
  if (index < 0 || index >= kFeatureCount) return "invalid";
  return std::string(matcher_name(Matcher(index / kFeaturesPerMatcher))) + "." +
         kSlots[index % kFeaturesPerMatcher];
}

FeatureVector swap_directions(const FeatureVector& f) {
  FeatureVector out = f;
  for (int m = 0; m < kMatcherCount; ++m) {
    const int base = m * kFeaturesPerMatcher;
    out(base + kSlotLikelihoodLeft) = f(base + kSlotLikelihoodRight);
    out(base + kSlotRatioLeft) = f(base + kSlotRatioRight);
    out(base + kSlotLikelihoodRight) = f(base + kSlotLikelihoodLeft);
    out(base + kSlotRatioRight) = f(base + kSlotRatioLeft);
  }
  return out;
}

double ConfidenceParams::sigma(Matcher m) const {
  switch (m) {
    case Matcher::ncc: return sigma_ncc;
    case Matcher::census: return sigma_census;
    case Matcher::zsad: return sigma_zsad;
    case Matcher::sobel: return sigma_sobel;
  }
  return 1.0;
}

void ConfidenceParams::validate() const {
  for (Matcher m : kAllMatchers) {
    if (!(sigma(m) > 0.0) || !std::isfinite(sigma(m))) {
      throw ConfigError("sigma for " + std::string(matcher_name(m)) +
                        " must be positive");
    }
  }
}

FeatureVolume::FeatureVolume(int height, int width, DisparityRange range)
    : height_(height), width_(width), range_(range) {
  if (height <= 0 || width <= 0 || range.d_max < 0) {
    throw ConfigError("feature volume dimensions must be positive");
  }
  data_ = Storage::Constant(Eigen::Index(height) * width * range.count(), kFeatureCount,
                            std::numeric_limits<double>::quiet_NaN());
}

FeatureVolume assemble_features(const std::array<CostVolume, kMatcherCount>& volumes,
                                const ConfidenceParams& params) {
  params.validate();
  const CostVolume& ref = volumes[0];
  for (const CostVolume& v : volumes) {
    if (v.height() != ref.height() || v.width() != ref.width() ||
        v.d_max() != ref.d_max() || v.side() != Side::left) {
      throw ConfigError("matcher volumes differ in dimensions");
    }
  }

  FeatureVolume fv(ref.height(), ref.width(), ref.range());
  for (Matcher m : kAllMatchers) {
    const CostVolume& vol = volumes[std::size_t(m)];
    const PixelMinima min_l = minima_left(vol);
    const PixelMinima min_r = minima_right(vol);
    const double sigma = params.sigma(m);
    const CostVolume lik_l = likelihood_volume(vol, min_l, Direction::left, sigma);
    const CostVolume rat_l = ratio_volume(vol, min_l, Direction::left);
    const CostVolume lik_r = likelihood_volume(vol, min_r, Direction::right, sigma);
    const CostVolume rat_r = ratio_volume(vol, min_r, Direction::right);

    for (Eigen::Index i = 0; i < vol.size(); ++i) {
      if (!vol.flags()(i)) continue;
      auto row = fv.data().row(i);
      row(feature_index(m, kSlotCost)) = vol.values()(i);
      row(feature_index(m, kSlotLikelihoodLeft)) = lik_l.values()(i);
      row(feature_index(m, kSlotRatioLeft)) = rat_l.values()(i);
      row(feature_index(m, kSlotLikelihoodRight)) = lik_r.values()(i);
      row(feature_index(m, kSlotRatioRight)) = rat_r.values()(i);
    }
  }
  return fv;
}

FeatureVolume compute_features(const GrayImage& left, const GrayImage& right,
                               DisparityRange range, const MatcherParams& matchers,
                               const ConfidenceParams& confidence) {
  return assemble_features(compute_all_volumes(left, right, range, matchers),
                           confidence);
}

namespace {

constexpr char kFeatureMagic[8] = {'C', 'B', 'M', 'V', 'F', 'E', 'A', 'T'};
constexpr std::uint32_t kFeatureVersion = 1;

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = (value >> (8 * i)) & 0xff;
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw DataError("feature file truncated");
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= T(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void write_feature_volume(const FeatureVolume& fv, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  os.write(kFeatureMagic, sizeof(kFeatureMagic));
  put_le<std::uint32_t>(os, kFeatureVersion);
  put_le<std::uint32_t>(os, std::uint32_t(fv.height()));
  put_le<std::uint32_t>(os, std::uint32_t(fv.width()));
  put_le<std::uint32_t>(os, std::uint32_t(fv.d_max()));
  put_le<std::uint32_t>(os, std::uint32_t(kFeatureCount));
  for (Eigen::Index i = 0; i < fv.data().size(); ++i) {
    const float v = float(fv.data().data()[i]);
    put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
  }
  if (!os) throw DataError("failed writing " + path);
}

FeatureVolume read_feature_volume(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  char magic[sizeof(kFeatureMagic)];
  if (!is.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kFeatureMagic, sizeof(magic)) != 0) {
    throw DataError(path + ": not a feature volume file");
  }
  if (get_le<std::uint32_t>(is) != kFeatureVersion) {
    throw DataError(path + ": unsupported feature file version");
  }
  const auto h = get_le<std::uint32_t>(is);
  const auto w = get_le<std::uint32_t>(is);
  const auto d_max = get_le<std::uint32_t>(is);
  if (get_le<std::uint32_t>(is) != std::uint32_t(kFeatureCount)) {
    throw DataError(path + ": feature layout mismatch");
  }
  if (h == 0 || w == 0 || h > 1u << 16 || w > 1u << 16 || d_max > 1u << 12) {
    throw DataError(path + ": implausible dimensions");
  }
  FeatureVolume fv(int(h), int(w), DisparityRange{int(d_max)});
  for (Eigen::Index i = 0; i < fv.data().size(); ++i) {
    fv.data().data()[i] = double(std::bit_cast<float>(get_le<std::uint32_t>(is)));
  }
  return fv;
}

}  // namespace cbmv
