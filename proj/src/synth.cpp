#include "cbmv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cbmv {
namespace {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

void SynthSpec::validate() const {
  if (width <= 0 || height <= 0) throw ConfigError("synthetic image must be non-empty");
  if (d_max < 0) throw ConfigError("d_max must be non-negative");
  if (background_disparity < 0 || background_disparity > d_max) {
    throw ConfigError("background disparity outside [0, d_max]");
  }
  for (const SynthRect& r : rects) {
    if (r.width <= 0 || r.height <= 0 || r.x < 0 || r.y < 0 || r.x + r.width > width ||
        r.y + r.height > height) {
      throw ConfigError("rectangle lies outside the image");
    }
    if (r.disparity > d_max || r.disparity < 0) {
      throw ConfigError("rectangle disparity outside [0, d_max]");
    }
    if (r.disparity <= background_disparity) {
      throw ConfigError("rectangles must be nearer than the background");
    }
  }
  if (!(exposure_gain > 0.0) || !std::isfinite(exposure_gain)) {
    throw ConfigError("exposure gain must be positive");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
}

SynthPair synth_stereo(const SynthSpec& spec) {
  spec.validate();
  const int h = spec.height;
  const int w = spec.width;
  std::mt19937_64 rng(mix_seed(spec.seed));

  // Highest 8-bit level whose gained value still fits in [0,1].
  const int top_level = std::clamp(int(std::floor(255.0 / spec.exposure_gain)), 1, 255);
  std::uniform_int_distribution<int> level(0, top_level);
  auto texel = [&] { return level(rng) / 255.0; };

  SynthPair out;
  out.left.resize(h, w);
  out.gt = DisparityMap::Constant(h, w, double(spec.background_disparity));
  for (Eigen::Index i = 0; i < out.left.size(); ++i) out.left.data()[i] = texel();

  std::vector<SynthRect> rects = spec.rects;
  std::stable_sort(rects.begin(), rects.end(), [](const SynthRect& a, const SynthRect& b) {
    return a.disparity < b.disparity;
  });
  for (const SynthRect& r : rects) {
    for (int y = r.y; y < r.y + r.height; ++y) {
      for (int x = r.x; x < r.x + r.width; ++x) {
        out.left(y, x) = texel();
        out.gt(y, x) = r.disparity;
      }
    }
  }

  // Forward warp; the larger disparity (nearer surface) wins a collision.
  out.right_clean = GrayImage::Constant(h, w, -1.0);
  Plane<int> owner = Plane<int>::Constant(h, w, -1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int d = int(out.gt(y, x));
      const int xr = x - d;
      if (xr < 0) continue;
      const int current = owner(y, xr);
      if (current < 0 || out.gt(y, current) < d) {
        owner(y, xr) = x;
        out.right_clean(y, xr) = spec.exposure_gain * out.left(y, x);
      }
    }
  }

  out.occluded = Mask::Constant(h, w, false);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int xr = x - int(out.gt(y, x));
      out.occluded(y, x) = xr < 0 || owner(y, xr) != x;
    }
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (owner(y, x) < 0) out.right_clean(y, x) = spec.exposure_gain * texel();
    }
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  out.right.resize(h, w);
  for (Eigen::Index i = 0; i < out.right.size(); ++i) {
    double v = out.right_clean.data()[i];
    if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise(rng);
    out.right.data()[i] = std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  }
  return out;
}

}  // namespace cbmv
