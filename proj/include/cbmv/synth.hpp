#pragma once

#include <cstdint>
#include <vector>

#include "cbmv/volume.hpp"

namespace cbmv {

/// Axis-aligned fronto-parallel patch in left-image coordinates.
struct SynthRect {
  int x = 0, y = 0, width = 0, height = 0;
  int disparity = 0;
};

struct SynthSpec {
  int width = 160;
  int height = 120;
  int d_max = 16;
  int background_disparity = 0;
  std::vector<SynthRect> rects;
  double noise_sigma = 0.0;
  double exposure_gain = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthPair {
  GrayImage left;
  GrayImage right;
  /// Right view after warping and gain, before noise and quantization.
  GrayImage right_clean;
  DisparityMap gt;
  /// True where the left pixel has no correspondent in the right view.
  Mask occluded;
};

/// Random-dot stereogram with exact ground truth.
///
/// Surfaces are textured with uniform 8-bit levels scaled into [0, 1/gain].
/// The right view is the left view forward-warped by x_R = x_L - d with the
/// nearer surface winning; uncovered right pixels get fresh texture. Gain and
/// Gaussian noise are applied to the right view, which is then clamped and
/// quantized to 8 bits.
SynthPair synth_stereo(const SynthSpec& spec);

}  // namespace cbmv
