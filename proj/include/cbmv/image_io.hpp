#pragma once

#include <string>

#include "cbmv/volume.hpp"

namespace cbmv {

/// Single-channel PFM ("Pf"). Rows are stored bottom-to-top; a negative scale
/// means little-endian. Non-finite values read back as invalid disparities.
DisparityMap read_pfm(const std::string& path);
/// Writes little-endian (scale -1); invalid disparities become +inf.
void write_pfm(const DisparityMap& map, const std::string& path);

/// KITTI convention: 16-bit grayscale PNG, value = round(d * 256), 0 = invalid.
DisparityMap read_kitti_png(const std::string& path);
void write_kitti_png(const DisparityMap& map, const std::string& path);

/// Grayscale view from an 8/16-bit PNG or PGM (P2/P5). Colour PNGs are
/// converted with luma weights 0.299, 0.587, 0.114. Values scale to [0,1].
GrayImage read_image(const std::string& path);
/// 8-bit grayscale PNG, values rounded to the nearest of 256 levels.
void write_png8(const GrayImage& img, const std::string& path);

/// Disparity map in the format implied by the extension (.pfm or .png).
DisparityMap read_disparity(const std::string& path);
void write_disparity(const DisparityMap& map, const std::string& path);

/// Evaluation mask: true where a PNG/PGM pixel is at full intensity.
Mask read_mask(const std::string& path);
/// Full intensity where `mask` is true, 0 elsewhere.
void write_mask(const Mask& mask, const std::string& path);

/// Binary volume dump: "CBMVCOST", u32 version, u32 height, width, d_max, side
/// (0 = left, 1 = right),
/// then every cell as little-endian float32 (NaN = invalid hypothesis).
void write_cost_volume(const CostVolume& vol, const std::string& path);
CostVolume read_cost_volume(const std::string& path);

}  // namespace cbmv
