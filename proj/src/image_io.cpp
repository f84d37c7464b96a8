#include "cbmv/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

namespace cbmv {
namespace {

// Decoded raster: interleaved samples, each normalized by `max_value`.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;
  double max_value = 255.0;
  std::vector<std::uint16_t> samples;
};

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open " + path);
  return f;
}

std::string extension(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return {};
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return ext;
}

Raster read_png_raster(const std::string& path) {
  FilePtr file = open_file(path, "rb");
  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8)) {
    throw DataError(path + ": not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng initialisation failed");
  }

  Raster raster;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(path + ": corrupt or truncated PNG");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  raster.width = int(png_get_image_width(png, info));
  raster.height = int(png_get_image_height(png, info));
  raster.channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  raster.max_value = out_depth == 16 ? 65535.0 : 255.0;
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  buffer.resize(row_bytes * std::size_t(raster.height));
  rows.resize(std::size_t(raster.height));
  for (int y = 0; y < raster.height; ++y) rows[std::size_t(y)] = buffer.data() + row_bytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count = std::size_t(raster.width) * raster.height * raster.channels;
  raster.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    raster.samples[i] = out_depth == 16
                            ? std::uint16_t((buffer[2 * i] << 8) | buffer[2 * i + 1])
                            : buffer[i];
  }
  return raster;
}

void write_png_gray(const std::string& path, int width, int height, int depth,
                    const std::vector<std::uint16_t>& samples) {
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng initialisation failed");
  }
  const int bytes = depth / 8;
  std::vector<png_byte> buffer(std::size_t(width) * height * bytes);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (bytes == 2) {
      buffer[2 * i] = png_byte(samples[i] >> 8);
      buffer[2 * i + 1] = png_byte(samples[i] & 0xff);
    } else {
      buffer[i] = png_byte(samples[i]);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[std::size_t(y)] = buffer.data() + std::size_t(width) * bytes * y;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed writing " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), depth,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Next whitespace-delimited PNM header token, skipping '#' comments.
std::string pnm_token(std::istream& is) {
  std::string token;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(char(c));
  }
  return token;
}

int parse_positive(const std::string& token, const std::string& path) {
  char* end = nullptr;
  const long v = std::strtol(token.c_str(), &end, 10);
  if (token.empty() || *end != '\0' || v <= 0 || v > (1 << 20)) {
    throw DataError(path + ": malformed header");
  }
  return int(v);
}

Raster read_pgm_raster(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  const std::string magic = pnm_token(is);
  if (magic != "P5" && magic != "P2") throw DataError(path + ": not a PGM file");
  Raster r;
  r.channels = 1;
  r.width = parse_positive(pnm_token(is), path);
  r.height = parse_positive(pnm_token(is), path);
  const int maxval = parse_positive(pnm_token(is), path);
  if (maxval > 65535) throw DataError(path + ": malformed header");
  r.max_value = maxval;
  const std::size_t count = std::size_t(r.width) * r.height;
  r.samples.resize(count);
  if (magic == "P2") {
    for (auto& s : r.samples) {
      const std::string t = pnm_token(is);
      if (t.empty()) throw DataError(path + ": truncated payload");
      char* end = nullptr;
      const long v = std::strtol(t.c_str(), &end, 10);
      if (*end != '\0' || v < 0) throw DataError(path + ": malformed sample");
      s = std::uint16_t(std::min(v, long(maxval)));
    }
  } else {
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(count * bytes);
    if (!is.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()))) {
      throw DataError(path + ": truncated payload");
    }
    for (std::size_t i = 0; i < count; ++i) {
      r.samples[i] = bytes == 2 ? std::uint16_t((raw[2 * i] << 8) | raw[2 * i + 1])
                                : raw[i];
    }
  }
  return r;
}

Raster read_raster(const std::string& path) {
  const std::string ext = extension(path);
  if (ext == "png") return read_png_raster(path);
  if (ext == "pgm" || ext == "pnm") return read_pgm_raster(path);
  throw DataError(path + ": unsupported image format");
}

}  // namespace

DisparityMap read_pfm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  std::string magic;
  std::string sw, sh, sscale;
  if (!(is >> magic >> sw >> sh >> sscale)) throw DataError(path + ": malformed PFM header");
  if (magic != "Pf") {
    throw DataError(path + (magic == "PF" ? ": colour PFM is not a disparity map"
                                          : ": not a PFM file"));
  }
  const int w = parse_positive(sw, path);
  const int h = parse_positive(sh, path);
  char* end = nullptr;
  const double scale = std::strtod(sscale.c_str(), &end);
  if (*end != '\0' || scale == 0.0 || !std::isfinite(scale)) {
    throw DataError(path + ": malformed PFM scale");
  }
  if (!std::isspace(is.get())) throw DataError(path + ": malformed PFM header");
  const bool little = scale < 0.0;

  std::vector<unsigned char> raw(std::size_t(w) * h * 4);
  if (!is.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()))) {
    throw DataError(path + ": truncated PFM payload");
  }
  DisparityMap map(h, w);
  for (int row = 0; row < h; ++row) {
    const int y = h - 1 - row;
    for (int x = 0; x < w; ++x) {
      const unsigned char* b = raw.data() + (std::size_t(row) * w + x) * 4;
      const std::uint32_t bits =
          little ? std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
                       std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24
                 : std::uint32_t(b[3]) | std::uint32_t(b[2]) << 8 |
                       std::uint32_t(b[1]) << 16 | std::uint32_t(b[0]) << 24;
      const float v = std::bit_cast<float>(bits);
      map(y, x) = std::isfinite(v) ? double(v) : kInvalidDisparity;
    }
  }
  return map;
}

void write_pfm(const DisparityMap& map, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  const int h = int(map.rows());
  const int w = int(map.cols());
  os << "Pf\n" << w << ' ' << h << "\n-1\n";
  std::vector<unsigned char> raw(std::size_t(w) * h * 4);
  for (int row = 0; row < h; ++row) {
    const int y = h - 1 - row;
    for (int x = 0; x < w; ++x) {
      const double d = map(y, x);
      const float v = is_valid_disparity(d) ? float(d)
                                            : std::numeric_limits<float>::infinity();
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
      unsigned char* b = raw.data() + (std::size_t(row) * w + x) * 4;
      for (int k = 0; k < 4; ++k) b[k] = (bits >> (8 * k)) & 0xff;
    }
  }
  os.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
  if (!os) throw DataError("failed writing " + path);
}

DisparityMap read_kitti_png(const std::string& path) {
  const Raster r = read_png_raster(path);
  if (r.channels != 1 || r.max_value != 65535.0) {
    throw DataError(path + ": KITTI disparity must be a 16-bit grayscale PNG");
  }
  DisparityMap map(r.height, r.width);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      const std::uint16_t v = r.samples[std::size_t(y) * r.width + x];
      map(y, x) = v == 0 ? kInvalidDisparity : double(v) / 256.0;
    }
  }
  return map;
}

void write_kitti_png(const DisparityMap& map, const std::string& path) {
  std::vector<std::uint16_t> samples(std::size_t(map.size()));
  for (Eigen::Index y = 0; y < map.rows(); ++y) {
    for (Eigen::Index x = 0; x < map.cols(); ++x) {
      const double d = map(y, x);
      std::uint16_t v = 0;
      // 0 is reserved for invalid, so a valid d < 1/512 is stored as 1/256.
      if (is_valid_disparity(d) && std::isfinite(d)) {
        v = std::uint16_t(std::clamp(std::lround(d * 256.0), 1l, 65535l));
      }
      samples[std::size_t(y * map.cols() + x)] = v;
    }
  }
  write_png_gray(path, int(map.cols()), int(map.rows()), 16, samples);
}

GrayImage read_image(const std::string& path) {
  const Raster r = read_raster(path);
  GrayImage img(r.height, r.width);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      const std::size_t base = (std::size_t(y) * r.width + x) * r.channels;
      double v;
      if (r.channels >= 3) {
        v = 0.299 * r.samples[base] + 0.587 * r.samples[base + 1] +
            0.114 * r.samples[base + 2];
      } else {
        v = r.samples[base];
      }
      img(y, x) = std::clamp(v / r.max_value, 0.0, 1.0);
    }
  }
  return img;
}

void write_png8(const GrayImage& img, const std::string& path) {
  std::vector<std::uint16_t> samples(std::size_t(img.size()));
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    const double v = std::clamp(img.data()[i], 0.0, 1.0);
    samples[std::size_t(i)] = std::uint16_t(std::lround(v * 255.0));
  }
  write_png_gray(path, int(img.cols()), int(img.rows()), 8, samples);
}

DisparityMap read_disparity(const std::string& path) {
  const std::string ext = extension(path);
  if (ext == "pfm") return read_pfm(path);
  if (ext == "png") return read_kitti_png(path);
  throw DataError(path + ": unsupported disparity format (expected .pfm or .png)");
}

void write_disparity(const DisparityMap& map, const std::string& path) {
  const std::string ext = extension(path);
  if (ext == "pfm") return write_pfm(map, path);
  if (ext == "png") return write_kitti_png(map, path);
  throw DataError(path + ": unsupported disparity format (expected .pfm or .png)");
}

Mask read_mask(const std::string& path) {
  const Raster r = read_raster(path);
  Mask mask(r.height, r.width);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      mask(y, x) = r.samples[(std::size_t(y) * r.width + x) * r.channels] == r.max_value;
    }
  }
  return mask;
}

void write_mask(const Mask& mask, const std::string& path) {
  std::vector<std::uint16_t> samples(std::size_t(mask.size()));
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    samples[std::size_t(i)] = mask.data()[i] ? 255 : 0;
  }
  write_png_gray(path, int(mask.cols()), int(mask.rows()), 8, samples);
}

namespace {

constexpr char kVolumeMagic[8] = {'C', 'B', 'M', 'V', 'C', 'O', 'S', 'T'};
constexpr std::uint32_t kVolumeVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError(path + ": truncated volume");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

}  // namespace

void write_cost_volume(const CostVolume& vol, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  os.write(kVolumeMagic, sizeof(kVolumeMagic));
  put_u32(os, kVolumeVersion);
  put_u32(os, std::uint32_t(vol.height()));
  put_u32(os, std::uint32_t(vol.width()));
  put_u32(os, std::uint32_t(vol.d_max()));
  put_u32(os, vol.side() == Side::left ? 0u : 1u);
  for (Eigen::Index i = 0; i < vol.size(); ++i) {
    const float v = vol.flags()(i) ? float(vol.values()(i))
                                   : std::numeric_limits<float>::quiet_NaN();
    put_u32(os, std::bit_cast<std::uint32_t>(v));
  }
  if (!os) throw DataError("failed writing " + path);
}

CostVolume read_cost_volume(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  char magic[sizeof(kVolumeMagic)];
  if (!is.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kVolumeMagic, sizeof(magic)) != 0) {
    throw DataError(path + ": not a cost volume file");
  }
  if (get_u32(is, path) != kVolumeVersion) {
    throw DataError(path + ": unsupported volume version");
  }
  const std::uint32_t h = get_u32(is, path);
  const std::uint32_t w = get_u32(is, path);
  const std::uint32_t d_max = get_u32(is, path);
  const std::uint32_t side = get_u32(is, path);
  if (h == 0 || w == 0 || h > 1u << 16 || w > 1u << 16 || d_max > 1u << 12 || side > 1) {
    throw DataError(path + ": implausible volume header");
  }
  CostVolume vol(int(h), int(w), DisparityRange{int(d_max)}, 1.0,
                 side == 0 ? Side::left : Side::right);
  for (Eigen::Index i = 0; i < vol.size(); ++i) {
    const float v = std::bit_cast<float>(get_u32(is, path));
    if (vol.flags()(i)) vol.values()(i) = double(v);
  }
  return vol;
}

}  // namespace cbmv
