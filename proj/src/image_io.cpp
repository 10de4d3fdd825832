#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "occsynth/grid.hpp"

namespace occsynth {

static_assert(std::endian::native == std::endian::little, "file writers assume a little-endian host");

void DepthMap::normalize() {
  for (size_t i = 0; i < values.size(); ++i) {
    if (!valid[i] || !std::isfinite(values[i]) || !(values[i] > 0.0f)) {
      valid[i] = 0;
      values[i] = 0.0f;
    }
  }
}

namespace {

void write_png_raw(const std::filesystem::path& path, int width, int height, png_uint_32 format,
                   const std::vector<uint8_t>& bytes) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIo, "cannot write PNG " + path.string() + ": " + img.message);
  }
}

std::vector<uint8_t> read_png_raw(const std::filesystem::path& path, png_uint_32 format, int& width,
                                  int& height) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw Error(ErrorCode::kIo, "cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = format;
  std::vector<uint8_t> bytes(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorCode::kIo, "cannot decode PNG " + path.string() + ": " + img.message);
  }
  width = static_cast<int>(img.width);
  height = static_cast<int>(img.height);
  return bytes;
}

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
  std::vector<uint8_t> bytes(image.size() * 3);
  for (size_t i = 0; i < image.size(); ++i) {
    for (int c = 0; c < 3; ++c) bytes[3 * i + c] = to_byte(image[i][c]);
  }
  write_png_raw(path, image.width(), image.height(), PNG_FORMAT_RGB, bytes);
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  std::vector<uint8_t> bytes(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) bytes[i] = mask[i] ? 255 : 0;
  write_png_raw(path, mask.width(), mask.height(), PNG_FORMAT_GRAY, bytes);
}

Image read_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto bytes = read_png_raw(path, PNG_FORMAT_RGB, w, h);
  Image image(h, w);
  for (size_t i = 0; i < image.size(); ++i) {
    for (int c = 0; c < 3; ++c) image[i][c] = bytes[3 * i + c] / 255.0f;
  }
  return image;
}

Mask read_mask_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto bytes = read_png_raw(path, PNG_FORMAT_GRAY, w, h);
  Mask mask(h, w);
  for (size_t i = 0; i < mask.size(); ++i) mask[i] = bytes[i] ? 1 : 0;
  return mask;
}

void write_pfm(const std::filesystem::path& path, const DepthMap& depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "Pf\n" << depth.width() << ' ' << depth.height() << "\n-1.0\n";
  std::vector<float> row(depth.width());
  // PFM stores scanlines bottom to top.
  for (int r = depth.height() - 1; r >= 0; --r) {
    for (int c = 0; c < depth.width(); ++c) row[c] = depth.is_valid(r, c) ? depth.values(r, c) : 0.0f;
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) throw Error(ErrorCode::kIo, "short write " + path.string());
}

DepthMap read_pfm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  // Header: three whitespace-terminated tokens.
  size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.data() + start, pos - start);
  };
  const std::string magic = token();
  const std::string ws = token();
  const std::string hs = token();
  const std::string scale_s = token();
  ++pos;  // single whitespace byte after the scale
  if (magic != "Pf") throw Error(ErrorCode::kIo, path.string() + ": not a grayscale PFM");
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(ws);
    h = std::stoi(hs);
    scale = std::stod(scale_s);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kIo, path.string() + ": malformed PFM header");
  }
  if (scale >= 0.0) throw Error(ErrorCode::kIo, path.string() + ": big-endian PFM not supported");
  if (w <= 0 || h <= 0 || bytes.size() < pos + static_cast<size_t>(w) * h * 4) {
    throw Error(ErrorCode::kIo, path.string() + ": truncated PFM");
  }
  DepthMap depth(h, w);
  const char* data = bytes.data() + pos;
  for (int r = 0; r < h; ++r) {
    const int src_row = h - 1 - r;
    for (int c = 0; c < w; ++c) {
      float v;
      std::memcpy(&v, data + (static_cast<size_t>(src_row) * w + c) * 4, 4);
      depth.values(r, c) = v;
      depth.valid(r, c) = 1;
    }
  }
  depth.normalize();
  return depth;
}

void write_dpt(const std::filesystem::path& path, const DepthMap& depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const uint32_t header[3] = {static_cast<uint32_t>(depth.height()), static_cast<uint32_t>(depth.width()), 0};
  out.write("DPT1", 4);
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  for (size_t i = 0; i < depth.values.size(); ++i) {
    const float v = depth.valid[i] ? depth.values[i] : 0.0f;
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  if (!out) throw Error(ErrorCode::kIo, "short write " + path.string());
}

DepthMap read_dpt(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "DPT1", 4) != 0) {
    throw Error(ErrorCode::kIo, path.string() + ": missing DPT1 magic");
  }
  uint32_t header[3];
  std::memcpy(header, bytes.data() + 4, sizeof(header));
  const size_t h = header[0], w = header[1];
  if (h == 0 || w == 0 || bytes.size() < 16 + h * w * 4) {
    throw Error(ErrorCode::kIo, path.string() + ": truncated DPT1 payload");
  }
  DepthMap depth(static_cast<int>(h), static_cast<int>(w));
  std::memcpy(depth.values.data().data(), bytes.data() + 16, h * w * 4);
  std::fill(depth.valid.data().begin(), depth.valid.data().end(), 1);
  depth.normalize();
  return depth;
}

DepthMap read_depth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  if (std::memcmp(magic, "DPT1", 4) == 0) return read_dpt(path);
  if (magic[0] == 'P' && magic[1] == 'f') return read_pfm(path);
  throw Error(ErrorCode::kIo, path.string() + ": unrecognized depth format");
}

}  // namespace occsynth
