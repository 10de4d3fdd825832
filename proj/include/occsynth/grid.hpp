#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "occsynth/error.hpp"

namespace occsynth {

// Row-major H x W array.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width), data_(static_cast<size_t>(height) * width, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int row, int col) { return data_[static_cast<size_t>(row) * width_ + col]; }
  const T& operator()(int row, int col) const { return data_[static_cast<size_t>(row) * width_ + col]; }
  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(int height, int width) const { return height_ == height && width_ == width; }
  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  bool operator==(const Grid&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using Rgb = std::array<float, 3>;
using Image = Grid<Rgb>;
// Boolean masks are stored as bytes (0 / 1).
using Mask = Grid<uint8_t>;

// Per-pixel z-depth in meters. Invalid pixels hold 0.
struct DepthMap {
  Grid<float> values;
  Mask valid;

  DepthMap() = default;
  DepthMap(int height, int width) : values(height, width, 0.0f), valid(height, width, 0) {}

  int height() const { return values.height(); }
  int width() const { return values.width(); }

  void set(int row, int col, float depth) {
    values(row, col) = depth;
    valid(row, col) = 1;
  }
  void invalidate(int row, int col) {
    values(row, col) = 0.0f;
    valid(row, col) = 0;
  }
  bool is_valid(int row, int col) const { return valid(row, col) != 0; }

  // Enforces the value invariant: valid entries finite and > 0, invalid entries 0.
  void normalize();

  bool operator==(const DepthMap&) const = default;
};

inline void require_same_shape(int h0, int w0, int h1, int w1, const char* what) {
  if (h0 != h1 || w0 != w1) {
    throw Error(ErrorCode::kDimensionMismatch, what);
  }
}

// ---- file formats ----

void write_png(const std::filesystem::path& path, const Image& image);
// 0/255 single-channel PNG.
void write_mask_png(const std::filesystem::path& path, const Mask& mask);
Image read_png(const std::filesystem::path& path);
// Any nonzero gray value is true.
Mask read_mask_png(const std::filesystem::path& path);

// Little-endian grayscale PFM (scale -1.0). Invalid pixels are written as 0.
void write_pfm(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_pfm(const std::filesystem::path& path);
// Raw float32 with a 16-byte {"DPT1", u32 height, u32 width, u32 reserved} header.
void write_dpt(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_dpt(const std::filesystem::path& path);
// Dispatches on the leading magic bytes.
DepthMap read_depth(const std::filesystem::path& path);

// 8-bit quantization used by the PNG writer.
inline uint8_t to_byte(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<uint8_t>(c * 255.0f + 0.5f);
}

}  // namespace occsynth
