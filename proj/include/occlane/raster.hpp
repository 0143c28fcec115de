#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "occlane/error.hpp"

namespace occlane {

struct Size {
  int width = 0;
  int height = 0;
  bool operator==(const Size&) const = default;
};

/// Row-major interleaved 8-bit raster with a compile-time channel count.
///
/// Instantiated as RasterImage (RGB), RasterMask (single channel, 255 means
/// positive) and RasterRgba (sprites). Values are plain data: copy to mutate.
template <int Channels>
class Raster {
 public:
  static constexpr int kChannels = Channels;

  Raster() = default;
  Raster(int width, int height, std::uint8_t fill = 0) : Raster(Size{width, height}, fill) {}
  explicit Raster(Size size, std::uint8_t fill = 0) : size_(size) {
    check_size(size);
    data_.assign(static_cast<std::size_t>(size.width) * size.height * Channels, fill);
  }
  Raster(int width, int height, std::vector<std::uint8_t> data) : size_{width, height}, data_(std::move(data)) {
    check_size(size_);
    if (data_.size() != static_cast<std::size_t>(width) * height * Channels) {
      throw ValidationError("raster data length does not match width*height*channels");
    }
  }

  int width() const { return size_.width; }
  int height() const { return size_.height; }
  Size size() const { return size_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(size_.width) * size_.height; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < size_.width && y < size_.height; }

  std::uint8_t& at(int x, int y, int c = 0) { return data_[index(x, y) + c]; }
  std::uint8_t at(int x, int y, int c = 0) const { return data_[index(x, y) + c]; }

  std::span<std::uint8_t> bytes() { return data_; }
  std::span<const std::uint8_t> bytes() const { return data_; }
  std::uint8_t* row(int y) { return data_.data() + index(0, y); }
  const std::uint8_t* row(int y) const { return data_.data() + index(0, y); }

  bool operator==(const Raster&) const = default;

 private:
  static void check_size(Size s) {
    if (s.width < 1 || s.height < 1) throw ValidationError("raster dimensions must be >= 1");
  }
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * size_.width + x) * Channels;
  }

  Size size_{};
  std::vector<std::uint8_t> data_;
};

using RasterImage = Raster<3>;
using RasterMask = Raster<1>;
using RasterRgba = Raster<4>;

inline constexpr std::uint8_t kPositive = 255;

inline bool is_positive(const RasterMask& m, int x, int y) { return m.at(x, y) == kPositive; }

std::size_t count_positive(const RasterMask& mask);

/// True if every sample is 0 or 255.
bool is_binary(const RasterMask& mask);

/// ITU-R BT.601 integer luma.
RasterMask luma(const RasterImage& image);

/// Replicates a single-channel raster into three channels.
RasterImage to_rgb(const RasterMask& mask);

}  // namespace occlane
