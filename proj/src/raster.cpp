#include "occlane/raster.hpp"

#include <algorithm>

namespace occlane {

std::size_t count_positive(const RasterMask& mask) {
  const auto b = mask.bytes();
  return static_cast<std::size_t>(std::count(b.begin(), b.end(), kPositive));
}

bool is_binary(const RasterMask& mask) {
  const auto b = mask.bytes();
  return std::all_of(b.begin(), b.end(), [](std::uint8_t v) { return v == 0 || v == kPositive; });
}

RasterMask luma(const RasterImage& image) {
  RasterMask out(image.size());
  for (int y = 0; y < image.height(); ++y) {
    const std::uint8_t* src = image.row(y);
    std::uint8_t* dst = out.row(y);
    for (int x = 0; x < image.width(); ++x) {
      const int v = 299 * src[3 * x] + 587 * src[3 * x + 1] + 114 * src[3 * x + 2];
      dst[x] = static_cast<std::uint8_t>((v + 500) / 1000);
    }
  }
  return out;
}

RasterImage to_rgb(const RasterMask& mask) {
  RasterImage out(mask.size());
  auto dst = out.bytes();
  const auto src = mask.bytes();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = src[i];
  }
  return out;
}

}  // namespace occlane
