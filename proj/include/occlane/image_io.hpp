#pragma once

#include <filesystem>
#include <variant>

#include "occlane/raster.hpp"

namespace occlane {

/// Decodes an 8-bit PNG. Three channels yield a RasterImage, one channel a
/// RasterMask. Other layouts and bit depths raise IoError naming the path.
std::variant<RasterImage, RasterMask> load_raster(const std::filesystem::path& path);

RasterImage load_image(const std::filesystem::path& path);
RasterMask load_mask(const std::filesystem::path& path);
/// Four-channel 8-bit PNG (sprites).
RasterRgba load_rgba(const std::filesystem::path& path);

/// Lossless PNG encode. Creates missing parent directories; overwrites.
void save_raster(const RasterImage& image, const std::filesystem::path& path);
void save_raster(const RasterMask& mask, const std::filesystem::path& path);
void save_raster(const RasterRgba& rgba, const std::filesystem::path& path);

/// Reads width/height from a PNG header without decoding pixels.
Size png_dimensions(const std::filesystem::path& path);

}  // namespace occlane
