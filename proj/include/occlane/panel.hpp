#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "occlane/raster.hpp"

namespace occlane {

struct PanelTile {
  std::string label;
  RasterImage image;
};

PanelTile make_tile(std::string label, const RasterImage& image);
PanelTile make_tile(std::string label, const RasterMask& mask);

/// Tiles side by side with a label strip above each. Shorter tiles are
/// letterboxed (centred, padded) to the tallest one, never resampled.
/// Throws ValidationError with fewer than two tiles.
RasterImage compose_panel(const std::vector<PanelTile>& tiles);

void emit_panel(const std::vector<PanelTile>& tiles, const std::filesystem::path& path);

inline constexpr int kPanelMargin = 4;
inline constexpr int kPanelLabelHeight = 16;

}  // namespace occlane
