#include "occlane/panel.hpp"

#include <algorithm>
#include <cstring>

#include <opencv2/imgproc.hpp>

#include "occlane/error.hpp"
#include "occlane/image_io.hpp"

namespace occlane {

PanelTile make_tile(std::string label, const RasterImage& image) { return PanelTile{std::move(label), image}; }

PanelTile make_tile(std::string label, const RasterMask& mask) { return PanelTile{std::move(label), to_rgb(mask)}; }

RasterImage compose_panel(const std::vector<PanelTile>& tiles) {
  if (tiles.size() < 2) throw ValidationError("a panel needs at least two tiles");
  int width = kPanelMargin;
  int tile_h = 0;
  for (const auto& t : tiles) {
    width += t.image.width() + kPanelMargin;
    tile_h = std::max(tile_h, t.image.height());
  }
  const int height = kPanelMargin + kPanelLabelHeight + tile_h + kPanelMargin;
  RasterImage panel(width, height, 32);
  cv::Mat canvas(height, width, CV_8UC3, panel.bytes().data());

  int x = kPanelMargin;
  for (const auto& t : tiles) {
    const int w = t.image.width();
    const int h = t.image.height();
    const int y0 = kPanelMargin + kPanelLabelHeight;
    // letterbox band
    cv::rectangle(canvas, cv::Rect(x, y0, w, tile_h), cv::Scalar(0, 0, 0), cv::FILLED);
    const int top = y0 + (tile_h - h) / 2;
    for (int r = 0; r < h; ++r) {
      std::memcpy(panel.row(top + r) + static_cast<std::size_t>(x) * 3, t.image.row(r), static_cast<std::size_t>(w) * 3);
    }
    cv::Mat strip = canvas(cv::Rect(x, kPanelMargin, w, kPanelLabelHeight));
    cv::putText(strip, t.label, cv::Point(2, kPanelLabelHeight - 4), cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(235, 235, 235), 1, cv::LINE_8);
    x += w + kPanelMargin;
  }
  return panel;
}

void emit_panel(const std::vector<PanelTile>& tiles, const std::filesystem::path& path) {
  save_raster(compose_panel(tiles), path);
}

}  // namespace occlane
