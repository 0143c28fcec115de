#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "occlane/raster.hpp"

namespace occlane {

/// Axis-aligned pixel box. Origin top-left; min edges inclusive, max edges
/// exclusive, so area is (x_max - x_min) * (y_max - y_min).
struct BBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;
  int class_id = 0;
  double confidence = 1.0;

  int width() const { return x_max - x_min; }
  int height() const { return y_max - y_min; }
  std::int64_t area() const { return static_cast<std::int64_t>(width()) * height(); }
  bool valid() const { return x_min >= 0 && y_min >= 0 && x_min < x_max && y_min < y_max; }
  bool within(Size s) const { return valid() && x_max <= s.width && y_max <= s.height; }

  bool operator==(const BBox&) const = default;
};

/// Clips a box to the frame. The result may be invalid (empty) if the box lies outside.
BBox clip(BBox box, Size frame);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

using Polygon = std::vector<Point2>;

/// Even-odd test against the polygon, evaluated at pixel centers by the caller.
bool point_in_polygon(const Polygon& poly, double x, double y);

/// Rasterizes a polygon: a pixel is positive when its center lies inside.
RasterMask polygon_mask(const Polygon& poly, Size size);

/// The seven traffic classes occlusions are drawn from, in class-id order.
const std::vector<std::string>& traffic_classes();

}  // namespace occlane
