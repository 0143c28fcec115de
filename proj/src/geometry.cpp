#include "occlane/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace occlane {

BBox clip(BBox box, Size frame) {
  box.x_min = std::clamp(box.x_min, 0, frame.width);
  box.y_min = std::clamp(box.y_min, 0, frame.height);
  box.x_max = std::clamp(box.x_max, 0, frame.width);
  box.y_max = std::clamp(box.y_max, 0, frame.height);
  return box;
}

bool point_in_polygon(const Polygon& poly, double x, double y) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    if ((a.y > y) != (b.y > y)) {
      const double xi = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (x < xi) inside = !inside;
    }
  }
  return inside;
}

RasterMask polygon_mask(const Polygon& poly, Size size) {
  RasterMask out(size);
  if (poly.size() < 3) return out;
  std::vector<double> crossings;
  const std::size_t n = poly.size();
  for (int y = 0; y < size.height; ++y) {
    const double cy = y + 0.5;
    crossings.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point2& a = poly[i];
      const Point2& b = poly[j];
      if ((a.y > cy) != (b.y > cy)) {
        crossings.push_back(a.x + (cy - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(crossings.begin(), crossings.end());
    std::uint8_t* row = out.row(y);
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      // pixel centers x + 0.5 strictly between the crossing pair
      const int x0 = std::max(0, static_cast<int>(std::ceil(crossings[k] - 0.5)));
      const int x1 = std::min(size.width - 1, static_cast<int>(std::ceil(crossings[k + 1] - 0.5)) - 1);
      for (int x = x0; x <= x1; ++x) row[x] = kPositive;
    }
  }
  return out;
}

const std::vector<std::string>& traffic_classes() {
  static const std::vector<std::string> names = {"car",   "pedestrian", "truck",  "bus",
                                                 "train", "motorcycle", "bicycle"};
  return names;
}

}  // namespace occlane
