#include "occlane/morphology.hpp"

#include <algorithm>

namespace occlane {

namespace {

void require_same_size(const RasterMask& a, const RasterMask& b) {
  if (a.size() != b.size()) throw ValidationError("mask dimensions differ");
}

// Sliding-window "any positive" along rows then columns. `outside` is what
// out-of-frame samples count as.
RasterMask square_filter(const RasterMask& mask, int radius, bool want_any, bool outside_positive) {
  if (radius <= 0) return mask;
  const int w = mask.width();
  const int h = mask.height();
  // For dilation count positives; for erosion count negatives (a pixel survives iff none).
  auto hit = [want_any](std::uint8_t v) { return want_any ? v == kPositive : v != kPositive; };
  const int outside_hit = (want_any ? outside_positive : !outside_positive) ? 1 : 0;

  RasterMask horiz(mask.size());
  std::vector<int> prefix(static_cast<std::size_t>(std::max(w, h)) + 1);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* src = mask.row(y);
    prefix[0] = 0;
    for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + (hit(src[x]) ? 1 : 0);
    std::uint8_t* dst = horiz.row(y);
    for (int x = 0; x < w; ++x) {
      const int lo = x - radius;
      const int hi = x + radius;
      int hits = prefix[std::min(hi, w - 1) + 1] - prefix[std::max(lo, 0)];
      if (outside_hit && (lo < 0 || hi >= w)) ++hits;
      const bool any = hits > 0;
      dst[x] = (any == want_any) ? kPositive : 0;
    }
  }
  RasterMask out(mask.size());
  for (int x = 0; x < w; ++x) {
    prefix[0] = 0;
    for (int y = 0; y < h; ++y) prefix[y + 1] = prefix[y] + (hit(horiz.at(x, y)) ? 1 : 0);
    for (int y = 0; y < h; ++y) {
      const int lo = y - radius;
      const int hi = y + radius;
      int hits = prefix[std::min(hi, h - 1) + 1] - prefix[std::max(lo, 0)];
      if (outside_hit && (lo < 0 || hi >= h)) ++hits;
      const bool any = hits > 0;
      out.at(x, y) = (any == want_any) ? kPositive : 0;
    }
  }
  return out;
}

}  // namespace

RasterMask binarize(const RasterMask& mask, int threshold) {
  RasterMask out(mask.size());
  auto dst = out.bytes();
  const auto src = mask.bytes();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= threshold ? kPositive : 0;
  return out;
}

RasterMask dilate(const RasterMask& mask, int radius) { return square_filter(mask, radius, true, false); }

RasterMask erode(const RasterMask& mask, int radius) { return square_filter(mask, radius, false, true); }

RasterMask open(const RasterMask& mask, int radius) { return dilate(erode(mask, radius), radius); }

std::vector<Component> connected_components(const RasterMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<char> seen(mask.pixel_count(), 0);
  std::vector<Component> out;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (seen[idx] || mask.at(x, y) != kPositive) continue;
      Component c;
      c.box = BBox{x, y, x + 1, y + 1, 0, 1.0};
      seen[idx] = 1;
      stack.emplace_back(x, y);
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        ++c.area;
        c.box.x_min = std::min(c.box.x_min, cx);
        c.box.y_min = std::min(c.box.y_min, cy);
        c.box.x_max = std::max(c.box.x_max, cx + 1);
        c.box.y_max = std::max(c.box.y_max, cy + 1);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx;
            const int ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
            if (seen[nidx] || mask.at(nx, ny) != kPositive) continue;
            seen[nidx] = 1;
            stack.emplace_back(nx, ny);
          }
        }
      }
      out.push_back(c);
    }
  }
  return out;
}

RasterMask mask_union(const RasterMask& a, const RasterMask& b) {
  require_same_size(a, b);
  RasterMask out(a.size());
  auto dst = out.bytes();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = (a.bytes()[i] == kPositive || b.bytes()[i] == kPositive) ? kPositive : 0;
  }
  return out;
}

RasterMask mask_intersection(const RasterMask& a, const RasterMask& b) {
  require_same_size(a, b);
  RasterMask out(a.size());
  auto dst = out.bytes();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = (a.bytes()[i] == kPositive && b.bytes()[i] == kPositive) ? kPositive : 0;
  }
  return out;
}

}  // namespace occlane
