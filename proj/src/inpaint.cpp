#include "occlane/inpaint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace occlane {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_size(Size a, Size b, const char* what) {
  if (a != b) throw ValidationError(std::string(what) + ": size mismatch");
}

double solve_upwind(double tx, double ty) {
  if (tx > ty) std::swap(tx, ty);
  if (ty == kInf || ty - tx >= 1.0) return tx + 1.0;
  const double d = tx - ty;
  return 0.5 * (tx + ty + std::sqrt(2.0 - d * d));
}

// Summed-area table of hole pixels, (w+1)x(h+1).
class HoleIntegral {
 public:
  explicit HoleIntegral(const RasterMask& hole) : w_(hole.width()), h_(hole.height()) {
    sum_.assign(static_cast<std::size_t>(w_ + 1) * (h_ + 1), 0);
    for (int y = 0; y < h_; ++y) {
      int row = 0;
      for (int x = 0; x < w_; ++x) {
        row += hole.at(x, y) == kPositive;
        sum_[idx(x + 1, y + 1)] = sum_[idx(x + 1, y)] + row;
      }
    }
  }
  /// Hole pixels in [x0,x1) x [y0,y1), clipped to the frame.
  int count(int x0, int y0, int x1, int y1) const {
    x0 = std::clamp(x0, 0, w_);
    x1 = std::clamp(x1, 0, w_);
    y0 = std::clamp(y0, 0, h_);
    y1 = std::clamp(y1, 0, h_);
    if (x0 >= x1 || y0 >= y1) return 0;
    return sum_[idx(x1, y1)] - sum_[idx(x0, y1)] - sum_[idx(x1, y0)] + sum_[idx(x0, y0)];
  }

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * (w_ + 1) + x; }
  int w_;
  int h_;
  std::vector<int> sum_;
};

}  // namespace

void validate(const InpaintConfig& cfg) {
  if (cfg.fmm_radius < 1) throw ValidationError("fmm_radius must be >= 1");
  if (cfg.patch_size < 3 || cfg.patch_size % 2 == 0) throw ValidationError("patch_size must be odd and >= 3");
  if (cfg.search_window < 1) throw ValidationError("search_window must be >= 1");
  if (cfg.refine_passes < 0) throw ValidationError("refine_passes must be >= 0");
  if (cfg.mode == InpaintMode::external && cfg.external.command.empty()) {
    throw ValidationError("external inpainter needs a command");
  }
}

DistanceField fmm_distance(const RasterMask& hole) {
  const int w = hole.width();
  const int h = hole.height();
  const std::size_t n = hole.pixel_count();
  DistanceField field{hole.size(), std::vector<double>(n, 0.0), {}};
  const auto bytes = hole.bytes();
  const std::size_t holes = static_cast<std::size_t>(std::count(bytes.begin(), bytes.end(), kPositive));
  if (holes == 0) return field;
  if (holes == n) throw ValidationError("fmm_distance: hole covers the whole frame");

  enum : char { kKnown, kBand, kFar };
  std::vector<char> state(n, kKnown);
  for (std::size_t i = 0; i < n; ++i) {
    if (bytes[i] == kPositive) {
      state[i] = kFar;
      field.t[i] = kInf;
    }
  }
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;

  auto update = [&](int x, int y) {
    const std::size_t i = static_cast<std::size_t>(y) * w + x;
    auto known_t = [&](int xx, int yy) {
      if (xx < 0 || yy < 0 || xx >= w || yy >= h) return kInf;
      const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
      return state[j] == kKnown ? field.t[j] : kInf;
    };
    const double tx = std::min(known_t(x - 1, y), known_t(x + 1, y));
    const double ty = std::min(known_t(x, y - 1), known_t(x, y + 1));
    const double t = solve_upwind(tx, ty);
    if (t < field.t[i]) {
      field.t[i] = t;
      state[i] = kBand;
      heap.emplace(t, i);
    }
  };

  constexpr int kDx[4] = {-1, 1, 0, 0};
  constexpr int kDy[4] = {0, 0, -1, 1};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (state[i] != kFar) continue;
      for (int k = 0; k < 4; ++k) {
        const int nx = x + kDx[k];
        const int ny = y + kDy[k];
        if (nx >= 0 && ny >= 0 && nx < w && ny < h && state[static_cast<std::size_t>(ny) * w + nx] == kKnown) {
          update(x, y);
          break;
        }
      }
    }
  }

  field.order.reserve(holes);
  while (!heap.empty()) {
    const auto [t, i] = heap.top();
    heap.pop();
    if (state[i] == kKnown || t > field.t[i]) continue;
    state[i] = kKnown;
    field.order.push_back(i);
    const int x = static_cast<int>(i % w);
    const int y = static_cast<int>(i / w);
    for (int k = 0; k < 4; ++k) {
      const int nx = x + kDx[k];
      const int ny = y + kDy[k];
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      if (state[static_cast<std::size_t>(ny) * w + nx] != kKnown) update(nx, ny);
    }
  }
  return field;
}

RasterImage inpaint_coarse(const RasterImage& image, const RasterMask& hole, const InpaintConfig& cfg) {
  require_same_size(image.size(), hole.size(), "inpaint_coarse");
  validate(cfg);
  const DistanceField field = fmm_distance(hole);
  RasterImage out = image;
  if (field.order.empty()) return out;

  const int w = image.width();
  const int h = image.height();
  const int r = cfg.fmm_radius;
  std::vector<char> known(hole.pixel_count());
  for (std::size_t i = 0; i < known.size(); ++i) known[i] = hole.bytes()[i] != kPositive;

  auto t_at = [&](int x, int y) { return field.t[static_cast<std::size_t>(y) * w + x]; };
  auto is_known = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < w && y < h && known[static_cast<std::size_t>(y) * w + x];
  };
  // one-pixel derivative at a known pixel from known neighbours only
  auto derivative = [&](int x, int y, int c, int ax, int ay) {
    const bool fwd = is_known(x + ax, y + ay);
    const bool back = is_known(x - ax, y - ay);
    if (fwd && back) return (out.at(x + ax, y + ay, c) - out.at(x - ax, y - ay, c)) / 2.0;
    if (fwd) return static_cast<double>(out.at(x + ax, y + ay, c) - out.at(x, y, c));
    if (back) return static_cast<double>(out.at(x, y, c) - out.at(x - ax, y - ay, c));
    return 0.0;
  };
  // derivative averaged over the three known pixels across its direction, to damp noise
  auto image_grad = [&](int x, int y, int c, bool along_x) {
    const int ax = along_x ? 1 : 0, ay = along_x ? 0 : 1;
    double sum = 0.0;
    int n = 0;
    for (int k = -1; k <= 1; ++k) {
      const int px = x + k * ay, py = y + k * ax;
      if (!is_known(px, py)) continue;
      sum += derivative(px, py, c, ax, ay);
      ++n;
    }
    return n > 0 ? sum / n : 0.0;
  };
  for (const std::size_t i : field.order) {
    const int x = static_cast<int>(i % w);
    const int y = static_cast<int>(i / w);
    const double tp = field.t[i];
    // central differences, one-sided at the frame border
    const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
    const int yu = std::max(y - 1, 0), yd = std::min(y + 1, h - 1);
    const double gx = xr > xl ? (t_at(xr, y) - t_at(xl, y)) / (xr - xl) : 0.0;
    const double gy = yd > yu ? (t_at(x, yd) - t_at(x, yu)) / (yd - yu) : 0.0;
    const double gnorm = std::hypot(gx, gy);

    double acc[3] = {0.0, 0.0, 0.0};
    long lo[3] = {255, 255, 255};
    long hi[3] = {0, 0, 0};
    double wsum = 0.0;
    for (int dy = -r; dy <= r; ++dy) {
      const int qy = y + dy;
      if (qy < 0 || qy >= h) continue;
      for (int dx = -r; dx <= r; ++dx) {
        const int d2 = dx * dx + dy * dy;
        if (d2 == 0 || d2 > r * r) continue;
        const int qx = x + dx;
        if (qx < 0 || qx >= w) continue;
        const std::size_t q = static_cast<std::size_t>(qy) * w + qx;
        if (!known[q]) continue;
        const double dist = std::sqrt(static_cast<double>(d2));
        double dir = 1.0;
        if (gnorm > 0.0) dir = std::abs(-dx * gx - dy * gy) / (dist * gnorm);
        dir = std::max(dir, 1e-6);
        const double dst = 1.0 / d2;
        const double lev = 1.0 / (1.0 + std::abs(field.t[q] - tp));
        const double wq = dir * dst * lev;
        for (int c = 0; c < 3; ++c) {
          const int v = out.at(qx, qy, c);
          lo[c] = std::min<long>(lo[c], v);
          hi[c] = std::max<long>(hi[c], v);
          acc[c] += wq * (v - dx * image_grad(qx, qy, c, true) - dy * image_grad(qx, qy, c, false));
        }
        wsum += wq;
      }
    }
    if (wsum > 0.0) {
      for (int c = 0; c < 3; ++c) {
        // the first-order estimate stays inside the range of the contributing pixels
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(acc[c] / wsum), lo[c], hi[c]));
      }
    }
    known[i] = 1;
  }
  return out;
}

RefineResult refine_patches(const RasterImage& image, const RasterMask& hole, const InpaintConfig& cfg) {
  require_same_size(image.size(), hole.size(), "refine_patches");
  validate(cfg);
  RefineResult result{image, 0, 0};
  const int w = image.width();
  const int h = image.height();
  const int half = cfg.patch_size / 2;
  const int stride = std::max(1, half);
  const HoleIntegral integral(hole);
  if (integral.count(0, 0, w, h) == 0) return result;

  struct Offset {
    int dx, dy;
  };
  std::vector<Offset> compare;
  std::vector<Offset> fill;
  for (int pass = 0; pass < cfg.refine_passes; ++pass) {
    const RasterImage snapshot = result.image;
    for (int qy = 0; qy < h; qy += stride) {
      for (int qx = 0; qx < w; qx += stride) {
        if (integral.count(qx - half, qy - half, qx + half + 1, qy + half + 1) == 0) continue;
        ++result.queries;
        compare.clear();
        fill.clear();
        for (int dy = -half; dy <= half; ++dy) {
          for (int dx = -half; dx <= half; ++dx) {
            const int px = qx + dx, py = qy + dy;
            if (px < 0 || py < 0 || px >= w || py >= h) continue;
            if (hole.at(px, py) == kPositive) {
              fill.push_back({dx, dy});
            } else {
              compare.push_back({dx, dy});
            }
          }
        }
        // fully masked query: match on the coarse values instead
        if (compare.empty()) compare = fill;

        long best = std::numeric_limits<long>::max();
        int best_x = -1, best_y = -1;
        const int sy0 = std::max(half, qy - cfg.search_window);
        const int sy1 = std::min(h - 1 - half, qy + cfg.search_window);
        const int sx0 = std::max(half, qx - cfg.search_window);
        const int sx1 = std::min(w - 1 - half, qx + cfg.search_window);
        for (int sy = sy0; sy <= sy1; ++sy) {
          for (int sx = sx0; sx <= sx1; ++sx) {
            if (integral.count(sx - half, sy - half, sx + half + 1, sy + half + 1) != 0) continue;
            long ssd = 0;
            for (const auto& o : compare) {
              for (int c = 0; c < 3; ++c) {
                const long d = long{snapshot.at(qx + o.dx, qy + o.dy, c)} - long{snapshot.at(sx + o.dx, sy + o.dy, c)};
                ssd += d * d;
              }
              if (ssd >= best) break;
            }
            if (ssd < best) {
              best = ssd;
              best_x = sx;
              best_y = sy;
            }
          }
        }
        if (best_x < 0) {
          ++result.unmatched;
          continue;
        }
        for (const auto& o : fill) {
          for (int c = 0; c < 3; ++c) {
            result.image.at(qx + o.dx, qy + o.dy, c) = snapshot.at(best_x + o.dx, best_y + o.dy, c);
          }
        }
      }
    }
  }
  return result;
}

RasterImage inpaint_oracle(const RasterImage& occluded, const RasterMask& hole, const RasterImage& clear) {
  require_same_size(occluded.size(), hole.size(), "inpaint_oracle");
  require_same_size(occluded.size(), clear.size(), "inpaint_oracle");
  RasterImage out = occluded;
  for (int y = 0; y < hole.height(); ++y) {
    for (int x = 0; x < hole.width(); ++x) {
      if (hole.at(x, y) != kPositive) continue;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = clear.at(x, y, c);
    }
  }
  return out;
}

RasterImage inpaint(const RasterImage& image, const RasterMask& hole, const InpaintConfig& cfg) {
  switch (cfg.mode) {
    case InpaintMode::fmm:
      return inpaint_coarse(image, hole, cfg);
    case InpaintMode::fmm_refine:
      return refine_patches(inpaint_coarse(image, hole, cfg), hole, cfg).image;
    case InpaintMode::oracle:
    case InpaintMode::external:
      break;
  }
  throw ValidationError("inpaint(): oracle and external modes are dispatched by the pipeline");
}

}  // namespace occlane
