#include "occlane/lanes.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Dense>

#include "occlane/rng.hpp"

namespace occlane {

void validate(const LaneFinderConfig& cfg) {
  if (cfg.luma_threshold < 0 || cfg.luma_threshold > 256) throw ValidationError("luma_threshold must be in 0..256");
  if (cfg.grad_threshold < 0) throw ValidationError("grad_threshold must be >= 0");
  if (cfg.n_windows < 4) throw ValidationError("n_windows must be >= 4");
  if (cfg.window_halfwidth < 1) throw ValidationError("window_halfwidth must be >= 1");
  if (cfg.stroke < 1) throw ValidationError("stroke must be >= 1");
  if (cfg.ransac_iters < 1) throw ValidationError("ransac_iters must be >= 1");
  if (!(cfg.ransac_tol > 0.0)) throw ValidationError("ransac_tol must be > 0");
  if (cfg.min_peak_mass < 1) throw ValidationError("min_peak_mass must be >= 1");
  if (cfg.mode == SegmenterMode::external && cfg.external.command.empty()) {
    throw ValidationError("external segmenter needs a command");
  }
}

double polyval(std::span<const double> coeffs, double y) {
  double v = 0.0;
  for (double c : coeffs) v = v * y + c;
  return v;
}

std::vector<double> polyfit_lsq(std::span<const Point2> points, int degree) {
  if (degree < 0) throw ParamError("polynomial degree must be >= 0");
  if (points.size() < static_cast<std::size_t>(degree) + 1) throw ParamError("too few points for polynomial fit");
  // centre and scale y for conditioning, solve, then expand back
  double lo = points[0].y, hi = points[0].y, mean = 0.0;
  for (const auto& p : points) {
    lo = std::min(lo, p.y);
    hi = std::max(hi, p.y);
    mean += p.y;
  }
  mean /= static_cast<double>(points.size());
  const double scale = hi > lo ? (hi - lo) / 2.0 : 1.0;
  const int n = degree + 1;
  Eigen::MatrixXd a(static_cast<Eigen::Index>(points.size()), n);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double u = (points[i].y - mean) / scale;
    double pw = 1.0;
    for (int k = 0; k < n; ++k) {
      a(static_cast<Eigen::Index>(i), k) = pw;
      pw *= u;
    }
    rhs(static_cast<Eigen::Index>(i)) = points[i].x;
  }
  const Eigen::VectorXd q = a.colPivHouseholderQr().solve(rhs);
  // x = sum_k q_k ((y - mean)/scale)^k, expanded into powers of y
  std::vector<double> low(static_cast<std::size_t>(n), 0.0);
  for (int k = 0; k < n; ++k) {
    const double ck = q(k) / std::pow(scale, k);
    double binom = 1.0;
    for (int j = 0; j <= k; ++j) {
      // term binom(k,j) * y^j * (-mean)^(k-j)
      low[static_cast<std::size_t>(j)] += ck * binom * std::pow(-mean, k - j);
      binom = binom * (k - j) / (j + 1);
    }
  }
  return {low.rbegin(), low.rend()};
}

std::vector<double> ransac_polyfit(std::span<const Point2> points, int degree, int iters, double tol,
                                   std::uint64_t seed) {
  const std::size_t need = static_cast<std::size_t>(degree) + 1;
  if (points.size() < need) throw ParamError("ransac_polyfit needs at least degree+1 points");
  std::set<double> ys;
  for (const auto& p : points) ys.insert(p.y);
  if (ys.size() < need) throw ParamError("ransac_polyfit needs degree+1 distinct y values");

  Rng rng(seed);
  std::vector<std::size_t> best_inliers;
  std::vector<std::size_t> inliers;
  std::vector<Point2> sample(need);
  const int max_draws = 64;
  for (int it = 0; it < iters; ++it) {
    bool ok = false;
    for (int draw = 0; draw < max_draws && !ok; ++draw) {
      ok = true;
      for (std::size_t k = 0; k < need && ok; ++k) {
        sample[k] = points[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(points.size()) - 1))];
        for (std::size_t j = 0; j < k; ++j) {
          if (sample[j].y == sample[k].y) ok = false;
        }
      }
    }
    if (!ok) continue;
    const auto model = polyfit_lsq(sample, degree);
    inliers.clear();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (std::abs(points[i].x - polyval(model, points[i].y)) <= tol) inliers.push_back(i);
    }
    if (inliers.size() > best_inliers.size()) best_inliers = inliers;
  }
  std::vector<Point2> consensus;
  for (auto i : best_inliers) consensus.push_back(points[i]);
  std::set<double> cys;
  for (const auto& p : consensus) cys.insert(p.y);
  if (cys.size() < need) return polyfit_lsq(points, degree);
  return polyfit_lsq(consensus, degree);
}

RasterMask lane_candidates(const RasterImage& image, const LaneFinderConfig& cfg, const RasterMask& roi) {
  const RasterMask y = luma(image);
  const int w = image.width();
  const int h = image.height();
  RasterMask out(image.size());
  const long grad_sq = static_cast<long>(cfg.grad_threshold) * cfg.grad_threshold;
  auto interior = [&](int c, int r) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (roi.at(c + dx, r + dy) != kPositive) return false;
      }
    }
    return true;
  };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (roi.at(c, r) != kPositive) continue;
      bool hit = y.at(c, r) >= cfg.luma_threshold;
      if (!hit && r > 0 && c > 0 && r < h - 1 && c < w - 1 && interior(c, r)) {
        auto p = [&](int dx, int dy) { return long{y.at(c + dx, r + dy)}; };
        const long gx = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
        const long gy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
        hit = gx * gx + gy * gy >= grad_sq;
      }
      if (hit) out.at(c, r) = kPositive;
    }
  }
  return out;
}

LaneSegmentation segment_lanes(const RasterImage& image, const LaneFinderConfig& cfg,
                               const std::optional<Polygon>& frame_roi) {
  validate(cfg);
  const std::optional<Polygon>& roi_poly = cfg.roi ? cfg.roi : frame_roi;
  if (!roi_poly) throw ValidationError("segment_lanes: no ROI configured and none supplied by the frame");
  const Size size = image.size();
  const int w = size.width;
  const int h = size.height;
  const RasterMask roi = polygon_mask(*roi_poly, size);
  const RasterMask cand = lane_candidates(image, cfg, roi);

  LaneSegmentation out{RasterMask(size), LaneModel{}};
  int roi_top = h, roi_bottom = 0;
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = roi.row(y);
    if (std::any_of(row, row + w, [](std::uint8_t v) { return v == kPositive; })) {
      roi_top = std::min(roi_top, y);
      roi_bottom = y + 1;
    }
  }
  if (roi_top >= roi_bottom) return out;

  // column histogram over the bottom third
  std::vector<long> hist(static_cast<std::size_t>(w), 0);
  for (int y = h - h / 3; y < h; ++y) {
    for (int x = 0; x < w; ++x) hist[static_cast<std::size_t>(x)] += cand.at(x, y) == kPositive;
  }
  const int hw = cfg.window_halfwidth;
  std::vector<long> mass(static_cast<std::size_t>(w), 0);
  for (int x = 0; x < w; ++x) {
    for (int k = std::max(0, x - hw); k <= std::min(w - 1, x + hw); ++k) mass[static_cast<std::size_t>(x)] += hist[static_cast<std::size_t>(k)];
  }
  std::vector<int> peaks;
  std::vector<char> suppressed(static_cast<std::size_t>(w), 0);
  // only local maxima of the windowed mass may become peaks
  for (int x = 0; x < w; ++x) {
    for (int k = std::max(0, x - hw); k <= std::min(w - 1, x + hw) && !suppressed[static_cast<std::size_t>(x)]; ++k) {
      if (mass[static_cast<std::size_t>(k)] > mass[static_cast<std::size_t>(x)]) suppressed[static_cast<std::size_t>(x)] = 1;
    }
  }
  for (;;) {
    int best = -1;
    for (int x = 0; x < w; ++x) {
      if (!suppressed[static_cast<std::size_t>(x)] && (best < 0 || mass[static_cast<std::size_t>(x)] > mass[static_cast<std::size_t>(best)])) best = x;
    }
    if (best < 0 || mass[static_cast<std::size_t>(best)] < cfg.min_peak_mass) break;
    peaks.push_back(best);
    for (int x = std::max(0, best - 2 * hw + 1); x <= std::min(w - 1, best + 2 * hw - 1); ++x) suppressed[static_cast<std::size_t>(x)] = 1;
  }
  std::sort(peaks.begin(), peaks.end());

  const int span = roi_bottom - roi_top;
  const int win_h = (span + cfg.n_windows - 1) / cfg.n_windows;
  std::vector<LaneCurve> lanes;
  const int max_run = 3 * cfg.stroke;
  // midpoints of marking-width candidate runs in [x0, x1] on row y
  auto collect_runs = [&](int y, int x0, int x1, std::vector<Point2>& pts, double& sum_x, int& count) {
    for (int x = x0; x <= x1;) {
      if (cand.at(x, y) != kPositive) {
        ++x;
        continue;
      }
      const int start = x;
      while (x <= x1 && cand.at(x, y) == kPositive) {
        sum_x += x;
        ++count;
        ++x;
      }
      if (x - start <= max_run) pts.push_back(Point2{(start + x - 1) / 2.0, static_cast<double>(y)});
    }
  };
  auto fit = [&](const std::vector<Point2>& pts, std::size_t li) {
    return cfg.fit == FitMethod::ransac
               ? ransac_polyfit(pts, 2, cfg.ransac_iters, cfg.ransac_tol, derive_seed(cfg.ransac_seed, li))
               : polyfit_lsq(pts, 2);
  };
  for (std::size_t li = 0; li < peaks.size(); ++li) {
    std::vector<Point2> pts;
    long pixels = 0;
    double cx = peaks[li];
    double drift = 0.0;
    for (int k = 0; k < cfg.n_windows; ++k) {
      const int y1 = roi_bottom - k * win_h;
      const int y0 = std::max(roi_top, y1 - win_h);
      if (y1 <= y0) break;
      const int centre = static_cast<int>(std::lround(cx));
      const int x0 = std::max(0, centre - hw);
      const int x1 = std::min(w - 1, centre + hw);
      double sum_x = 0.0;
      int count = 0;
      for (int y = y0; y < y1; ++y) collect_runs(y, x0, x1, pts, sum_x, count);
      pixels += count;
      // an empty window keeps the last step so slanted lanes survive gaps
      if (count >= cfg.min_pixels_recenter) {
        const double next = sum_x / count;
        if (k > 0) drift = next - cx;
        cx = next;
      } else {
        cx += drift;
      }
    }
    std::set<double> ys;
    for (const auto& p : pts) ys.insert(p.y);
    if (pixels < cfg.min_pixels_recenter || ys.size() < 3) continue;
    auto coeffs = fit(pts, li);
    // second pass: gather runs along the whole first fit and refit
    std::vector<Point2> near;
    double unused_sum = 0.0;
    int unused_count = 0;
    for (int y = roi_top; y < roi_bottom; ++y) {
      const double xf = polyval(coeffs, y);
      const int x0 = std::max(0, static_cast<int>(std::floor(xf)) - hw);
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(xf)) + hw);
      if (x0 <= x1) collect_runs(y, x0, x1, near, unused_sum, unused_count);
    }
    std::set<double> near_ys;
    for (const auto& p : near) near_ys.insert(p.y);
    if (near_ys.size() >= 3) coeffs = fit(near, li);
    lanes.push_back(LaneCurve{coeffs[0], coeffs[1], coeffs[2]});
  }
  std::sort(lanes.begin(), lanes.end(), [&](const LaneCurve& a, const LaneCurve& b) {
    return a.x_at(roi_bottom - 1) < b.x_at(roi_bottom - 1);
  });
  out.model.lanes = std::move(lanes);
  out.model.y_begin = roi_top;
  out.model.y_end = roi_bottom;
  out.mask = render_lane_mask(out.model, size, cfg.stroke);
  return out;
}

}  // namespace occlane
