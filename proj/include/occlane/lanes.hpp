#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "occlane/geometry.hpp"
#include "occlane/nodeproto.hpp"
#include "occlane/raster.hpp"
#include "occlane/synthgen.hpp"

namespace occlane {

enum class FitMethod { lsq, ransac };
enum class SegmenterMode { classical, external };

struct LaneFinderConfig {
  SegmenterMode mode = SegmenterMode::classical;
  int luma_threshold = 170;
  int grad_threshold = 60;
  /// Fixed ROI; nullopt means "use the frame's road_roi from the manifest".
  std::optional<Polygon> roi;
  int n_windows = 12;
  int window_halfwidth = 20;
  int min_pixels_recenter = 30;
  FitMethod fit = FitMethod::ransac;
  int ransac_iters = 200;
  double ransac_tol = 2.0;
  std::uint64_t ransac_seed = 0;
  int stroke = 5;
  int min_peak_mass = 50;
  ExternalNodeSpec external;

  bool operator==(const LaneFinderConfig&) const = default;
};

void validate(const LaneFinderConfig& cfg);

struct LaneSegmentation {
  RasterMask mask;  ///< exactly render_lane_mask(model, size, stroke)
  LaneModel model;
};

/// (luma >= luma_threshold OR Sobel magnitude >= grad_threshold) inside the ROI.
/// The gradient test only applies where the 3x3 Sobel support lies in the ROI,
/// so the ROI border itself never produces candidates.
RasterMask lane_candidates(const RasterImage& image, const LaneFinderConfig& cfg, const RasterMask& roi);

/// Histogram peaks -> sliding windows -> per-lane quadratic fit -> rasterize.
/// No peaks yields an empty mask and an empty model. Throws ValidationError
/// when neither cfg.roi nor `frame_roi` is available.
LaneSegmentation segment_lanes(const RasterImage& image, const LaneFinderConfig& cfg,
                               const std::optional<Polygon>& frame_roi = std::nullopt);

/// Least-squares polynomial x(y); coefficients highest order first.
std::vector<double> polyfit_lsq(std::span<const Point2> points, int degree);

/// RANSAC over minimal samples, then least squares on the largest consensus
/// set (|x - p(y)| <= tol). Deterministic for a given seed. Throws ParamError
/// with fewer than degree+1 points or fewer than degree+1 distinct y values.
std::vector<double> ransac_polyfit(std::span<const Point2> points, int degree, int iters, double tol,
                                   std::uint64_t seed);

double polyval(std::span<const double> coeffs, double y);

}  // namespace occlane
