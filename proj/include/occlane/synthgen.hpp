#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "occlane/geometry.hpp"
#include "occlane/manifest.hpp"
#include "occlane/raster.hpp"

namespace occlane {

/// Procedural road-scene parameters. Per-scene variation (curvature,
/// vanishing point jitter, noise) is drawn from `seed`.
struct SceneParams {
  int width = 320;
  int height = 240;
  int lane_count = 3;
  /// Upper bound on |a| of x = a*y^2 + b*y + c; each scene draws a in [-curvature, curvature].
  double curvature = 1.5e-4;
  int lane_stroke = 5;
  int horizon_y = 96;
  int road_brightness = 90;
  int lane_brightness = 220;
  double noise_sigma = 6.0;
  std::uint64_t seed = 0;

  bool operator==(const SceneParams&) const = default;
};

/// Throws ParamError when parameters are out of range.
void validate(const SceneParams& p);

struct LaneCurve {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double x_at(double y) const { return (a * y + b) * y + c; }
  bool operator==(const LaneCurve&) const = default;
};

/// Lanes as quadratics x(y) in image coordinates, valid for y in [y_begin, y_end).
struct LaneModel {
  std::vector<LaneCurve> lanes;
  int y_begin = 0;
  int y_end = 0;

  bool empty() const { return lanes.empty(); }
  bool operator==(const LaneModel&) const = default;
};

/// For each row in the valid range, marks pixels with |x - x_lane(y)| <= stroke/2.
RasterMask render_lane_mask(const LaneModel& model, Size size, int stroke);

struct Scene {
  RasterImage clear;
  RasterMask lane_gt;
  LaneModel model;
  Polygon road_roi;
};

/// Deterministic for identical params. Throws ParamError if a lane would leave the frame.
Scene generate_scene(const SceneParams& params);

/// Writes `count` scenes (frames/<id>.png, masks/<id>.png) plus manifest.json
/// into out_dir; scene i uses a sub-seed derived from (params.seed, i).
DatasetManifest generate_corpus(const SceneParams& params, int count, const std::filesystem::path& out_dir);

}  // namespace occlane
