#pragma once

#include <vector>

#include "occlane/nodeproto.hpp"
#include "occlane/raster.hpp"

namespace occlane {

enum class InpaintMode { fmm, fmm_refine, oracle, external };

struct InpaintConfig {
  InpaintMode mode = InpaintMode::fmm_refine;
  int fmm_radius = 5;
  int patch_size = 9;
  int search_window = 64;
  int refine_passes = 1;
  ExternalNodeSpec external;

  bool operator==(const InpaintConfig&) const = default;
};

void validate(const InpaintConfig& cfg);

/// Arrival times of a front starting at the known (non-hole) pixels.
struct DistanceField {
  Size size;
  std::vector<double> t;          ///< 0 on known pixels
  std::vector<std::size_t> order;  ///< hole pixel indices (y*width+x), nondecreasing t

  double at(int x, int y) const { return t[static_cast<std::size_t>(y) * size.width + x]; }
};

/// Fast marching solution of |grad T| = 1 inside the hole (4-neighbour
/// upwind quadratic update, min-heap narrow band). Throws ValidationError if
/// the hole covers the whole frame.
DistanceField fmm_distance(const RasterMask& hole);

/// Telea-style fill: hole pixels in arrival order, each set to the
/// normalized weighted average of first-order estimates I(q) + grad I(q).(p-q)
/// from known pixels q within fmm_radius, clamped to the range of those I(q).
/// The weight multiplies direction (alignment of the offset with grad T),
/// distance (1/d^2) and level (1/(1+|dT|)) factors. One weight set serves all
/// channels; grad I is a 3-pixel-averaged difference over known pixels.
RasterImage inpaint_coarse(const RasterImage& image, const RasterMask& hole, const InpaintConfig& cfg);

struct RefineResult {
  RasterImage image;
  int queries = 0;
  int unmatched = 0;  ///< queries with no hole-free source patch in the window
};

/// SSD patch refinement of an already coarse-filled image. Query centres lie
/// on a grid of stride patch_size/2; each query's hole pixels are replaced by
/// the best hole-free source patch within +-search_window (ties: smallest
/// (y, x)). Every pass reads from a snapshot taken at its start.
RefineResult refine_patches(const RasterImage& image, const RasterMask& hole, const InpaintConfig& cfg);

/// Hole pixels from `clear`, everything else from `occluded`.
RasterImage inpaint_oracle(const RasterImage& occluded, const RasterMask& hole, const RasterImage& clear);

/// Runs the in-process modes (fmm, fmm+refine). Oracle and external modes are
/// dispatched by the pipeline, which owns the reference frame and node handles.
RasterImage inpaint(const RasterImage& image, const RasterMask& hole, const InpaintConfig& cfg);

}  // namespace occlane
