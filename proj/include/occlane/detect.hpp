#pragma once

#include <set>
#include <vector>

#include "occlane/geometry.hpp"
#include "occlane/manifest.hpp"
#include "occlane/nodeproto.hpp"
#include "occlane/raster.hpp"

namespace occlane {

enum class DetectorMode { oracle, diff, external };

struct DetectorConfig {
  DetectorMode mode = DetectorMode::diff;
  int diff_threshold = 12;
  int min_component_area = 64;
  int open_radius = 1;
  /// Class ids kept by detect_oracle; defaults to all seven traffic classes.
  std::set<int> class_filter = {0, 1, 2, 3, 4, 5, 6};
  int box_dilation = 2;
  /// Boxes below this confidence are dropped before masking.
  double confidence_threshold = 0.25;
  /// Used when mode == external.
  ExternalNodeSpec external;

  bool operator==(const DetectorConfig&) const = default;
};

void validate(const DetectorConfig& cfg);

/// Ground-truth boxes filtered by class, confidence forced to 1. Throws
/// ValidationError when the frame carries no box annotation.
std::vector<BBox> detect_oracle(const FrameRecord& frame, const DetectorConfig& cfg);

/// Change detection against a reference frame: max-channel absolute difference
/// >= diff_threshold, square opening, 8-connected components of at least
/// min_component_area pixels. Confidence = min(1, area / (4 * min_area)), class 0.
std::vector<BBox> detect_diff(const RasterImage& occluded, const RasterImage& clear_ref, const DetectorConfig& cfg);

/// Binary change mask before opening (exposed for tests and diagnostics).
RasterMask change_mask(const RasterImage& a, const RasterImage& b, int threshold);

/// Union of filled rectangles, each grown by `box_dilation` on every side and clipped.
RasterMask boxes_to_mask(const std::vector<BBox>& boxes, Size size, int box_dilation);

}  // namespace occlane
