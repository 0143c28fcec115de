#pragma once

#include <vector>

#include "occlane/geometry.hpp"
#include "occlane/raster.hpp"

namespace occlane {

/// 255 where sample >= threshold, else 0.
RasterMask binarize(const RasterMask& mask, int threshold);

/// Square (Chebyshev) dilation: a pixel is positive iff any positive input
/// pixel lies within the (2r+1)x(2r+1) window centred on it. Separable.
RasterMask dilate(const RasterMask& mask, int radius);

/// Square erosion, the dual of dilate. Pixels outside the frame count as positive
/// so erosion never eats in from the border.
RasterMask erode(const RasterMask& mask, int radius);

/// Erosion followed by dilation with the same square element.
RasterMask open(const RasterMask& mask, int radius);

struct Component {
  BBox box;        ///< tight bounds, class 0, confidence 1
  long area = 0;   ///< number of pixels
};

/// 8-connected components of the positive pixels, in raster order of their
/// first pixel.
std::vector<Component> connected_components(const RasterMask& mask);

/// Per-pixel union of two same-sized masks.
RasterMask mask_union(const RasterMask& a, const RasterMask& b);

/// Per-pixel intersection of two same-sized masks.
RasterMask mask_intersection(const RasterMask& a, const RasterMask& b);

}  // namespace occlane
