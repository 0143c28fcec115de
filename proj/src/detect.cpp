#include "occlane/detect.hpp"

#include <algorithm>
#include <cstdlib>

#include "occlane/morphology.hpp"

namespace occlane {

void validate(const DetectorConfig& cfg) {
  if (cfg.diff_threshold < 0 || cfg.diff_threshold > 255) throw ValidationError("diff_threshold must be in 0..255");
  if (cfg.min_component_area < 1) throw ValidationError("min_component_area must be >= 1");
  if (cfg.open_radius < 0) throw ValidationError("open_radius must be >= 0");
  if (cfg.box_dilation < 0) throw ValidationError("box_dilation must be >= 0");
  if (!(cfg.confidence_threshold >= 0.0 && cfg.confidence_threshold <= 1.0)) {
    throw ValidationError("confidence_threshold must be in [0,1]");
  }
  if (cfg.mode == DetectorMode::external && cfg.external.command.empty()) {
    throw ValidationError("external detector needs a command");
  }
}

std::vector<BBox> detect_oracle(const FrameRecord& frame, const DetectorConfig& cfg) {
  if (!frame.occlusion_boxes) throw ValidationError("frame '" + frame.id + "' has no occlusion boxes");
  std::vector<BBox> out;
  for (BBox b : *frame.occlusion_boxes) {
    if (!cfg.class_filter.contains(b.class_id)) continue;
    b.confidence = 1.0;
    out.push_back(b);
  }
  return out;
}

RasterMask change_mask(const RasterImage& a, const RasterImage& b, int threshold) {
  if (a.size() != b.size()) throw ValidationError("detect_diff: frame dimensions differ");
  RasterMask out(a.size());
  const auto pa = a.bytes();
  const auto pb = b.bytes();
  auto dst = out.bytes();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    int d = 0;
    for (int c = 0; c < 3; ++c) d = std::max(d, std::abs(int{pa[3 * i + c]} - int{pb[3 * i + c]}));
    dst[i] = d >= threshold ? kPositive : 0;
  }
  return out;
}

std::vector<BBox> detect_diff(const RasterImage& occluded, const RasterImage& clear_ref, const DetectorConfig& cfg) {
  const RasterMask opened = open(change_mask(occluded, clear_ref, cfg.diff_threshold), cfg.open_radius);
  std::vector<BBox> boxes;
  for (const auto& comp : connected_components(opened)) {
    if (comp.area < cfg.min_component_area) continue;
    BBox b = comp.box;
    b.class_id = 0;
    b.confidence = std::min(1.0, static_cast<double>(comp.area) / (4.0 * cfg.min_component_area));
    boxes.push_back(b);
  }
  return boxes;
}

RasterMask boxes_to_mask(const std::vector<BBox>& boxes, Size size, int box_dilation) {
  RasterMask out(size);
  for (const auto& b : boxes) {
    const BBox g = clip(BBox{b.x_min - box_dilation, b.y_min - box_dilation, b.x_max + box_dilation,
                             b.y_max + box_dilation, b.class_id, b.confidence},
                        size);
    for (int y = g.y_min; y < g.y_max; ++y) {
      std::fill(out.row(y) + g.x_min, out.row(y) + g.x_max, kPositive);
    }
  }
  return out;
}

}  // namespace occlane
