#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "occlane/geometry.hpp"
#include "occlane/raster.hpp"

namespace occlane {

// ---------------------------------------------------------------------------
// Pixel-level segmentation metrics
// ---------------------------------------------------------------------------

struct PixelConfusion {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  PixelConfusion& operator+=(const PixelConfusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  bool operator==(const PixelConfusion&) const = default;
};

/// Scores in [0,1]. When prediction and ground truth are both empty the frame
/// is flagged `both_empty` and scored 1 (perfect). A precision (recall) with a
/// zero denominator is otherwise reported as 0 with its *_defined flag cleared.
struct PixelScores {
  double iou = 0.0;
  double dice = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool both_empty = false;
  bool precision_defined = true;
  bool recall_defined = true;

  bool operator==(const PixelScores&) const = default;
};

/// Throws ValidationError on size mismatch or non-binary input.
PixelConfusion pixel_confusion(const RasterMask& pred, const RasterMask& gt);

PixelScores pixel_scores(const PixelConfusion& c);

struct AggregateScores {
  PixelScores macro;  ///< mean of per-frame scores, undefined entries excluded
  PixelScores micro;  ///< scores of the summed confusion
  PixelConfusion total;
  int frames = 0;
  int excluded_iou = 0;        ///< both-empty frames left out of macro iou/dice
  int excluded_precision = 0;  ///< frames with undefined precision
  int excluded_recall = 0;

  bool operator==(const AggregateScores&) const = default;
};

/// Throws ValidationError on an empty list.
AggregateScores aggregate(std::span<const PixelConfusion> per_frame);

// ---------------------------------------------------------------------------
// Box geometry
// ---------------------------------------------------------------------------

/// Half-open intersection over union; 0 for disjoint boxes.
double box_iou(const BBox& a, const BBox& b);

struct CIoUTerms {
  double iou = 0.0;
  double center_dist_sq = 0.0;     ///< rho^2
  double enclosing_diag_sq = 0.0;  ///< c^2
  double aspect_term = 0.0;        ///< v
  double alpha = 0.0;
  double ciou = 0.0;  ///< iou - rho^2/c^2 - alpha*v
};

CIoUTerms box_ciou(const BBox& pred, const BBox& gt);

// ---------------------------------------------------------------------------
// Detection AP (COCO-style, 101-point interpolation)
// ---------------------------------------------------------------------------

inline constexpr std::array<double, 10> kCocoIouThresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                                               0.75, 0.80, 0.85, 0.90, 0.95};

/// Ranked detections (descending confidence) flagged true/false positive.
struct RankedMatch {
  double confidence = 0.0;
  bool true_positive = false;
};

/// 101-point interpolated AP of an already ranked list; nullopt when there is
/// no ground truth and no prediction, 0 when only predictions exist.
std::optional<double> interpolated_ap(std::span<const RankedMatch> ranked, std::size_t num_gt);

/// AP for one class in one image. Predictions are ranked by confidence
/// (stable: ties keep insertion order); each greedily claims the highest-IoU
/// unmatched ground truth with IoU >= threshold.
std::optional<double> average_precision(std::span<const BBox> preds, std::span<const BBox> gts, double iou_threshold);

struct DetectionEval {
  /// class id -> AP at each of kCocoIouThresholds (classes present in ground truth).
  std::map<int, std::array<double, 10>> ap;
  double precision = 0.0;  ///< at IoU 0.5, confidence >= cutoff
  double recall = 0.0;
  double map50_95 = 0.0;
  std::vector<std::string> class_names;
};

/// Pools detections over frames (matching happens within each frame).
DetectionEval map50_95(const std::vector<std::vector<BBox>>& preds_per_frame,
                       const std::vector<std::vector<BBox>>& gts_per_frame, const std::vector<std::string>& class_names,
                       double confidence_cutoff = 0.25);

// ---------------------------------------------------------------------------
// Inpainting fidelity
// ---------------------------------------------------------------------------

struct FidelityScores {
  double l1_masked = 0.0;    ///< mean absolute error over hole pixels and channels
  double psnr_masked = 0.0;  ///< dB; 99 when the hole is reproduced exactly
};

inline constexpr double kPsnrCap = 99.0;

/// Throws ValidationError for an empty hole or mismatched sizes.
FidelityScores inpaint_fidelity(const RasterImage& inpainted, const RasterImage& clear, const RasterMask& hole);

}  // namespace occlane
