#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "occlane/detect.hpp"
#include "occlane/inpaint.hpp"
#include "occlane/lanes.hpp"
#include "occlane/manifest.hpp"
#include "occlane/metrics.hpp"
#include "occlane/nodeproto.hpp"
#include "occlane/raster.hpp"

namespace occlane {

struct PipelineConfig {
  DetectorConfig detector;
  InpaintConfig inpainter;
  LaneFinderConfig segmenter;
  /// Soft masks returned by external segmenters are binarized at this level.
  int mask_binarize_threshold = 128;
  /// Square dilation applied to the ground-truth lane mask before scoring.
  int eval_dilation = 0;
  int workers = 1;

  bool operator==(const PipelineConfig&) const = default;
};

void validate(const PipelineConfig& cfg);

/// Wall-clock milliseconds per stage, measured with a steady clock.
struct StageTimings {
  double detect_ms = 0.0;
  double mask_ms = 0.0;
  double inpaint_ms = 0.0;
  double segment_ms = 0.0;
  double total_ms = 0.0;
};

struct PipelineResult {
  std::string frame_id;
  bool ok = true;
  std::string failed_stage;
  std::string error;
  std::vector<BBox> boxes;
  RasterMask occlusion_mask;
  RasterImage inpainted;
  RasterMask predicted;
  StageTimings timings;
  PixelConfusion confusion;
  PixelScores scores;
};

/// External node handles owned by one worker, spawned on first use and
/// respawned after a poisoning failure.
class NodeSet {
 public:
  explicit NodeSet(std::filesystem::path scratch_root = {});
  NodeSet(const NodeSet&) = delete;
  NodeSet& operator=(const NodeSet&) = delete;
  ~NodeSet();

  NodeHandle& get(NodeRole role, const ExternalNodeSpec& spec);
  /// Per-worker directory for images handed to nodes.
  const std::filesystem::path& exchange_dir();
  /// Unique path under exchange_dir() for the next file handed to a node.
  std::filesystem::path next_exchange_path(const std::string& stem);
  void shutdown();

 private:
  std::filesystem::path scratch_root_;
  std::filesystem::path exchange_dir_;
  std::map<NodeRole, NodeHandle> handles_;
  int exchange_count_ = 0;
};

/// Which image enters the pipeline and how boxes are obtained.
enum class FrameInput { clear, occluded };

struct FrameOptions {
  FrameInput input = FrameInput::occluded;
  /// false: segment the input directly (no detection or inpainting).
  bool restore = true;
};

/// detect -> boxes_to_mask -> inpaint -> segment -> score for one frame.
/// Failures are reported in the result with the stage that failed.
PipelineResult run_frame(const FrameRecord& frame, const DatasetManifest& manifest, const PipelineConfig& cfg,
                         NodeSet& nodes, const FrameOptions& options = {});

struct TimingStats {
  double mean_ms = 0.0;
  double median_ms = 0.0;
};

struct RunReport {
  std::vector<PipelineResult> frames;  ///< sorted by frame id
  std::optional<AggregateScores> aggregate;  ///< over successful frames
  std::map<std::string, TimingStats> timings;  ///< keys: detect, mask, inpaint, segment, total
  int failed = 0;

  bool majority_failed() const { return failed * 2 > static_cast<int>(frames.size()); }
};

/// Frame-parallel run of the full pipeline; results do not depend on worker count.
/// Throws ValidationError on an empty manifest.
RunReport run_dataset(const DatasetManifest& manifest, const PipelineConfig& cfg,
                      const std::filesystem::path& scratch_root = {});

inline constexpr std::array<const char*, 4> kConditions = {"clear", "occluded", "inpainted_detector",
                                                            "inpainted_gt"};

struct FrameOutcome {
  std::string frame_id;
  bool ok = true;
  std::string failed_stage;
  std::string error;
  int boxes = 0;
  PixelConfusion confusion;
  PixelScores scores;
  std::string mask_digest;  ///< FNV-1a of the predicted mask bytes, hex
  std::optional<RasterMask> predicted;  ///< kept only when requested
  std::optional<RasterImage> restored;  ///< pipeline input to the segmenter, when kept

  bool operator==(const FrameOutcome&) const = default;
};

struct ConditionReport {
  std::string condition;
  std::vector<FrameOutcome> frames;  ///< sorted by frame id
  std::optional<AggregateScores> aggregate;  ///< over frames that succeeded in every condition
  int failed = 0;

  bool operator==(const ConditionReport&) const = default;
};

struct ExcludedFrame {
  std::string frame_id;
  std::string reason;

  bool operator==(const ExcludedFrame&) const = default;
};

struct AblationReport {
  std::vector<ConditionReport> conditions;  ///< in kConditions order
  std::vector<std::string> evaluated;  ///< ids scored in every condition
  std::vector<ExcludedFrame> excluded;
  nlohmann::json config;
  std::optional<std::int64_t> corpus_seed;

  const ConditionReport& condition(const std::string& name) const;
  bool operator==(const AblationReport&) const = default;
};

struct AblationOptions {
  std::optional<std::int64_t> corpus_seed;
  /// Keep predicted masks and segmenter inputs for this many frames (sorted by id); -1 keeps all.
  int keep_outputs = 0;
  std::filesystem::path scratch_root;
};

/// Four conditions with the same segmenter: clear, occluded, full pipeline
/// with cfg.detector, full pipeline with ground-truth boxes. Frames missing
/// any required asset are excluded from every condition. Throws
/// ValidationError on an empty manifest or when every frame is excluded.
AblationReport run_ablation(const DatasetManifest& manifest, const PipelineConfig& cfg,
                            const AblationOptions& options = {});

/// Detector used for condition 4: oracle boxes, every class, the same dilation.
DetectorConfig ground_truth_detector(const DetectorConfig& base);

std::string mask_digest(const RasterMask& mask);

}  // namespace occlane
