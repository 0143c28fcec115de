#include "occlane/pipeline.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <thread>

#include "occlane/config_io.hpp"
#include "occlane/error.hpp"
#include "occlane/image_io.hpp"
#include "occlane/morphology.hpp"
#include "occlane/rng.hpp"

namespace occlane {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::atomic<int> g_exchange_counter{0};

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

template <class Fn>
void parallel_for(std::size_t n, int workers, const fs::path& scratch_root, Fn fn) {
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    NodeSet nodes(scratch_root);
    for (;;) {
      const std::size_t i = next++;
      if (i >= n) break;
      fn(nodes, i);
    }
  };
  const int w = static_cast<int>(std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(n, 1)));
  if (w == 1) {
    body();
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(w));
  for (int k = 0; k < w; ++k) pool.emplace_back(body);
}

NodeResponse call_node(NodeSet& nodes, NodeRole role, const ExternalNodeSpec& spec,
                       std::map<std::string, std::string> inputs) {
  NodeHandle& handle = nodes.get(role, spec);
  NodeResponse resp = handle.call(std::move(inputs), spec.params, std::chrono::duration<double>(spec.timeout_s));
  if (!resp.ok()) throw Error(to_string(role) + " node reported an error: " + resp.message);
  return resp;
}

std::string output_path(const NodeResponse& resp, const std::string& name) {
  auto it = resp.outputs.find(name);
  if (it == resp.outputs.end()) throw NodeError(NodeErrorKind::protocol, "node response lacks output '" + name + "'");
  return it->second;
}

void remove_quietly(const fs::path& p) {
  std::error_code ec;
  fs::remove(p, ec);
}

std::vector<BBox> run_detector(const FrameRecord& frame, const RasterImage& input, const RasterImage& clear,
                               const DetectorConfig& cfg, NodeSet& nodes) {
  std::vector<BBox> boxes;
  switch (cfg.mode) {
    case DetectorMode::oracle:
      boxes = detect_oracle(frame, cfg);
      break;
    case DetectorMode::diff:
      boxes = detect_diff(input, clear, cfg);
      break;
    case DetectorMode::external: {
      const fs::path in = nodes.next_exchange_path(frame.id + "-detect");
      save_raster(input, in);
      NodeResponse resp = call_node(nodes, NodeRole::detect, cfg.external, {{"image", in.string()}});
      remove_quietly(in);
      if (!resp.boxes) throw NodeError(NodeErrorKind::protocol, "detect node returned no boxes");
      for (BBox b : *resp.boxes) {
        b = clip(b, input.size());
        if (b.valid() && cfg.class_filter.contains(b.class_id)) boxes.push_back(b);
      }
      break;
    }
  }
  std::vector<BBox> kept;
  for (const auto& b : boxes) {
    if (b.confidence >= cfg.confidence_threshold) kept.push_back(b);
  }
  return kept;
}

RasterImage run_inpainter(const FrameRecord& frame, const RasterImage& input, const RasterMask& hole,
                          const RasterImage& clear, const fs::path& clear_path, const InpaintConfig& cfg,
                          NodeSet& nodes) {
  if (count_positive(hole) == 0) return input;
  switch (cfg.mode) {
    case InpaintMode::fmm:
    case InpaintMode::fmm_refine:
      return inpaint(input, hole, cfg);
    case InpaintMode::oracle:
      return inpaint_oracle(input, hole, clear);
    case InpaintMode::external: {
      const fs::path img = nodes.next_exchange_path(frame.id + "-image");
      const fs::path msk = nodes.next_exchange_path(frame.id + "-hole");
      save_raster(input, img);
      save_raster(hole, msk);
      std::map<std::string, std::string> inputs{{"image", img.string()}, {"mask", msk.string()}};
      if (cfg.external.pass_clear_reference) inputs["clear"] = fs::absolute(clear_path).string();
      NodeResponse resp = call_node(nodes, NodeRole::inpaint, cfg.external, std::move(inputs));
      remove_quietly(img);
      remove_quietly(msk);
      RasterImage out = load_image(output_path(resp, "image"));
      if (out.size() != input.size()) throw ValidationError("inpaint node returned an image of a different size");
      return out;
    }
  }
  return input;
}

RasterMask run_segmenter(const FrameRecord& frame, const RasterImage& image, const PipelineConfig& cfg,
                         NodeSet& nodes) {
  if (cfg.segmenter.mode == SegmenterMode::classical) return segment_lanes(image, cfg.segmenter, frame.road_roi).mask;
  const fs::path in = nodes.next_exchange_path(frame.id + "-segment");
  save_raster(image, in);
  NodeResponse resp = call_node(nodes, NodeRole::segment, cfg.segmenter.external, {{"image", in.string()}});
  remove_quietly(in);
  auto raw = load_raster(output_path(resp, "mask"));
  RasterMask soft = std::holds_alternative<RasterMask>(raw) ? std::get<RasterMask>(raw) : luma(std::get<RasterImage>(raw));
  if (soft.size() != image.size()) throw ValidationError("segment node returned a mask of a different size");
  return binarize(soft, cfg.mask_binarize_threshold);
}

TimingStats stats(std::vector<double> v) {
  TimingStats s;
  if (v.empty()) return s;
  s.mean_ms = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  s.median_ms = v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2.0;
  return s;
}

}  // namespace

void validate(const PipelineConfig& cfg) {
  validate(cfg.detector);
  validate(cfg.inpainter);
  validate(cfg.segmenter);
  if (cfg.mask_binarize_threshold < 0 || cfg.mask_binarize_threshold > 255) {
    throw ValidationError("mask_binarize_threshold must be in 0..255");
  }
  if (cfg.eval_dilation < 0) throw ValidationError("eval_dilation must be >= 0");
  if (cfg.workers < 1 || cfg.workers > 256) throw ValidationError("workers must be in 1..256");
}

NodeSet::NodeSet(fs::path scratch_root)
    : scratch_root_(scratch_root.empty() ? fs::temp_directory_path() / "occlane-scratch" : std::move(scratch_root)) {}

NodeSet::~NodeSet() { shutdown(); }

NodeHandle& NodeSet::get(NodeRole role, const ExternalNodeSpec& spec) {
  auto it = handles_.find(role);
  if (it != handles_.end() && (it->second.poisoned() || !it->second.running())) {
    handles_.erase(it);
    it = handles_.end();
  }
  if (it == handles_.end()) {
    SpawnOptions opts;
    opts.handshake_timeout_s = spec.handshake_timeout_s;
    opts.scratch_root = scratch_root_;
    opts.keep_scratch = spec.keep_scratch;
    it = handles_.emplace(role, NodeHandle::spawn(spec.command, role, opts)).first;
  }
  return it->second;
}

const fs::path& NodeSet::exchange_dir() {
  if (exchange_dir_.empty()) {
    fs::path dir = scratch_root_ / ("exchange-" + std::to_string(::getpid()) + "-" + std::to_string(g_exchange_counter++));
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create scratch directory " + dir.string());
    exchange_dir_ = std::move(dir);
  }
  return exchange_dir_;
}

fs::path NodeSet::next_exchange_path(const std::string& stem) {
  const fs::path& dir = exchange_dir();
  return dir / (stem + "-" + std::to_string(exchange_count_++) + ".png");
}

void NodeSet::shutdown() {
  for (auto& [role, handle] : handles_) handle.shutdown();
  handles_.clear();
  if (!exchange_dir_.empty()) {
    std::error_code ec;
    fs::remove_all(exchange_dir_, ec);
    exchange_dir_.clear();
  }
}

PipelineResult run_frame(const FrameRecord& frame, const DatasetManifest& manifest, const PipelineConfig& cfg,
                         NodeSet& nodes, const FrameOptions& options) {
  PipelineResult r;
  r.frame_id = frame.id;
  const auto start = Clock::now();
  std::string stage = "load";
  try {
    const fs::path clear_path = manifest.resolve(frame.clear_image);
    const RasterImage clear = load_image(clear_path);
    RasterImage input = clear;
    if (options.input == FrameInput::occluded) {
      if (!frame.occluded_image) throw ValidationError("frame '" + frame.id + "' has no occluded_image");
      input = load_image(manifest.resolve(*frame.occluded_image));
      if (input.size() != clear.size()) throw ValidationError("occluded and clear frames differ in size");
    }

    if (options.restore) {
      stage = "detect";
      auto t = Clock::now();
      r.boxes = run_detector(frame, input, clear, cfg.detector, nodes);
      r.timings.detect_ms = elapsed_ms(t);

      stage = "mask";
      t = Clock::now();
      r.occlusion_mask = boxes_to_mask(r.boxes, input.size(), cfg.detector.box_dilation);
      r.timings.mask_ms = elapsed_ms(t);

      stage = "inpaint";
      t = Clock::now();
      r.inpainted = run_inpainter(frame, input, r.occlusion_mask, clear, clear_path, cfg.inpainter, nodes);
      r.timings.inpaint_ms = elapsed_ms(t);
    } else {
      r.occlusion_mask = RasterMask(input.size());
      r.inpainted = input;
    }

    stage = "segment";
    auto t = Clock::now();
    r.predicted = run_segmenter(frame, r.inpainted, cfg, nodes);
    r.timings.segment_ms = elapsed_ms(t);

    stage = "evaluate";
    RasterMask gt = binarize(load_mask(manifest.resolve(frame.lane_mask)), 128);
    if (gt.size() != r.predicted.size()) throw ValidationError("lane mask size differs from the frame");
    if (cfg.eval_dilation > 0) gt = dilate(gt, cfg.eval_dilation);
    r.confusion = pixel_confusion(r.predicted, gt);
    r.scores = pixel_scores(r.confusion);
  } catch (const std::exception& e) {
    r.ok = false;
    r.failed_stage = stage;
    r.error = e.what();
  }
  r.timings.total_ms = elapsed_ms(start);
  return r;
}

RunReport run_dataset(const DatasetManifest& manifest, const PipelineConfig& cfg, const fs::path& scratch_root) {
  if (manifest.frames.empty()) throw ValidationError("manifest has no frames");
  validate(cfg);
  RunReport report;
  report.frames.resize(manifest.frames.size());
  parallel_for(manifest.frames.size(), cfg.workers, scratch_root, [&](NodeSet& nodes, std::size_t i) {
    report.frames[i] = run_frame(manifest.frames[i], manifest, cfg, nodes);
  });
  std::sort(report.frames.begin(), report.frames.end(),
            [](const PipelineResult& a, const PipelineResult& b) { return a.frame_id < b.frame_id; });

  std::vector<PixelConfusion> confusions;
  std::map<std::string, std::vector<double>> times;
  for (const auto& f : report.frames) {
    if (!f.ok) {
      ++report.failed;
      continue;
    }
    confusions.push_back(f.confusion);
    times["detect"].push_back(f.timings.detect_ms);
    times["mask"].push_back(f.timings.mask_ms);
    times["inpaint"].push_back(f.timings.inpaint_ms);
    times["segment"].push_back(f.timings.segment_ms);
    times["total"].push_back(f.timings.total_ms);
  }
  if (!confusions.empty()) report.aggregate = aggregate(confusions);
  for (auto& [k, v] : times) report.timings[k] = stats(std::move(v));
  return report;
}

const ConditionReport& AblationReport::condition(const std::string& name) const {
  for (const auto& c : conditions) {
    if (c.condition == name) return c;
  }
  throw ValidationError("no condition named '" + name + "'");
}

DetectorConfig ground_truth_detector(const DetectorConfig& base) {
  DetectorConfig d = base;
  d.mode = DetectorMode::oracle;
  d.class_filter.clear();
  for (int c = 0; c < 256; ++c) d.class_filter.insert(c);
  return d;
}

std::string mask_digest(const RasterMask& mask) {
  const auto b = mask.bytes();
  const std::uint64_t h = fnv1a64(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

AblationReport run_ablation(const DatasetManifest& manifest, const PipelineConfig& cfg,
                            const AblationOptions& options) {
  if (manifest.frames.empty()) throw ValidationError("manifest has no frames");
  validate(cfg);

  AblationReport report;
  report.config = to_json(cfg);
  report.config.erase("workers");
  report.corpus_seed = options.corpus_seed;

  std::vector<const FrameRecord*> frames;
  for (const auto& f : manifest.frames) {
    std::string reason;
    if (!f.occlusion_boxes) {
      reason = "no occlusion_boxes";
    } else if (!f.occluded_image) {
      reason = "no occluded_image";
    } else {
      for (const auto& rel : {f.clear_image, *f.occluded_image, f.lane_mask}) {
        if (!fs::exists(manifest.resolve(rel))) {
          reason = "missing " + rel;
          break;
        }
      }
    }
    if (reason.empty()) {
      frames.push_back(&f);
    } else {
      report.excluded.push_back({f.id, reason});
    }
  }
  std::sort(frames.begin(), frames.end(), [](const FrameRecord* a, const FrameRecord* b) { return a->id < b->id; });
  std::sort(report.excluded.begin(), report.excluded.end(),
            [](const ExcludedFrame& a, const ExcludedFrame& b) { return a.frame_id < b.frame_id; });
  if (frames.empty()) throw ValidationError("no frame has every asset the ablation needs");

  PipelineConfig gt_cfg = cfg;
  gt_cfg.detector = ground_truth_detector(cfg.detector);
  const PipelineConfig* cfgs[4] = {&cfg, &cfg, &cfg, &gt_cfg};
  const FrameOptions opts[4] = {{FrameInput::clear, false},
                                {FrameInput::occluded, false},
                                {FrameInput::occluded, true},
                                {FrameInput::occluded, true}};

  const std::size_t n = frames.size();
  const std::size_t keep = options.keep_outputs < 0 ? n : std::min<std::size_t>(n, static_cast<std::size_t>(options.keep_outputs));
  report.conditions.resize(4);
  for (std::size_t c = 0; c < 4; ++c) {
    report.conditions[c].condition = kConditions[c];
    report.conditions[c].frames.resize(n);
  }
  parallel_for(n * 4, cfg.workers, options.scratch_root, [&](NodeSet& nodes, std::size_t job) {
    const std::size_t i = job / 4;
    const std::size_t c = job % 4;
    PipelineResult r = run_frame(*frames[i], manifest, *cfgs[c], nodes, opts[c]);
    FrameOutcome& o = report.conditions[c].frames[i];
    o.frame_id = r.frame_id;
    o.ok = r.ok;
    o.failed_stage = r.failed_stage;
    o.error = r.error;
    o.boxes = static_cast<int>(r.boxes.size());
    o.confusion = r.confusion;
    o.scores = r.scores;
    if (r.ok) {
      o.mask_digest = mask_digest(r.predicted);
      if (i < keep) {
        o.predicted = std::move(r.predicted);
        o.restored = std::move(r.inpainted);
      }
    }
  });

  std::vector<char> all_ok(n, 1);
  for (auto& cond : report.conditions) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!cond.frames[i].ok) {
        ++cond.failed;
        all_ok[i] = 0;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (all_ok[i]) report.evaluated.push_back(frames[i]->id);
  }
  for (auto& cond : report.conditions) {
    std::vector<PixelConfusion> confusions;
    for (std::size_t i = 0; i < n; ++i) {
      if (all_ok[i]) confusions.push_back(cond.frames[i].confusion);
    }
    if (!confusions.empty()) cond.aggregate = aggregate(confusions);
  }
  return report;
}

}  // namespace occlane
