#include "occlane/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "occlane/augment.hpp"
#include "occlane/config_io.hpp"
#include "occlane/error.hpp"
#include "occlane/image_io.hpp"
#include "occlane/manifest.hpp"
#include "occlane/metrics.hpp"
#include "occlane/morphology.hpp"
#include "occlane/panel.hpp"
#include "occlane/pipeline.hpp"
#include "occlane/report.hpp"
#include "occlane/synthgen.hpp"

namespace occlane {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Raised for bad configuration files; reported as a usage error.
class UsageError : public Error {
 public:
  using Error::Error;
};

fs::path scratch_root(const fs::path& out_dir) {
  if (const char* env = std::getenv("OCCLANE_SCRATCH"); env && *env) return env;
  return out_dir / "scratch";
}

PipelineConfig load_config(const std::string& path, int workers_override) {
  PipelineConfig cfg;
  try {
    if (!path.empty()) cfg = read_pipeline_config(path);
    if (workers_override > 0) cfg.workers = workers_override;
    validate(cfg);
  } catch (const Error& e) {
    throw UsageError(std::string("bad config: ") + e.what());
  }
  return cfg;
}

std::optional<std::int64_t> snapshot_corpus_seed(const fs::path& manifest_path) {
  const fs::path snap = manifest_path.parent_path() / "snapshot.json";
  if (!fs::exists(snap)) return std::nullopt;
  try {
    const json j = read_json(snap);
    if (j.contains("corpus_seed") && j["corpus_seed"].is_number_integer()) return j["corpus_seed"].get<std::int64_t>();
  } catch (const Error&) {
  }
  return std::nullopt;
}

void write_snapshot(const fs::path& out_dir, json snapshot) { write_json(snapshot, out_dir / "snapshot.json"); }

struct SynthArgs {
  int count = 0;
  std::uint64_t seed = 0;
  std::string out;
  SceneParams params;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SceneParams p = a.params;
  p.seed = a.seed;
  validate(p);
  const fs::path dir = a.out;
  const DatasetManifest m = generate_corpus(p, a.count, dir);
  write_snapshot(dir, json{{"command", "synth"},
                           {"corpus_seed", static_cast<std::int64_t>(a.seed)},
                           {"count", a.count},
                           {"params", to_json(p)}});
  out << "wrote " << m.frames.size() << " scenes to " << (dir / "manifest.json").string() << "\n";
  return kExitOk;
}

struct SpritesArgs {
  std::string out;
  std::uint64_t seed = 0;
  int per_class = 3;
};

int cmd_sprites(const SpritesArgs& a, std::ostream& out) {
  const auto sprites = make_default_sprites(a.seed, a.per_class);
  save_sprite_library(sprites, a.out, traffic_classes());
  out << "wrote " << sprites.size() << " sprites to " << a.out << "\n";
  return kExitOk;
}

struct AugmentArgs {
  std::string manifest;
  std::string sprites;
  std::string out;
  PlacementPolicy policy;
  bool no_scale_by_y = false;
  bool no_road_check = false;
};

int cmd_augment(const AugmentArgs& a, std::ostream& out, std::ostream& err) {
  PlacementPolicy policy = a.policy;
  if (a.no_scale_by_y) policy.scale_by_y = false;
  if (a.no_road_check) policy.require_road_intersection = false;
  validate(policy);
  const DatasetManifest src = read_manifest(a.manifest);
  const auto sprites = load_sprite_library(a.sprites, src.class_names);
  const fs::path dir = a.out;
  AugmentResult r = build_augmented_dataset(src, sprites, policy, dir);
  for (const auto& w : r.warnings) err << "warning: " << w << "\n";
  if (r.manifest.frames.empty()) throw Error("no frame could be augmented");
  write_manifest(r.manifest, dir / "manifest.json");
  const auto corpus_seed = snapshot_corpus_seed(a.manifest);
  write_snapshot(dir, json{{"command", "augment"},
                           {"corpus_seed", corpus_seed ? json(*corpus_seed) : json(nullptr)},
                           {"source_manifest", a.manifest},
                           {"policy", to_json(policy)},
                           {"sprites", sprites.size()}});
  out << "augmented " << r.manifest.frames.size() << " of " << src.frames.size() << " frames into "
      << (dir / "manifest.json").string() << "\n";
  return kExitOk;
}

struct PipelineArgs {
  std::string manifest;
  std::string config;
  std::string out;
  int workers = 0;
  int panels = 4;
  std::optional<std::int64_t> corpus_seed;
};

std::vector<PanelTile> ablation_tiles(const DatasetManifest& m, const FrameRecord& f, const AblationReport& r,
                                      std::size_t index) {
  std::vector<PanelTile> tiles;
  tiles.push_back(make_tile("original", load_image(m.resolve(f.clear_image))));
  tiles.push_back(make_tile("ground truth", load_mask(m.resolve(f.lane_mask))));
  for (const auto& c : r.conditions) {
    const FrameOutcome& o = c.frames[index];
    tiles.push_back(make_tile(c.condition, o.predicted ? *o.predicted : RasterMask(tiles[0].image.size())));
  }
  return tiles;
}

int cmd_ablate(const PipelineArgs& a, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg = load_config(a.config, a.workers);
  DatasetManifest m = read_manifest(a.manifest, ManifestReadOptions{true});
  for (const auto& f : m.frames) {
    if (!f.occlusion_boxes) throw ValidationError("frame '" + f.id + "' has no occlusion_boxes; the ablation needs ground-truth boxes");
  }
  const fs::path dir = a.out;
  AblationOptions opts;
  opts.corpus_seed = a.corpus_seed ? a.corpus_seed : snapshot_corpus_seed(a.manifest);
  opts.keep_outputs = std::max(a.panels, 0);
  opts.scratch_root = scratch_root(dir);
  const AblationReport r = run_ablation(m, cfg, opts);
  for (const auto& e : r.excluded) err << "excluded frame '" << e.frame_id << "': " << e.reason << "\n";

  emit_report(r, dir / "reports" / "ablation.csv", ReportFormat::csv);
  emit_report(r, dir / "reports" / "ablation.json", ReportFormat::json);
  write_snapshot(dir, json{{"command", "ablate"},
                           {"corpus_seed", opts.corpus_seed ? json(*opts.corpus_seed) : json(nullptr)},
                           {"manifest", a.manifest},
                           {"config", to_json(cfg)}});

  std::map<std::string, const FrameRecord*> by_id;
  for (const auto& f : m.frames) by_id[f.id] = &f;
  const auto& first = r.conditions.front().frames;
  for (std::size_t i = 0; i < first.size() && static_cast<int>(i) < a.panels; ++i) {
    emit_panel(ablation_tiles(m, *by_id.at(first[i].frame_id), r, i), dir / "panels" / (first[i].frame_id + ".png"));
    for (const auto& c : r.conditions) {
      const FrameOutcome& o = c.frames[i];
      if (o.restored) save_raster(*o.restored, dir / "frames" / (o.frame_id + "_" + c.condition + ".png"));
    }
  }

  std::vector<std::pair<std::string, PixelScores>> rows;
  bool wholly_failed = false;
  for (const auto& c : r.conditions) {
    rows.emplace_back(c.condition, c.aggregate ? c.aggregate->macro : PixelScores{});
    if (!c.aggregate) wholly_failed = true;
  }
  out << scores_table(rows);
  for (const auto& c : r.conditions) {
    for (const auto& f : c.frames) {
      if (!f.ok) err << c.condition << ": frame '" << f.frame_id << "' failed at " << f.failed_stage << ": " << f.error << "\n";
    }
  }
  if (wholly_failed) {
    err << "error: at least one condition has no successfully evaluated frame\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_run(const PipelineArgs& a, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg = load_config(a.config, a.workers);
  DatasetManifest m = read_manifest(a.manifest, ManifestReadOptions{true});
  const fs::path dir = a.out;
  const RunReport r = run_dataset(m, cfg, scratch_root(dir));
  const json cfg_json = to_json(cfg);
  json report_cfg = cfg_json;
  report_cfg.erase("workers");
  write_text(run_json(r, report_cfg).dump(2) + "\n", dir / "reports" / "run.json");
  write_text(run_csv(r), dir / "reports" / "run.csv");
  write_text(run_timings_json(r).dump(2) + "\n", dir / "reports" / "timings.json");
  write_snapshot(dir, json{{"command", "run"},
                           {"corpus_seed", snapshot_corpus_seed(a.manifest) ? json(*snapshot_corpus_seed(a.manifest)) : json(nullptr)},
                           {"manifest", a.manifest},
                           {"config", cfg_json}});
  std::map<std::string, const FrameRecord*> by_id;
  for (const auto& f : m.frames) by_id[f.id] = &f;
  int panels = 0;
  for (const auto& f : r.frames) {
    if (!f.ok) {
      err << "frame '" << f.frame_id << "' failed at " << f.failed_stage << ": " << f.error << "\n";
      continue;
    }
    save_raster(f.predicted, dir / "masks" / (f.frame_id + ".png"));
    save_raster(f.inpainted, dir / "frames" / (f.frame_id + "_restored.png"));
    if (panels < a.panels) {
      const FrameRecord& rec = *by_id.at(f.frame_id);
      std::vector<PanelTile> tiles;
      tiles.push_back(make_tile("input", load_image(m.resolve(rec.occluded_image ? *rec.occluded_image : rec.clear_image))));
      tiles.push_back(make_tile("ground truth", load_mask(m.resolve(rec.lane_mask))));
      tiles.push_back(make_tile("restored", f.inpainted));
      tiles.push_back(make_tile("prediction", f.predicted));
      emit_panel(tiles, dir / "panels" / (f.frame_id + ".png"));
      ++panels;
    }
  }
  if (r.aggregate) {
    out << scores_table({{"macro", r.aggregate->macro}, {"micro", r.aggregate->micro}});
  }
  char buf[128];
  for (const auto& [stage, t] : r.timings) {
    std::snprintf(buf, sizeof buf, "%-8s mean %8.2f ms  median %8.2f ms\n", stage.c_str(), t.mean_ms, t.median_ms);
    out << buf;
  }
  out << r.failed << " of " << r.frames.size() << " frames failed\n";
  return r.majority_failed() ? kExitFailure : kExitOk;
}

struct EvalArgs {
  std::string pred;
  std::string manifest;
  std::string gt;
  std::string out;
  int eval_dilation = 0;
};

std::map<std::string, fs::path> masks_in(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out[e.path().stem().string()] = e.path();
  }
  return out;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto preds = masks_in(a.pred);
  std::map<std::string, fs::path> gts;
  if (!a.manifest.empty()) {
    const DatasetManifest m = read_manifest(a.manifest, ManifestReadOptions{true});
    for (const auto& f : m.frames) gts[f.id] = m.resolve(f.lane_mask);
  } else {
    gts = masks_in(a.gt);
  }
  EvalReport report;
  std::vector<PixelConfusion> confusions;
  for (const auto& [id, gt_path] : gts) {
    auto it = preds.find(id);
    if (it == preds.end()) {
      report.unmatched.push_back(id);
      continue;
    }
    const RasterMask pred = binarize(load_mask(it->second), 128);
    RasterMask gt = binarize(load_mask(gt_path), 128);
    if (a.eval_dilation > 0) gt = dilate(gt, a.eval_dilation);
    EvalFrame f{id, pixel_confusion(pred, gt), {}};
    f.scores = pixel_scores(f.confusion);
    confusions.push_back(f.confusion);
    report.frames.push_back(std::move(f));
  }
  for (const auto& [id, path] : preds) {
    if (!gts.count(id)) report.unmatched.push_back(id);
  }
  std::sort(report.unmatched.begin(), report.unmatched.end());
  for (const auto& id : report.unmatched) err << "unmatched id: " << id << "\n";
  if (confusions.empty()) {
    err << "error: no prediction/ground-truth pairs\n";
    return kExitFailure;
  }
  report.aggregate = aggregate(confusions);
  out << scores_table({{"macro", report.aggregate.macro}, {"micro", report.aggregate.micro}});
  if (!a.out.empty()) {
    const fs::path dir = a.out;
    write_text(eval_csv(report), dir / "reports" / "eval.csv");
    write_text(eval_json(report).dump(2) + "\n", dir / "reports" / "eval.json");
    write_snapshot(dir, json{{"command", "eval"},
                             {"pred", a.pred},
                             {"manifest", a.manifest},
                             {"gt", a.gt},
                             {"eval_dilation", a.eval_dilation}});
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Occlusion-aware lane detection toolkit", "occlane"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic road-scene corpus");
  s->add_option("--count", synth.count, "Number of scenes")->required()->check(CLI::PositiveNumber);
  s->add_option("--seed", synth.seed, "Corpus seed")->required();
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--width", synth.params.width, "Frame width")->capture_default_str();
  s->add_option("--height", synth.params.height, "Frame height")->capture_default_str();
  s->add_option("--lanes", synth.params.lane_count, "Lane lines per scene")->capture_default_str();
  s->add_option("--curvature", synth.params.curvature, "Bound on |a| in x = a*y^2 + b*y + c")->capture_default_str();
  s->add_option("--stroke", synth.params.lane_stroke, "Lane stroke width in pixels")->capture_default_str();
  s->add_option("--horizon", synth.params.horizon_y, "Horizon row")->capture_default_str();
  s->add_option("--noise", synth.params.noise_sigma, "Gaussian noise sigma")->capture_default_str();

  SpritesArgs sprites;
  auto* sp = app.add_subcommand("sprites", "Write the procedural occluder sprite library");
  sp->add_option("--out", sprites.out, "Output directory")->required();
  sp->add_option("--seed", sprites.seed, "Sprite seed")->capture_default_str();
  sp->add_option("--per-class", sprites.per_class, "Sprites per class")->capture_default_str()->check(CLI::PositiveNumber);

  AugmentArgs aug;
  auto* ag = app.add_subcommand("augment", "Composite occluders onto a clear corpus");
  ag->add_option("--manifest", aug.manifest, "Clear corpus manifest")->required();
  ag->add_option("--sprites", aug.sprites, "Sprite directory (<class>_<n>.png)")->required();
  ag->add_option("--out", aug.out, "Output directory")->required();
  ag->add_option("--seed", aug.policy.seed, "Placement seed")->required();
  ag->add_option("--min-occluders", aug.policy.min_occluders, "Minimum occluders per frame")->capture_default_str();
  ag->add_option("--max-occluders", aug.policy.max_occluders, "Maximum occluders per frame")->capture_default_str();
  ag->add_option("--max-mutual-iou", aug.policy.max_mutual_iou, "Largest IoU allowed between occluders")
      ->capture_default_str();
  ag->add_option("--max-retries", aug.policy.max_retries, "Placement attempts per occluder")->capture_default_str();
  ag->add_flag("--no-scale-by-y", aug.no_scale_by_y, "Disable perspective scaling");
  ag->add_flag("--no-road-check", aug.no_road_check, "Allow occluders that miss the road");

  PipelineArgs abl;
  std::int64_t abl_seed = 0;
  auto* ab = app.add_subcommand("ablate", "Four-condition ablation (clear, occluded, detector boxes, GT boxes)");
  ab->add_option("--manifest", abl.manifest, "Augmented manifest")->required();
  ab->add_option("--config", abl.config, "Pipeline config (JSON)");
  ab->add_option("--out", abl.out, "Output directory")->required();
  ab->add_option("--workers", abl.workers, "Worker threads (overrides config)")->check(CLI::PositiveNumber);
  ab->add_option("--panels", abl.panels, "Comparison panels for the first K frames")->capture_default_str()->check(CLI::NonNegativeNumber);
  auto* abl_seed_opt = ab->add_option("--corpus-seed", abl_seed, "Corpus seed recorded in the report");

  PipelineArgs run;
  run.panels = 0;
  auto* rn = app.add_subcommand("run", "Run the full pipeline over a manifest");
  rn->add_option("--manifest", run.manifest, "Manifest")->required();
  rn->add_option("--config", run.config, "Pipeline config (JSON)");
  rn->add_option("--out", run.out, "Output directory")->required();
  rn->add_option("--workers", run.workers, "Worker threads (overrides config)")->check(CLI::PositiveNumber);
  rn->add_option("--panels", run.panels, "Comparison panels for the first K frames")->capture_default_str()->check(CLI::NonNegativeNumber);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score predicted masks against ground truth");
  e->add_option("--pred", ev.pred, "Directory of predicted masks named <id>.png")->required();
  auto* ev_manifest = e->add_option("--manifest", ev.manifest, "Manifest providing ground-truth lane masks");
  auto* ev_gt = e->add_option("--gt", ev.gt, "Directory of ground-truth masks named <id>.png");
  ev_manifest->excludes(ev_gt);
  e->add_option("--out", ev.out, "Directory for reports (optional)");
  e->add_option("--eval-dilation", ev.eval_dilation, "Dilate ground truth by this radius")->capture_default_str()->check(CLI::NonNegativeNumber);

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.push_back("occlane");
  for (const auto& a : args) storage.push_back(a);
  std::vector<char*> argv;
  for (auto& a : storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (e->parsed() && ev.manifest.empty() && ev.gt.empty()) throw CLI::ValidationError("eval needs --manifest or --gt");
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& pe) {
    err << "usage error: " << pe.what() << "\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << "run '" << sub->get_name() << " --help' for usage\n";
    return kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (sp->parsed()) return cmd_sprites(sprites, out);
    if (ag->parsed()) return cmd_augment(aug, out, err);
    if (ab->parsed()) {
      if (abl_seed_opt->count() > 0) abl.corpus_seed = abl_seed;
      return cmd_ablate(abl, out, err);
    }
    if (rn->parsed()) return cmd_run(run, out, err);
    if (e->parsed()) return cmd_eval(ev, out, err);
  } catch (const UsageError& ue) {
    err << "usage error: " << ue.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace occlane
