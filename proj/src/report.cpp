#include "occlane/report.hpp"

#include <cstdio>
#include <fstream>

#include "occlane/error.hpp"

namespace occlane {

using nlohmann::json;

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_row(const std::string& name, const PixelScores& s) {
  return name + "," + fixed6(s.iou) + "," + fixed6(s.precision) + "," + fixed6(s.recall) + "," + fixed6(s.dice) + "\n";
}

const char* kCsvHeader = "condition,IOU,Precision,Recall,Dice\n";

json outcome_json(const FrameOutcome& o) {
  json j{{"id", o.frame_id}, {"ok", o.ok}};
  if (o.ok) {
    j["boxes"] = o.boxes;
    j["confusion"] = to_json(o.confusion);
    j["scores"] = to_json(o.scores);
    j["mask_digest"] = o.mask_digest;
  } else {
    j["failed_stage"] = o.failed_stage;
    j["error"] = o.error;
  }
  return j;
}

FrameOutcome outcome_from_json(const json& j) {
  FrameOutcome o;
  o.frame_id = j.at("id").get<std::string>();
  o.ok = j.at("ok").get<bool>();
  if (o.ok) {
    o.boxes = j.at("boxes").get<int>();
    o.confusion = confusion_from_json(j.at("confusion"));
    o.scores = scores_from_json(j.at("scores"));
    o.mask_digest = j.at("mask_digest").get<std::string>();
  } else {
    o.failed_stage = j.at("failed_stage").get<std::string>();
    o.error = j.at("error").get<std::string>();
  }
  return o;
}

json boxes_json(const std::vector<BBox>& boxes) {
  json out = json::array();
  for (const auto& b : boxes) out.push_back({b.x_min, b.y_min, b.x_max, b.y_max, b.class_id, b.confidence});
  return out;
}

}  // namespace

json to_json(const PixelConfusion& c) { return json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}}; }

json to_json(const PixelScores& s) {
  return json{{"iou", s.iou},
              {"dice", s.dice},
              {"precision", s.precision},
              {"recall", s.recall},
              {"both_empty", s.both_empty},
              {"precision_defined", s.precision_defined},
              {"recall_defined", s.recall_defined}};
}

json to_json(const AggregateScores& a) {
  return json{{"macro", to_json(a.macro)},
              {"micro", to_json(a.micro)},
              {"total", to_json(a.total)},
              {"frames", a.frames},
              {"excluded_iou", a.excluded_iou},
              {"excluded_precision", a.excluded_precision},
              {"excluded_recall", a.excluded_recall}};
}

PixelConfusion confusion_from_json(const json& j) {
  return PixelConfusion{j.at("tp").get<std::int64_t>(), j.at("fp").get<std::int64_t>(), j.at("fn").get<std::int64_t>(),
                        j.at("tn").get<std::int64_t>()};
}

PixelScores scores_from_json(const json& j) {
  PixelScores s;
  s.iou = j.at("iou").get<double>();
  s.dice = j.at("dice").get<double>();
  s.precision = j.at("precision").get<double>();
  s.recall = j.at("recall").get<double>();
  s.both_empty = j.at("both_empty").get<bool>();
  s.precision_defined = j.at("precision_defined").get<bool>();
  s.recall_defined = j.at("recall_defined").get<bool>();
  return s;
}

AggregateScores aggregate_from_json(const json& j) {
  AggregateScores a;
  a.macro = scores_from_json(j.at("macro"));
  a.micro = scores_from_json(j.at("micro"));
  a.total = confusion_from_json(j.at("total"));
  a.frames = j.at("frames").get<int>();
  a.excluded_iou = j.at("excluded_iou").get<int>();
  a.excluded_precision = j.at("excluded_precision").get<int>();
  a.excluded_recall = j.at("excluded_recall").get<int>();
  return a;
}

std::string ablation_csv(const AblationReport& report) {
  std::string out = kCsvHeader;
  for (const auto& c : report.conditions) out += csv_row(c.condition, c.aggregate ? c.aggregate->macro : PixelScores{});
  return out;
}

json ablation_json(const AblationReport& report) {
  json conditions = json::array();
  for (const auto& c : report.conditions) {
    json frames = json::array();
    for (const auto& f : c.frames) frames.push_back(outcome_json(f));
    conditions.push_back(json{{"condition", c.condition},
                              {"aggregate", c.aggregate ? to_json(*c.aggregate) : json(nullptr)},
                              {"failed", c.failed},
                              {"frames", frames}});
  }
  json excluded = json::array();
  for (const auto& e : report.excluded) excluded.push_back(json{{"id", e.frame_id}, {"reason", e.reason}});
  return json{{"conditions", conditions},
              {"evaluated", report.evaluated},
              {"excluded", excluded},
              {"config", report.config},
              {"corpus_seed", report.corpus_seed ? json(*report.corpus_seed) : json(nullptr)},
              {"units", json{{"scores", "fraction"}}}};
}

AblationReport ablation_from_json(const json& j) {
  AblationReport r;
  for (const auto& c : j.at("conditions")) {
    ConditionReport cr;
    cr.condition = c.at("condition").get<std::string>();
    if (!c.at("aggregate").is_null()) cr.aggregate = aggregate_from_json(c.at("aggregate"));
    cr.failed = c.at("failed").get<int>();
    for (const auto& f : c.at("frames")) cr.frames.push_back(outcome_from_json(f));
    r.conditions.push_back(std::move(cr));
  }
  r.evaluated = j.at("evaluated").get<std::vector<std::string>>();
  for (const auto& e : j.at("excluded")) {
    r.excluded.push_back({e.at("id").get<std::string>(), e.at("reason").get<std::string>()});
  }
  r.config = j.at("config");
  if (!j.at("corpus_seed").is_null()) r.corpus_seed = j.at("corpus_seed").get<std::int64_t>();
  return r;
}

std::string run_csv(const RunReport& report) {
  std::string out = "average,IOU,Precision,Recall,Dice\n";
  const PixelScores none{};
  out += csv_row("macro", report.aggregate ? report.aggregate->macro : none);
  out += csv_row("micro", report.aggregate ? report.aggregate->micro : none);
  return out;
}

json run_json(const RunReport& report, const json& config) {
  json frames = json::array();
  for (const auto& f : report.frames) {
    json j{{"id", f.frame_id}, {"ok", f.ok}};
    if (f.ok) {
      j["boxes"] = boxes_json(f.boxes);
      j["confusion"] = to_json(f.confusion);
      j["scores"] = to_json(f.scores);
      j["mask_digest"] = mask_digest(f.predicted);
    } else {
      j["failed_stage"] = f.failed_stage;
      j["error"] = f.error;
    }
    frames.push_back(std::move(j));
  }
  return json{{"frames", frames},
              {"aggregate", report.aggregate ? to_json(*report.aggregate) : json(nullptr)},
              {"failed", report.failed},
              {"config", config}};
}

json run_timings_json(const RunReport& report) {
  json stats = json::object();
  for (const auto& [k, v] : report.timings) stats[k] = json{{"mean", v.mean_ms}, {"median", v.median_ms}};
  json frames = json::array();
  for (const auto& f : report.frames) {
    frames.push_back(json{{"id", f.frame_id},
                          {"detect", f.timings.detect_ms},
                          {"mask", f.timings.mask_ms},
                          {"inpaint", f.timings.inpaint_ms},
                          {"segment", f.timings.segment_ms},
                          {"total", f.timings.total_ms}});
  }
  return json{{"unit", "ms"}, {"per_stage", stats}, {"frames", frames}};
}

std::string eval_csv(const EvalReport& report) {
  std::string out = "average,IOU,Precision,Recall,Dice\n";
  out += csv_row("macro", report.aggregate.macro);
  out += csv_row("micro", report.aggregate.micro);
  return out;
}

json eval_json(const EvalReport& report) {
  json frames = json::array();
  for (const auto& f : report.frames) {
    frames.push_back(json{{"id", f.frame_id}, {"confusion", to_json(f.confusion)}, {"scores", to_json(f.scores)}});
  }
  return json{{"frames", frames}, {"aggregate", to_json(report.aggregate)}, {"unmatched", report.unmatched}};
}

std::string scores_table(const std::vector<std::pair<std::string, PixelScores>>& rows) {
  std::size_t width = 9;
  for (const auto& [name, s] : rows) width = std::max(width, name.size());
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %9s  %8s  %8s\n", static_cast<int>(width), "", "IOU", "Precision", "Recall",
                "Dice");
  out += buf;
  for (const auto& [name, s] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %8.4f  %9.4f  %8.4f  %8.4f\n", static_cast<int>(width), name.c_str(), s.iou,
                  s.precision, s.recall, s.dice);
    out += buf;
  }
  return out;
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void emit_report(const AblationReport& report, const std::filesystem::path& path, ReportFormat format) {
  if (format == ReportFormat::csv) {
    write_text(ablation_csv(report), path);
  } else {
    write_text(ablation_json(report).dump(2) + "\n", path);
  }
}

}  // namespace occlane
