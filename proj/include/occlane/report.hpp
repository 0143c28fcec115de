#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "occlane/metrics.hpp"
#include "occlane/pipeline.hpp"

namespace occlane {

enum class ReportFormat { csv, json };

nlohmann::json to_json(const PixelConfusion& c);
nlohmann::json to_json(const PixelScores& s);
nlohmann::json to_json(const AggregateScores& a);
PixelConfusion confusion_from_json(const nlohmann::json& j);
PixelScores scores_from_json(const nlohmann::json& j);
AggregateScores aggregate_from_json(const nlohmann::json& j);

/// One row per condition: condition,IOU,Precision,Recall,Dice (macro means, 6 decimals).
std::string ablation_csv(const AblationReport& report);
/// Aggregates (macro and micro), per-frame outcomes, exclusions, config and corpus seed.
nlohmann::json ablation_json(const AblationReport& report);
/// Inverse of ablation_json; kept rasters are not serialized and come back empty.
AblationReport ablation_from_json(const nlohmann::json& j);

/// Rows "macro" and "micro" with the same columns as the ablation CSV.
std::string run_csv(const RunReport& report);
/// Deterministic content only; wall-clock timings live in run_timings_json.
nlohmann::json run_json(const RunReport& report, const nlohmann::json& config);
nlohmann::json run_timings_json(const RunReport& report);

struct EvalFrame {
  std::string frame_id;
  PixelConfusion confusion;
  PixelScores scores;
};

struct EvalReport {
  std::vector<EvalFrame> frames;  ///< sorted by id
  AggregateScores aggregate;
  std::vector<std::string> unmatched;  ///< ids present on only one side
};

std::string eval_csv(const EvalReport& report);
nlohmann::json eval_json(const EvalReport& report);

/// Fixed-width text table for terminals.
std::string scores_table(const std::vector<std::pair<std::string, PixelScores>>& rows);

void emit_report(const AblationReport& report, const std::filesystem::path& path, ReportFormat format);

/// Writes text with a trailing newline discipline identical across runs.
void write_text(const std::string& text, const std::filesystem::path& path);

}  // namespace occlane
