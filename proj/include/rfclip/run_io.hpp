// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfclip/metrics.hpp"
#include "rfclip/trainer.hpp"

namespace rfclip {

nlohmann::ordered_json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);

nlohmann::ordered_json curve_to_json(const EpochCurve& c);
EpochCurve curve_from_json(const nlohmann::json& j);

nlohmann::ordered_json audit_to_json(const AuditRecord& r);

/// One table row: a model label and its report for the table's attribute.
struct TableRow {
  std::string model;
  MetricsReport report;
};

/// Markdown table in the layout
///   Model | DPD ↓ | DEOdds ↓ | AUC ↑ | ES-AUC ↑ | group-wise AUC ↑ ...
/// with one group-wise column per group code seen in any row and all
/// values ×100 to two decimals. Missing group values render as "-".
std::string render_table(const std::string& attribute, const std::vector<TableRow>& rows);

/// "CLIP", "Fair", "Robust" or "Robust+Fair" depending on the ablation flags.
std::string model_label(const TrainConfig& cfg);

/// Writes the run directory:
///   config.json, meta.json, curves.jsonl, dbpm_audit.jsonl,
///   checkpoints/epoch_E.json, best.json, reports/attr_NAME.json, report.md
/// meta.json holds the only timestamp.
void write_run_dir(const std::filesystem::path& dir, const TrainConfig& cfg,
                   const RunArtifacts& run,
                   const std::map<std::string, AttributeEvaluation>& evaluations);

/// Rewrites reports/attr_NAME.json for every evaluation given.
void write_reports(const std::filesystem::path& dir,
                   const std::map<std::string, AttributeEvaluation>& evaluations);

/// Loads every reports/attr_*.json of a run directory, keyed by attribute.
std::map<std::string, MetricsReport> read_reports(const std::filesystem::path& dir);

/// Renders report.md for a run directory from its config.json and reports.
std::string render_run_report(const std::filesystem::path& dir);

std::vector<EpochCurve> read_curves(const std::filesystem::path& path);
std::vector<nlohmann::json> read_jsonl_records(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace rfclip
