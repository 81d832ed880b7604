// SPDX-License-Identifier: Apache-2.0
#include "rfclip/run_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "rfclip/error.hpp"

namespace rfclip {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

ordered_json report_to_json(const MetricsReport& r) {
  ordered_json j;
  j["attribute"] = r.attribute;
  j["auc"] = r.auc;
  j["es_auc"] = r.es_auc;
  j["dpd"] = r.dpd;
  j["deodds"] = r.deodds;
  ordered_json groups = ordered_json::object();
  for (const auto& [code, value] : r.group_auc) groups[std::to_string(code)] = value;
  j["group_auc"] = std::move(groups);
  j["threshold"] = r.threshold;
  j["omitted_groups"] = r.omitted_groups;
  return j;
}

MetricsReport report_from_json(const json& j) {
  try {
    MetricsReport r;
    r.attribute = j.at("attribute").get<std::string>();
    r.auc = j.at("auc").get<double>();
    r.es_auc = j.at("es_auc").get<double>();
    r.dpd = j.at("dpd").get<double>();
    r.deodds = j.at("deodds").get<double>();
    for (const auto& [code, value] : j.at("group_auc").items()) {
      r.group_auc[std::stoi(code)] = value.get<double>();
    }
    r.threshold = j.at("threshold").get<double>();
    r.omitted_groups = j.at("omitted_groups").get<std::vector<int>>();
    return r;
  } catch (const std::exception& e) {
    throw Error(Errc::kParse, std::string("malformed report: ") + e.what());
  }
}

ordered_json curve_to_json(const EpochCurve& c) {
  ordered_json j;
  j["epoch"] = c.epoch;
  j["l1"] = c.l1_mean;
  j["l2"] = c.l2_mean;
  j["fairness"] = c.fair_mean;
  j["l3"] = c.l3_mean;
  j["val_auc"] = c.val_auc ? json(*c.val_auc) : json(nullptr);
  return j;
}

EpochCurve curve_from_json(const json& j) {
  try {
    EpochCurve c;
    c.epoch = j.at("epoch").get<int>();
    c.l1_mean = j.at("l1").get<double>();
    c.l2_mean = j.at("l2").get<double>();
    c.fair_mean = j.at("fairness").get<double>();
    c.l3_mean = j.at("l3").get<double>();
    if (!j.at("val_auc").is_null()) c.val_auc = j.at("val_auc").get<double>();
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::kParse, std::string("malformed curve record: ") + e.what());
  }
}

ordered_json audit_to_json(const AuditRecord& r) {
  ordered_json j;
  j["epoch"] = r.epoch;
  j["batch_id"] = r.batch_id;
  j["l1"] = r.l1;
  j["s"] = r.s ? json(*r.s) : json(nullptr);
  if (r.stats) {
    j["mu"] = r.stats->mu;
    j["sigma"] = r.stats->sigma;
    j["a"] = r.stats->a;
    j["b"] = r.stats->b;
  } else {
    for (const char* key : {"mu", "sigma", "a", "b"}) j[key] = nullptr;
  }
  j["weight"] = r.weight;
  j["class"] = std::string(pair_class_name(r.classification));
  return j;
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

void write_jsonl_file(const fs::path& path, const std::vector<ordered_json>& records) {
  std::ostringstream out;
  for (const auto& r : records) out << r.dump() << '\n';
  write_text_file(path, out.str());
}

}  // namespace

std::string render_table(const std::string& attribute, const std::vector<TableRow>& rows) {
  std::set<int> codes;
  for (const auto& row : rows)
    for (const auto& [code, v] : row.report.group_auc) codes.insert(code);

  std::ostringstream out;
  out << "| Model | DPD ↓ | DEOdds ↓ | AUC ↑ | ES-AUC ↑ |";
  for (int c : codes) out << ' ' << attribute << '=' << c << " AUC ↑ |";
  out << "\n|---|---:|---:|---:|---:|";
  for (std::size_t i = 0; i < codes.size(); ++i) out << "---:|";
  out << '\n';
  for (const auto& row : rows) {
    const MetricsReport& r = row.report;
    out << "| " << row.model << " | " << pct(r.dpd) << " | " << pct(r.deodds) << " | "
        << pct(r.auc) << " | " << pct(r.es_auc) << " |";
    for (int c : codes) {
      auto it = r.group_auc.find(c);
      out << ' ' << (it == r.group_auc.end() ? std::string("-") : pct(it->second)) << " |";
    }
    out << '\n';
  }
  return out.str();
}

std::string model_label(const TrainConfig& cfg) {
  if (cfg.dbpm && cfg.fairness) return "Robust+Fair";
  if (cfg.dbpm) return "Robust";
  if (cfg.fairness) return "Fair";
  return "CLIP";
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::kParse, "'" + path.string() + "': " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error(Errc::kIo, "write to '" + path.string() + "' failed");
}

std::vector<json> read_jsonl_records(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open '" + path.string() + "'");
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw Error(Errc::kParse, path.string() + ":" + std::to_string(lineno) + ": " + e.what(),
                  lineno);
    }
  }
  return out;
}

std::vector<EpochCurve> read_curves(const fs::path& path) {
  std::vector<EpochCurve> out;
  for (const auto& j : read_jsonl_records(path)) out.push_back(curve_from_json(j));
  return out;
}

void write_reports(const fs::path& dir,
                   const std::map<std::string, AttributeEvaluation>& evaluations) {
  for (const auto& [name, ev] : evaluations) {
    if (!ev.report) continue;
    write_text_file(dir / "reports" / ("attr_" + name + ".json"),
                    report_to_json(*ev.report).dump(2) + "\n");
  }
}

std::map<std::string, MetricsReport> read_reports(const fs::path& dir) {
  std::map<std::string, MetricsReport> out;
  const fs::path reports = dir / "reports";
  if (!fs::is_directory(reports)) return out;
  for (const auto& entry : fs::directory_iterator(reports)) {
    const std::string file = entry.path().filename().string();
    if (file.rfind("attr_", 0) != 0 || entry.path().extension() != ".json") continue;
    MetricsReport r = report_from_json(read_json_file(entry.path()));
    out[r.attribute] = std::move(r);
  }
  return out;
}

std::string render_run_report(const fs::path& dir) {
  const TrainConfig cfg = config_from_json(read_json_file(dir / "config.json"));
  const auto reports = read_reports(dir);
  if (reports.empty()) {
    throw Error(Errc::kIo, "no reports under '" + (dir / "reports").string() + "'");
  }
  std::ostringstream out;
  out << "# Evaluation report\n";
  for (const auto& [name, r] : reports) {
    out << "\n## " << name << "\n\n";
    out << render_table(name, {{model_label(cfg), r}});
    if (!r.omitted_groups.empty()) {
      out << "\nOmitted single-class groups:";
      for (int g : r.omitted_groups) out << ' ' << g;
      out << '\n';
    }
  }
  out << "\nValues ×100. Predictions use threshold " << cfg.threshold
      << "; DPD is the max-min selection-rate gap and DEOdds the larger of the TPR and FPR gaps.\n";
  return out.str();
}

void write_run_dir(const fs::path& dir, const TrainConfig& cfg, const RunArtifacts& run,
                   const std::map<std::string, AttributeEvaluation>& evaluations) {
  fs::create_directories(dir / "checkpoints");
  write_text_file(dir / "config.json", config_to_json(cfg).dump(2) + "\n");

  std::vector<ordered_json> curves;
  for (const auto& c : run.curves) curves.push_back(curve_to_json(c));
  write_jsonl_file(dir / "curves.jsonl", curves);

  std::vector<ordered_json> audit;
  for (const auto& r : run.audit) audit.push_back(audit_to_json(r));
  write_jsonl_file(dir / "dbpm_audit.jsonl", audit);

  for (const auto& ck : run.checkpoints) {
    checkpoint_save(ck, dir / "checkpoints" / ("epoch_" + std::to_string(ck.epoch) + ".json"));
  }
  if (run.best) checkpoint_save(*run.best, dir / "best.json");

  write_reports(dir, evaluations);
  if (!read_reports(dir).empty()) write_text_file(dir / "report.md", render_run_report(dir));
}

}  // namespace rfclip
