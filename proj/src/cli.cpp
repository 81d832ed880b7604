// SPDX-License-Identifier: Apache-2.0
#include "rfclip/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "rfclip/dataset.hpp"
#include "rfclip/error.hpp"
#include "rfclip/run_io.hpp"
#include "rfclip/trainer.hpp"

namespace rfclip::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("bad number '" + s + "' in " + what);
  }
}

std::vector<double> to_doubles(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(to_double(part, what));
  return out;
}

std::pair<std::string, std::string> key_value(const std::string& s, const std::string& what) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw UsageError(what + " expects name=..., got '" + s + "'");
  }
  return {s.substr(0, eq), s.substr(eq + 1)};
}

// Exit code for a library error: input and configuration problems are usage
// errors, everything else is a runtime failure.
int exit_code_for(Errc code) {
  switch (code) {
    case Errc::kConfig:
    case Errc::kCorruptionInfeasible:
    case Errc::kParse:
    case Errc::kSchema:
    case Errc::kUniqueness:
    case Errc::kInfeasiblePlan:
    case Errc::kVersion:
    case Errc::kIntegrity:
    case Errc::kIo:
      return kExitUsage;
    default:
      return kExitRuntime;
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_meta(const fs::path& dir, const std::string& command) {
  nlohmann::ordered_json meta;
  meta["command"] = command;
  meta["created_utc"] = utc_timestamp();
  write_text_file(dir / "meta.json", meta.dump(2) + "\n");
}

// ---- gen-data -------------------------------------------------------------

struct GenDataFlags {
  std::size_t n = 10000;
  std::string dims = "16,16";
  std::size_t latent = 8;
  std::vector<std::string> groups;
  std::vector<std::string> bias;
  std::vector<std::string> label_shift;
  double image_noise = 0.3;
  double text_noise = 0.3;
  double label_signal = 2.0;
  double corrupt_rate = 0.0;
  std::string corrupt_mode = "swap";
  double corrupt_noise = 3.0;
  std::uint64_t seed = 0;
  std::string splits;
  std::string out;
};

SynthConfig synth_config(const GenDataFlags& f) {
  SynthConfig cfg;
  cfg.n_samples = f.n;
  cfg.latent_dim = f.latent;
  const auto dims = split(f.dims, ',');
  if (dims.size() != 2) throw UsageError("--dims expects M,N");
  cfg.dim_image = static_cast<std::size_t>(to_double(dims[0], "--dims"));
  cfg.dim_text = static_cast<std::size_t>(to_double(dims[1], "--dims"));
  cfg.image_noise = f.image_noise;
  cfg.text_noise = f.text_noise;
  cfg.label_signal = f.label_signal;
  cfg.corruption_rate = f.corrupt_rate;
  cfg.corruption_mode = parse_corruption_mode(f.corrupt_mode);
  cfg.corruption_noise = f.corrupt_noise;
  cfg.seed = f.seed;

  std::vector<std::string> groups = f.groups;
  if (groups.empty()) groups.push_back("race=3:0.0819,0.1491,0.769");
  for (const auto& g : groups) {
    const auto [name, rest] = key_value(g, "--groups");
    const auto colon = rest.find(':');
    if (colon == std::string::npos) throw UsageError("--groups expects name=card:p0,p1,...");
    GroupSpec spec;
    spec.name = name;
    spec.cardinality = static_cast<int>(to_double(rest.substr(0, colon), "--groups"));
    spec.proportions = to_doubles(rest.substr(colon + 1), "--groups");
    cfg.attributes.push_back(std::move(spec));
  }
  auto find_attr = [&](const std::string& name, const std::string& flag) -> GroupSpec& {
    for (auto& a : cfg.attributes)
      if (a.name == name) return a;
    throw UsageError(flag + " names unknown attribute '" + name + "'");
  };
  for (const auto& b : f.bias) {
    const auto [name, values] = key_value(b, "--bias");
    find_attr(name, "--bias").noise_scale = to_doubles(values, "--bias");
  }
  for (const auto& b : f.label_shift) {
    const auto [name, values] = key_value(b, "--label-shift");
    find_attr(name, "--label-shift").label_shift = to_doubles(values, "--label-shift");
  }
  return cfg;
}

void print_summary(const std::string& label, const SampleSet& set, std::ostream& out) {
  out << label << ": " << set.size() << " samples\n";
  for (const auto& [name, card] : set.header.attributes) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(card), 0);
    for (int c : set.codes(name)) ++counts[static_cast<std::size_t>(c)];
    out << "  " << name << ":";
    for (int c = 0; c < card; ++c) out << ' ' << c << '=' << counts[static_cast<std::size_t>(c)];
    out << '\n';
  }
  std::size_t noisy = 0, faulty = 0, positives = 0;
  for (const auto& s : set.samples) {
    noisy += s.corrupted == Corruption::kNoisy ? 1 : 0;
    faulty += s.corrupted == Corruption::kFaulty ? 1 : 0;
    positives += s.label == 1 ? 1 : 0;
  }
  out << "  labels: positive=" << positives << " negative=" << set.size() - positives << '\n';
  out << "  corrupted: " << noisy + faulty << " (noisy=" << noisy << ", faulty=" << faulty
      << ")\n";
}

int cmd_gen_data(const GenDataFlags& f, std::ostream& out) {
  SynthConfig cfg = synth_config(f);
  if (const fs::path parent = fs::path(f.out).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  if (f.splits.empty()) {
    const SampleSet set = generate_synthetic(cfg);
    write_jsonl(set, f.out);
    print_summary(f.out, set, out);
    return kExitOk;
  }

  std::vector<std::size_t> sizes;
  for (double v : to_doubles(f.splits, "--splits")) {
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw UsageError("--splits expects nonnegative integers");
    }
    sizes.push_back(static_cast<std::size_t>(v));
  }
  if (sizes.size() != 3) throw UsageError("--splits expects TRAIN,VAL,TEST");
  const double rate = cfg.corruption_rate;
  cfg.corruption_rate = 0.0;
  cfg.validate();
  auto parts = split_sampleset(generate_synthetic(cfg), sizes);
  // Only the training split is corrupted.
  if (rate > 0.0) {
    parts[0] = inject_corruption(parts[0], rate, cfg.corruption_mode,
                                 Rng(cfg.seed).fork(3).next_u64(), cfg.corruption_noise);
  }
  const fs::path base(f.out);
  const std::string stem = base.stem().string();
  const char* names[] = {"train", "val", "test"};
  for (std::size_t i = 0; i < 3; ++i) {
    const fs::path p = base.parent_path() / (stem + "_" + names[i] + ".jsonl");
    write_jsonl(parts[i], p);
    print_summary(p.string(), parts[i], out);
  }
  return kExitOk;
}

// ---- train / sweep --------------------------------------------------------

struct TrainFlags {
  std::string config;
  std::string train, val, test;
  std::optional<double> lambda, eps, alpha, beta, lr, weight_decay, beta1, beta2, threshold;
  std::optional<int> epochs;
  std::optional<std::size_t> batch_size, embed_dim;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> attr, decision, sinkhorn_grad;
  bool no_dbpm = false;
  bool no_fairness = false;
  std::string eval_attrs;
  std::string resume;
  std::string out;
  bool parallel = false;
};

TrainConfig resolve_config(const TrainFlags& f, const SampleSet& train_set) {
  TrainConfig cfg;
  if (!f.config.empty()) cfg = config_from_json(read_json_file(f.config));
  if (f.lambda) cfg.lambda = *f.lambda;
  if (f.eps) cfg.eps = *f.eps;
  if (f.alpha) cfg.alpha = *f.alpha;
  if (f.beta) cfg.beta = *f.beta;
  if (f.lr) cfg.adam.lr = *f.lr;
  if (f.beta1) cfg.adam.beta1 = *f.beta1;
  if (f.beta2) cfg.adam.beta2 = *f.beta2;
  if (f.weight_decay) cfg.adam.weight_decay = *f.weight_decay;
  if (f.threshold) cfg.threshold = *f.threshold;
  if (f.epochs) cfg.epochs = *f.epochs;
  if (f.batch_size) cfg.batch_size = *f.batch_size;
  if (f.embed_dim) cfg.embed_dim = *f.embed_dim;
  if (f.seed) {
    cfg.init_seed = *f.seed;
    cfg.batch_seed = *f.seed + 1;
  }
  if (f.attr) cfg.fairness_attribute = *f.attr;
  if (f.decision) cfg.dbpm_decision = parse_decision_variable(*f.decision);
  if (f.sinkhorn_grad) cfg.sinkhorn_grad = parse_fair_grad_mode(*f.sinkhorn_grad);
  if (f.no_dbpm) cfg.dbpm = false;
  if (f.no_fairness) cfg.fairness = false;
  if (cfg.fairness_attribute.empty() && train_set.header.attributes.size() == 1) {
    cfg.fairness_attribute = train_set.header.attributes.begin()->first;
  }
  if (cfg.fairness && cfg.fairness_attribute.empty()) {
    throw Error(Errc::kConfig, "the dataset declares several attributes; choose one with --attr");
  }
  cfg.validate();
  return cfg;
}

std::vector<std::string> eval_attributes(const std::string& flag, const SampleSet& test_set) {
  if (!flag.empty()) return split(flag, ',');
  std::vector<std::string> out;
  for (const auto& [name, card] : test_set.header.attributes) out.push_back(name);
  return out;
}

struct Datasets {
  SampleSet train, val;
  std::optional<SampleSet> test;
  const SampleSet& eval_set() const { return test ? *test : val; }
};

Datasets load_datasets(const TrainFlags& f) {
  Datasets d{load_jsonl(f.train), load_jsonl(f.val), std::nullopt};
  if (!f.test.empty()) d.test = load_jsonl(f.test);
  return d;
}

// Trains, evaluates the selected checkpoint and writes the run directory.
// Returns false when some attribute could not be evaluated.
bool train_and_write(const TrainConfig& cfg, const Datasets& data, const TrainFlags& f,
                     const fs::path& dir, const std::optional<Checkpoint>& resume,
                     std::ostream& log) {
  const RunArtifacts run = train(cfg, data.train, data.val, resume);
  const EncoderParams& chosen = run.best ? run.best->params : run.final_params;
  const Prototypes protos = fit_prototypes(chosen, data.train);
  const auto evals =
      evaluate(chosen, data.eval_set(), eval_attributes(f.eval_attrs, data.eval_set()), protos,
               cfg.threshold);
  write_run_dir(dir, cfg, run, evals);
  write_meta(dir, "train");
  bool ok = true;
  for (const auto& [name, ev] : evals) {
    if (!ev.report) {
      log << "attribute " << name << ": " << ev.error << '\n';
      ok = false;
    }
  }
  return ok;
}

int cmd_train(const TrainFlags& f, std::ostream& out, std::ostream& err) {
  const Datasets data = load_datasets(f);
  const TrainConfig cfg = resolve_config(f, data.train);
  std::optional<Checkpoint> resume;
  if (!f.resume.empty()) resume = checkpoint_load(f.resume);
  const bool ok = train_and_write(cfg, data, f, f.out, resume, err);
  out << "run written to " << f.out << '\n';
  return ok ? kExitOk : kExitRuntime;
}

struct Cell {
  std::string name;
  bool dbpm;
  bool fairness;
};

int cmd_sweep(const TrainFlags& f, std::ostream& out, std::ostream& err) {
  const Datasets data = load_datasets(f);
  const TrainConfig base = resolve_config(f, data.train);
  const std::vector<Cell> cells = {{"plain", false, false},
                                   {"fair", false, true},
                                   {"robust", true, false},
                                   {"robust_fair", true, true}};
  std::vector<std::string> failures(cells.size());
  std::vector<std::ostringstream> logs(cells.size());
  auto run_cell = [&](std::size_t i) {
    try {
      TrainConfig cfg = base;
      cfg.dbpm = cells[i].dbpm;
      cfg.fairness = cells[i].fairness;
      cfg.validate();
      if (!train_and_write(cfg, data, f, fs::path(f.out) / cells[i].name, std::nullopt,
                           logs[i])) {
        failures[i] = "evaluation incomplete";
      }
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  };
  if (f.parallel) {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < cells.size(); ++i) threads.emplace_back(run_cell, i);
    for (auto& t : threads) t.join();
  } else {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  }

  std::map<std::string, std::vector<TableRow>> tables;
  bool ok = true;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    err << logs[i].str();
    if (!failures[i].empty()) {
      err << "cell " << cells[i].name << " failed: " << failures[i] << '\n';
      ok = false;
    }
    const fs::path dir = fs::path(f.out) / cells[i].name;
    if (!fs::exists(dir / "config.json")) continue;
    const TrainConfig cfg = config_from_json(read_json_file(dir / "config.json"));
    for (const auto& [attr, report] : read_reports(dir)) {
      tables[attr].push_back({model_label(cfg), report});
    }
  }
  std::ostringstream md;
  md << "# Ablation comparison\n";
  for (const auto& [attr, rows] : tables) md << "\n## " << attr << "\n\n" << render_table(attr, rows);
  write_text_file(fs::path(f.out) / "comparison.md", md.str());
  out << md.str();
  return ok ? kExitOk : kExitRuntime;
}

// ---- eval / report --------------------------------------------------------

struct EvalFlags {
  std::string run;
  std::string checkpoint;
  std::string train, test;
  std::string attrs;
  std::optional<double> threshold;
};

int cmd_eval(const EvalFlags& f, std::ostream& out, std::ostream& err) {
  const fs::path dir(f.run);
  const fs::path ck_path = f.checkpoint.empty() ? dir / "best.json" : fs::path(f.checkpoint);
  if (!fs::exists(ck_path)) throw Error(Errc::kIo, "missing checkpoint '" + ck_path.string() + "'");
  if (!fs::exists(dir / "config.json")) {
    throw Error(Errc::kIo, "missing '" + (dir / "config.json").string() + "'");
  }
  const TrainConfig cfg = config_from_json(read_json_file(dir / "config.json"));
  const Checkpoint ck = checkpoint_load(ck_path);
  const SampleSet train_set = load_jsonl(f.train);
  const SampleSet test_set = load_jsonl(f.test);
  const double threshold = f.threshold.value_or(cfg.threshold);
  const auto evals = evaluate(ck.params, test_set, eval_attributes(f.attrs, test_set),
                              fit_prototypes(ck.params, train_set), threshold);
  write_reports(dir, evals);
  bool ok = true;
  for (const auto& [name, ev] : evals) {
    if (ev.report) {
      out << name << ": auc=" << ev.report->auc << " es_auc=" << ev.report->es_auc
          << " dpd=" << ev.report->dpd << " deodds=" << ev.report->deodds << '\n';
    } else {
      err << "attribute " << name << ": " << ev.error << '\n';
      ok = false;
    }
  }
  if (!read_reports(dir).empty()) write_text_file(dir / "report.md", render_run_report(dir));
  return ok ? kExitOk : kExitRuntime;
}

struct ReportFlags {
  std::vector<std::string> runs;
  std::string out;
};

int cmd_report(const ReportFlags& f, std::ostream& out) {
  for (const auto& run : f.runs) {
    if (!fs::exists(fs::path(run) / "config.json")) {
      throw Error(Errc::kIo, "missing '" + (fs::path(run) / "config.json").string() + "'");
    }
  }
  std::string text;
  if (f.runs.size() == 1) {
    text = render_run_report(f.runs.front());
    write_text_file(fs::path(f.runs.front()) / "report.md", text);
  } else {
    std::map<std::string, std::vector<TableRow>> tables;
    for (const auto& run : f.runs) {
      const TrainConfig cfg = config_from_json(read_json_file(fs::path(run) / "config.json"));
      const auto reports = read_reports(run);
      if (reports.empty()) throw Error(Errc::kIo, "no reports under '" + run + "'");
      for (const auto& [attr, r] : reports) tables[attr].push_back({model_label(cfg), r});
    }
    std::ostringstream md;
    md << "# Evaluation report\n";
    for (const auto& [attr, rows] : tables) md << "\n## " << attr << "\n\n" << render_table(attr, rows);
    text = md.str();
  }
  if (!f.out.empty()) write_text_file(f.out, text);
  out << text;
  return kExitOk;
}

std::string with_default(const std::string& what, double v) {
  std::ostringstream s;
  s << what << " (default " << v << ")";
  return s.str();
}

void add_train_options(CLI::App* sub, TrainFlags& f) {
  const TrainConfig d;
  sub->add_option("--config", f.config, "JSON config file; flags override its keys")
      ->check(CLI::ExistingFile);
  sub->add_option("--train", f.train, "training split (JSONL)")->required();
  sub->add_option("--val", f.val, "validation split (JSONL)")->required();
  sub->add_option("--test", f.test, "evaluation split (JSONL); defaults to --val");
  sub->add_option("--epochs", f.epochs, with_default("number of epochs", d.epochs));
  sub->add_option("--batch-size", f.batch_size,
                  with_default("batch size", static_cast<double>(d.batch_size)));
  sub->add_option("--lr", f.lr, with_default("Adam learning rate", d.adam.lr));
  sub->add_option("--beta1", f.beta1, with_default("Adam beta1", d.adam.beta1));
  sub->add_option("--beta2", f.beta2, with_default("Adam beta2", d.adam.beta2));
  sub->add_option("--weight-decay", f.weight_decay,
                  with_default("decoupled weight decay", d.adam.weight_decay));
  sub->add_option("--lambda", f.lambda, with_default("fairness weight", d.lambda));
  sub->add_option("--eps", f.eps, with_default("Sinkhorn blur", d.eps));
  sub->add_option("--alpha", f.alpha, with_default("DBPM lower band multiplier", d.alpha));
  sub->add_option("--beta", f.beta, with_default("DBPM upper band multiplier", d.beta));
  sub->add_option("--embed-dim", f.embed_dim,
                  with_default("embedding dimension", static_cast<double>(d.embed_dim)));
  sub->add_option("--threshold", f.threshold, with_default("decision threshold", d.threshold));
  sub->add_option("--seed", f.seed, "seed for initialization and batching (default 0)");
  sub->add_option("--attr", f.attr, "protected attribute for the fairness term");
  sub->add_option("--decision", f.decision,
                  "DBPM decision variable: current_loss | historical_mean (default current_loss)");
  sub->add_option("--sinkhorn-grad", f.sinkhorn_grad,
                  "fairness gradient: envelope | finite-difference (default envelope)");
  sub->add_flag("--no-dbpm", f.no_dbpm, "disable bad pair mining");
  sub->add_flag("--no-fairness", f.no_fairness, "disable the Sinkhorn fairness term");
  sub->add_option("--eval-attrs", f.eval_attrs,
                  "comma-separated attributes to evaluate (default: all)");
  sub->add_option("--out", f.out, "run directory")->required();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust and fair contrastive training on paired embeddings", "rfclip"};
  app.require_subcommand(1);

  GenDataFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic paired dataset");
  gen_cmd->add_option("--n", gen.n, "number of samples")->capture_default_str();
  gen_cmd->add_option("--dims", gen.dims, "image,text feature dimensions")->capture_default_str();
  gen_cmd->add_option("--latent", gen.latent, "latent dimension")->capture_default_str();
  gen_cmd->add_option("--groups", gen.groups,
                      "attribute spec name=card:p0,p1,... (repeatable; default "
                      "race=3:0.0819,0.1491,0.769)");
  gen_cmd->add_option("--bias", gen.bias, "per-group feature-noise scales name=s0,s1,...");
  gen_cmd->add_option("--label-shift", gen.label_shift,
                      "per-group label logit shifts name=l0,l1,...");
  gen_cmd->add_option("--image-noise", gen.image_noise, "image noise std")->capture_default_str();
  gen_cmd->add_option("--text-noise", gen.text_noise, "text noise std")->capture_default_str();
  gen_cmd->add_option("--label-signal", gen.label_signal, "label logit std")
      ->capture_default_str();
  gen_cmd->add_option("--corrupt-rate", gen.corrupt_rate, "fraction of corrupted samples")
      ->capture_default_str();
  gen_cmd->add_option("--corrupt-mode", gen.corrupt_mode, "swap | noise")->capture_default_str();
  gen_cmd->add_option("--corrupt-noise", gen.corrupt_noise, "text noise std in noise mode")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
  gen_cmd->add_option("--splits", gen.splits,
                      "TRAIN,VAL,TEST sizes, e.g. 7000,1000,2000; writes OUT_{train,val,test}.jsonl");
  gen_cmd->add_option("--out", gen.out, "output path")->required();

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train one configuration");
  add_train_options(train_cmd, train_flags);
  train_cmd->add_option("--resume", train_flags.resume, "checkpoint to continue from")
      ->check(CLI::ExistingFile);

  TrainFlags sweep_flags;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "run the {dbpm on/off} x {fairness on/off} ablation grid");
  add_train_options(sweep_cmd, sweep_flags);
  sweep_cmd->add_flag("--parallel", sweep_flags.parallel, "run the four cells concurrently");

  EvalFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a run's checkpoint on a dataset");
  eval_cmd->add_option("--run", eval_flags.run, "run directory")->required();
  eval_cmd->add_option("--checkpoint", eval_flags.checkpoint, "checkpoint (default RUN/best.json)");
  eval_cmd->add_option("--train", eval_flags.train, "split used to fit class prototypes")
      ->required();
  eval_cmd->add_option("--test", eval_flags.test, "evaluation split")->required();
  eval_cmd->add_option("--attrs", eval_flags.attrs, "comma-separated attributes (default: all)");
  eval_cmd->add_option("--threshold", eval_flags.threshold, "decision threshold (default 0.5)");

  ReportFlags report_flags;
  auto* report_cmd = app.add_subcommand("report", "render the metrics table of one or more runs");
  report_cmd->add_option("--run", report_flags.runs, "run directory (repeatable)")->required();
  report_cmd->add_option("--out", report_flags.out, "also write the table to this file");

  std::vector<std::string> argv_store{"rfclip"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, out);
    if (*train_cmd) return cmd_train(train_flags, out, err);
    if (*sweep_cmd) return cmd_sweep(sweep_flags, out, err);
    if (*eval_cmd) return cmd_eval(eval_flags, out, err);
    if (*report_cmd) return cmd_report(report_flags, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error [" << errc_name(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace rfclip::cli
