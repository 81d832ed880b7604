// SPDX-License-Identifier: Apache-2.0
#include "rfclip/trainer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "rfclip/contrastive.hpp"
#include "rfclip/error.hpp"

namespace rfclip {

using nlohmann::json;
using nlohmann::ordered_json;

void TrainConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(Errc::kConfig, why); };
  if (epochs < 1) fail("epochs must be at least 1");
  if (batch_size < 2) fail("batch_size must be at least 2");
  if (!(adam.lr >= 0.0)) fail("lr must be nonnegative");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) fail("beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) fail("beta2 must lie in [0, 1)");
  if (!(adam.eps > 0.0)) fail("adam eps must be positive");
  if (!(adam.weight_decay >= 0.0)) fail("weight_decay must be nonnegative");
  if (!(lambda >= 0.0)) fail("lambda must be nonnegative");
  if (!(eps > 0.0)) fail("sinkhorn eps must be positive");
  if (sinkhorn_max_iter < 1) fail("sinkhorn_max_iter must be positive");
  if (!(sinkhorn_tol > 0.0)) fail("sinkhorn_tol must be positive");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) fail("alpha and beta must be nonnegative");
  if (embed_dim < 1) fail("embed_dim must be positive");
  if (fairness && fairness_attribute.empty()) fail("fairness requires an attribute");
  if (!(threshold > 0.0 && threshold < 1.0)) fail("threshold must lie in (0, 1)");
}

ordered_json config_to_json(const TrainConfig& cfg) {
  ordered_json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.adam.lr;
  j["beta1"] = cfg.adam.beta1;
  j["beta2"] = cfg.adam.beta2;
  j["adam_eps"] = cfg.adam.eps;
  j["weight_decay"] = cfg.adam.weight_decay;
  j["lambda"] = cfg.lambda;
  j["eps"] = cfg.eps;
  j["sinkhorn_max_iter"] = cfg.sinkhorn_max_iter;
  j["sinkhorn_tol"] = cfg.sinkhorn_tol;
  j["alpha"] = cfg.alpha;
  j["beta"] = cfg.beta;
  j["attr"] = cfg.fairness_attribute;
  j["embed_dim"] = cfg.embed_dim;
  j["init_seed"] = cfg.init_seed;
  j["batch_seed"] = cfg.batch_seed;
  j["dbpm"] = cfg.dbpm;
  j["fairness"] = cfg.fairness;
  j["dbpm_decision"] = std::string(decision_variable_name(cfg.dbpm_decision));
  j["sinkhorn_grad"] = std::string(fair_grad_mode_name(cfg.sinkhorn_grad));
  j["threshold"] = cfg.threshold;
  return j;
}

TrainConfig config_from_json(const json& j, TrainConfig cfg) {
  if (!j.is_object()) throw Error(Errc::kConfig, "config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "epochs") cfg.epochs = v.get<int>();
      else if (key == "batch_size") cfg.batch_size = v.get<std::size_t>();
      else if (key == "lr") cfg.adam.lr = v.get<double>();
      else if (key == "beta1") cfg.adam.beta1 = v.get<double>();
      else if (key == "beta2") cfg.adam.beta2 = v.get<double>();
      else if (key == "adam_eps") cfg.adam.eps = v.get<double>();
      else if (key == "weight_decay") cfg.adam.weight_decay = v.get<double>();
      else if (key == "lambda") cfg.lambda = v.get<double>();
      else if (key == "eps") cfg.eps = v.get<double>();
      else if (key == "sinkhorn_max_iter") cfg.sinkhorn_max_iter = v.get<int>();
      else if (key == "sinkhorn_tol") cfg.sinkhorn_tol = v.get<double>();
      else if (key == "alpha") cfg.alpha = v.get<double>();
      else if (key == "beta") cfg.beta = v.get<double>();
      else if (key == "attr") cfg.fairness_attribute = v.get<std::string>();
      else if (key == "embed_dim") cfg.embed_dim = v.get<std::size_t>();
      else if (key == "init_seed") cfg.init_seed = v.get<std::uint64_t>();
      else if (key == "batch_seed") cfg.batch_seed = v.get<std::uint64_t>();
      else if (key == "dbpm") cfg.dbpm = v.get<bool>();
      else if (key == "fairness") cfg.fairness = v.get<bool>();
      else if (key == "dbpm_decision") cfg.dbpm_decision = parse_decision_variable(v.get<std::string>());
      else if (key == "sinkhorn_grad") cfg.sinkhorn_grad = parse_fair_grad_mode(v.get<std::string>());
      else if (key == "threshold") cfg.threshold = v.get<double>();
      else throw Error(Errc::kConfig, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(Errc::kConfig, std::string("bad config value: ") + e.what());
  }
  return cfg;
}

namespace {

ordered_json matrix_json(const Matrix& m) {
  return ordered_json(std::vector<double>(m.values().begin(), m.values().end()));
}

Matrix matrix_from(const json& j, const char* key, std::size_t rows, std::size_t cols) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw Error(Errc::kIntegrity, std::string("checkpoint lacks array \"") + key + "\"");
  }
  auto data = j.at(key).get<std::vector<double>>();
  if (data.size() != rows * cols) {
    throw Error(Errc::kIntegrity, std::string("checkpoint array \"") + key + "\" has " +
                                      std::to_string(data.size()) + " entries, expected " +
                                      std::to_string(rows * cols));
  }
  return Matrix(rows, cols, std::move(data));
}

}  // namespace

ordered_json checkpoint_to_json(const Checkpoint& ck) {
  const EncoderParams& p = ck.params;
  ordered_json j;
  j["version"] = kCheckpointVersion;
  j["dims"] = {{"m", p.dim_image()}, {"n", p.dim_text()}, {"k", p.embed_dim()}};
  j["w_img"] = matrix_json(p.w_img);
  j["w_txt"] = matrix_json(p.w_txt);
  j["log_temp"] = p.log_temp;
  j["epoch"] = ck.epoch;
  ordered_json adam;
  adam["t"] = ck.adam.step;
  adam["m_img"] = matrix_json(ck.adam.m_img);
  adam["v_img"] = matrix_json(ck.adam.v_img);
  adam["m_txt"] = matrix_json(ck.adam.m_txt);
  adam["v_txt"] = matrix_json(ck.adam.v_txt);
  adam["m_s"] = ck.adam.m_s;
  adam["v_s"] = ck.adam.v_s;
  adam["hyper"] = {{"lr", ck.adam.hyper.lr},
                   {"beta1", ck.adam.hyper.beta1},
                   {"beta2", ck.adam.hyper.beta2},
                   {"eps", ck.adam.hyper.eps},
                   {"weight_decay", ck.adam.hyper.weight_decay}};
  j["adam"] = std::move(adam);
  if (ck.history) j["dbpm_history"] = ck.history->rows();
  if (ck.val_auc) j["val_auc"] = *ck.val_auc;
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::kIntegrity, "checkpoint is not a JSON object");
  if (!j.contains("version")) throw Error(Errc::kIntegrity, "checkpoint lacks a version");
  const int version = j.at("version").get<int>();
  if (version != kCheckpointVersion) {
    throw Error(Errc::kVersion, "checkpoint version " + std::to_string(version) +
                                    " is not supported (expected " +
                                    std::to_string(kCheckpointVersion) + ")");
  }
  try {
    const auto& dims = j.at("dims");
    const auto m = dims.at("m").get<std::size_t>();
    const auto n = dims.at("n").get<std::size_t>();
    const auto k = dims.at("k").get<std::size_t>();
    Checkpoint ck;
    ck.params.w_img = matrix_from(j, "w_img", m, k);
    ck.params.w_txt = matrix_from(j, "w_txt", n, k);
    ck.params.log_temp = j.at("log_temp").get<double>();
    ck.epoch = j.at("epoch").get<int>();
    const auto& adam = j.at("adam");
    ck.adam.step = adam.at("t").get<std::uint64_t>();
    ck.adam.m_img = matrix_from(adam, "m_img", m, k);
    ck.adam.v_img = matrix_from(adam, "v_img", m, k);
    ck.adam.m_txt = matrix_from(adam, "m_txt", n, k);
    ck.adam.v_txt = matrix_from(adam, "v_txt", n, k);
    ck.adam.m_s = adam.at("m_s").get<double>();
    ck.adam.v_s = adam.at("v_s").get<double>();
    const auto& h = adam.at("hyper");
    ck.adam.hyper = {h.at("lr").get<double>(), h.at("beta1").get<double>(),
                     h.at("beta2").get<double>(), h.at("eps").get<double>(),
                     h.at("weight_decay").get<double>()};
    if (j.contains("dbpm_history")) {
      ck.history = LossHistory(j.at("dbpm_history").get<std::vector<std::vector<double>>>());
    }
    if (j.contains("val_auc")) ck.val_auc = j.at("val_auc").get<double>();
    return ck;
  } catch (const json::exception& e) {
    throw Error(Errc::kIntegrity, std::string("malformed checkpoint: ") + e.what());
  }
}

void checkpoint_save(const Checkpoint& ck, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIo, "cannot open '" + path.string() + "' for writing");
  out << checkpoint_to_json(ck).dump() << '\n';
  if (!out) throw Error(Errc::kIo, "write to '" + path.string() + "' failed");
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open checkpoint '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw Error(Errc::kIntegrity, "checkpoint '" + path.string() + "' is truncated or corrupt: " +
                                      e.what());
  }
  return checkpoint_from_json(j);
}

StepResult batch_step(const EncoderParams& params, const Matrix& image_block,
                      const Matrix& text_block, std::span<const int> codes, double weight,
                      const TrainConfig& cfg, bool with_grad) {
  const EncodedBatch enc = encode(params, image_block, text_block);
  const SimilarityMatrix sim = similarity_matrix(enc.img, enc.txt, params.log_temp);
  const LossValue loss = symmetric_ce_loss(sim, with_grad);

  StepResult out;
  out.l1 = loss.value;
  out.weight = weight;
  std::optional<FairnessTerm> fair;
  if (cfg.fairness) {
    fair = fairness_loss(sim, codes, cfg.sinkhorn_options(), cfg.sinkhorn_grad,
                         with_grad && cfg.lambda > 0.0);
    out.fairness = fair->total;
  }
  out.l3 = weight * out.l1 + cfg.lambda * out.fairness;
  if (!with_grad) return out;

  Matrix grad_w = *loss.grad;
  for (double& x : grad_w.values()) x *= weight;
  if (fair && cfg.lambda > 0.0) {
    for (std::size_t i = 0; i < sim.batch(); ++i) grad_w(i, i) += cfg.lambda * fair->grad_diag[i];
  }
  out.grads = backward_to_params(grad_w, enc.img, enc.txt, image_block, text_block, params);
  return out;
}

namespace {

std::optional<double> validation_auc(const EncoderParams& params, const SampleSet& train_set,
                                     const SampleSet& val_set) {
  try {
    const Prototypes protos = fit_prototypes(params, train_set);
    const ScoredSet scored = classification_scores(params, val_set, protos);
    return auc(scored.scores, scored.labels);
  } catch (const Error& e) {
    if (e.code() == Errc::kUndefinedAuc || e.code() == Errc::kPrototype) return std::nullopt;
    throw;
  }
}

}  // namespace

RunArtifacts train(const TrainConfig& cfg, const SampleSet& train_set, const SampleSet& val_set,
                   const std::optional<Checkpoint>& resume) {
  cfg.validate();
  if (cfg.fairness) {
    train_set.codes(cfg.fairness_attribute);
    val_set.codes(cfg.fairness_attribute);
  }
  if (val_set.header.dim_image != train_set.header.dim_image ||
      val_set.header.dim_text != train_set.header.dim_text) {
    throw Error(Errc::kSchema, "train and validation sets differ in feature dimensions");
  }

  RunArtifacts run;
  run.plan = partition_batches(train_set, cfg.batch_size, cfg.batch_seed);
  const std::size_t num_batches = run.plan.batches.size();

  EncoderParams params;
  AdamState adam;
  int first_epoch = 1;
  if (resume) {
    params = resume->params;
    adam = resume->adam;
    first_epoch = resume->epoch + 1;
    if (!resume->history || resume->history->num_batches() != num_batches) {
      throw Error(Errc::kConfig, "resume checkpoint lacks a DBPM history matching the batch plan");
    }
    run.history = *resume->history;
    if (params.dim_image() != train_set.header.dim_image ||
        params.dim_text() != train_set.header.dim_text) {
      throw Error(Errc::kSchema, "checkpoint dimensions do not match the dataset");
    }
  } else {
    params = init_params(train_set.header.dim_image, train_set.header.dim_text, cfg.embed_dim,
                         cfg.init_seed);
    adam = AdamState::zeros_like(params, cfg.adam);
    run.history = LossHistory(num_batches);
  }
  // -inf until some epoch (possibly before the resume point) has a validation AUC.
  double best_auc = resume && resume->val_auc ? *resume->val_auc : -INFINITY;

  // Blocks and codes never change across epochs.
  std::vector<Matrix> image_blocks, text_blocks;
  std::vector<std::vector<int>> batch_codes(num_batches);
  const std::vector<int> all_codes =
      cfg.fairness ? train_set.codes(cfg.fairness_attribute) : std::vector<int>{};
  for (const Batch& b : run.plan.batches) {
    image_blocks.push_back(train_set.image_block(b.indices));
    text_blocks.push_back(train_set.text_block(b.indices));
    if (cfg.fairness)
      for (std::size_t idx : b.indices) batch_codes[b.id].push_back(all_codes[idx]);
  }

  TrainConfig l1_only = cfg;
  l1_only.fairness = false;

  for (int epoch = first_epoch; epoch <= cfg.epochs; ++epoch) {
    const auto e = static_cast<std::size_t>(epoch);
    std::optional<EpochStats> stats;
    if (epoch >= 2) stats = epoch_stats(run.history, e, cfg.alpha, cfg.beta);

    EpochCurve curve;
    curve.epoch = epoch;
    for (const Batch& b : run.plan.batches) {
      AuditRecord rec;
      rec.epoch = epoch;
      rec.batch_id = b.id;
      rec.stats = stats;
      if (stats) rec.s = run.history.historical_mean(b.id, e);

      // The DBPM weight depends on this batch's current loss, so the forward
      // pass runs first and the weight enters the gradient as a constant.
      StepResult unweighted;
      try {
        unweighted = batch_step(params, image_blocks[b.id], text_blocks[b.id], batch_codes[b.id],
                                1.0, l1_only, false);
      } catch (const Error& err) {
        if (err.code() != Errc::kNumeric && err.code() != Errc::kDegenerateRow) throw;
        throw Error(Errc::kDiverged,
                    "training diverged at epoch " + std::to_string(epoch) + ", batch " +
                        std::to_string(b.id) + " (" + err.what() +
                        "); last good checkpoint: epoch " + std::to_string(epoch - 1));
      }
      rec.l1 = unweighted.l1;

      PairVerdict verdict;
      verdict.batch_id = b.id;
      if (stats) {
        const double decision =
            cfg.dbpm_decision == DecisionVariable::kCurrentLoss ? rec.l1 : *rec.s;
        const PairVerdict v = pair_weight(decision, *stats);
        if (cfg.dbpm) verdict = v;
        verdict.batch_id = b.id;
      }
      rec.weight = verdict.weight;
      rec.classification = verdict.classification;

      const StepResult step = batch_step(params, image_blocks[b.id], text_blocks[b.id],
                                         batch_codes[b.id], verdict.weight, cfg, true);
      const double l2 = weighted_loss(verdict, step.l1);
      try {
        adam_step(adam, params, step.grads);
      } catch (const Error& err) {
        throw Error(Errc::kDiverged, std::string(err.what()) + " at epoch " +
                                         std::to_string(epoch) + "; last good checkpoint: epoch " +
                                         std::to_string(epoch - 1));
      }
      run.history.record(b.id, e, step.l1);

      curve.l1_mean += step.l1;
      curve.l2_mean += l2;
      curve.fair_mean += step.fairness;
      curve.l3_mean += step.l3;
      run.audit.push_back(std::move(rec));
    }
    const double nb = static_cast<double>(num_batches);
    curve.l1_mean /= nb;
    curve.l2_mean /= nb;
    curve.fair_mean /= nb;
    curve.l3_mean /= nb;
    curve.val_auc = validation_auc(params, train_set, val_set);
    run.curves.push_back(curve);

    Checkpoint ck{params, adam, epoch, run.history, curve.val_auc};
    const bool improved = curve.val_auc && *curve.val_auc > best_auc;
    if (improved || (!run.best && best_auc == -INFINITY)) {
      run.best = ck;
      if (curve.val_auc) best_auc = *curve.val_auc;
    }
    run.checkpoints.push_back(std::move(ck));
  }
  run.final_params = params;
  run.final_adam = adam;
  return run;
}

std::map<std::string, AttributeEvaluation> evaluate(const EncoderParams& params,
                                                   const SampleSet& test_set,
                                                   const std::vector<std::string>& attributes,
                                                   const Prototypes& prototypes,
                                                   double threshold) {
  std::map<std::string, AttributeEvaluation> out;
  const ScoredSet base = classification_scores(params, test_set, prototypes);
  for (const auto& name : attributes) {
    AttributeEvaluation ev;
    try {
      ScoredSet set = base;
      set.attr_codes = test_set.codes(name);
      ev.report = compute_report(name, set, threshold);
    } catch (const Error& e) {
      ev.error = e.what();
    }
    out[name] = std::move(ev);
  }
  return out;
}

}  // namespace rfclip
