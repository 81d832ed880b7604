// SPDX-License-Identifier: Apache-2.0
#include "rfclip/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rfclip/error.hpp"

namespace rfclip {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view corruption_name(Corruption c) {
  switch (c) {
    case Corruption::kClean: return "clean";
    case Corruption::kNoisy: return "noisy";
    case Corruption::kFaulty: return "faulty";
  }
  return "clean";
}

Corruption parse_corruption(std::string_view name) {
  if (name == "clean") return Corruption::kClean;
  if (name == "noisy") return Corruption::kNoisy;
  if (name == "faulty") return Corruption::kFaulty;
  throw Error(Errc::kParse, "unknown corruption flag '" + std::string(name) + "'");
}

std::string_view corruption_mode_name(CorruptionMode m) {
  return m == CorruptionMode::kSwap ? "swap" : "noise";
}

CorruptionMode parse_corruption_mode(std::string_view name) {
  if (name == "swap") return CorruptionMode::kSwap;
  if (name == "noise") return CorruptionMode::kNoise;
  throw Error(Errc::kConfig, "unknown corruption mode '" + std::string(name) + "'");
}

void SampleSet::validate() const {
  std::set<std::string_view> ids;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.image.size() != header.dim_image || s.text.size() != header.dim_text) {
      throw Error(Errc::kSchema,
                  "sample '" + s.id + "' has feature dims (" + std::to_string(s.image.size()) +
                      ", " + std::to_string(s.text.size()) + "), header declares (" +
                      std::to_string(header.dim_image) + ", " +
                      std::to_string(header.dim_text) + ")",
                  i);
    }
    if (s.label != 0 && s.label != 1) {
      throw Error(Errc::kSchema, "sample '" + s.id + "' has non-binary label", i);
    }
    for (const auto& [name, card] : header.attributes) {
      auto it = s.attrs.find(name);
      if (it == s.attrs.end()) {
        throw Error(Errc::kSchema, "sample '" + s.id + "' lacks attribute '" + name + "'", i);
      }
      if (it->second < 0 || it->second >= card) {
        throw Error(Errc::kSchema,
                    "sample '" + s.id + "' attribute '" + name + "' code " +
                        std::to_string(it->second) + " outside cardinality " +
                        std::to_string(card),
                    i);
      }
    }
    for (const auto& [name, code] : s.attrs) {
      if (!header.attributes.contains(name)) {
        throw Error(Errc::kSchema,
                    "sample '" + s.id + "' has undeclared attribute '" + name + "'", i);
      }
    }
    for (double x : s.image)
      if (!std::isfinite(x)) throw Error(Errc::kSchema, "non-finite image feature", i);
    for (double x : s.text)
      if (!std::isfinite(x)) throw Error(Errc::kSchema, "non-finite text feature", i);
    if (!ids.insert(s.id).second) {
      throw Error(Errc::kUniqueness, "duplicate sample id '" + s.id + "'", i);
    }
  }
}

std::vector<int> SampleSet::codes(const std::string& attribute) const {
  if (!header.attributes.contains(attribute)) {
    throw Error(Errc::kSchema, "attribute '" + attribute + "' not declared in dataset header");
  }
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.attrs.at(attribute));
  return out;
}

std::vector<int> SampleSet::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

Matrix SampleSet::image_block(std::span<const std::size_t> indices) const {
  Matrix m(indices.size(), header.dim_image);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& src = samples.at(indices[r]).image;
    std::copy(src.begin(), src.end(), m.row(r).begin());
  }
  return m;
}

Matrix SampleSet::text_block(std::span<const std::size_t> indices) const {
  Matrix m(indices.size(), header.dim_text);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& src = samples.at(indices[r]).text;
    std::copy(src.begin(), src.end(), m.row(r).begin());
  }
  return m;
}

void SynthConfig::validate() const {
  if (n_samples == 0) throw Error(Errc::kConfig, "synthetic config needs at least one sample");
  if (latent_dim == 0 || dim_image == 0 || dim_text == 0) {
    throw Error(Errc::kConfig, "synthetic config dimensions must be positive");
  }
  if (!(corruption_rate >= 0.0 && corruption_rate <= 1.0)) {
    throw Error(Errc::kConfig, "corruption rate must lie in [0, 1]");
  }
  std::set<std::string> names;
  for (const auto& g : attributes) {
    if (g.cardinality <= 0) {
      throw Error(Errc::kConfig, "attribute '" + g.name + "' has zero cardinality");
    }
    if (!names.insert(g.name).second) {
      throw Error(Errc::kConfig, "attribute '" + g.name + "' declared twice");
    }
    const auto card = static_cast<std::size_t>(g.cardinality);
    if (g.proportions.size() != card) {
      throw Error(Errc::kConfig, "attribute '" + g.name + "' needs " +
                                     std::to_string(card) + " proportions");
    }
    double total = 0.0;
    for (double p : g.proportions) {
      if (!(p >= 0.0)) throw Error(Errc::kConfig, "negative group proportion");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw Error(Errc::kConfig, "attribute '" + g.name + "' proportions sum to " +
                                     std::to_string(total) + ", expected 1");
    }
    if (!g.noise_scale.empty() && g.noise_scale.size() != card) {
      throw Error(Errc::kConfig, "attribute '" + g.name + "' noise scales mismatch cardinality");
    }
    if (!g.label_shift.empty() && g.label_shift.size() != card) {
      throw Error(Errc::kConfig, "attribute '" + g.name + "' label shifts mismatch cardinality");
    }
  }
}

namespace {

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  Matrix m(rows, cols);
  for (double& x : m.values()) x = rng.normal(0.0, stddev);
  return m;
}

int draw_category(Rng& rng, const std::vector<double>& proportions) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t g = 0; g < proportions.size(); ++g) {
    cum += proportions[g];
    if (u < cum) return static_cast<int>(g);
  }
  // Rounding left u above the last cumulative sum: fall back to the last
  // group with nonzero mass.
  for (std::size_t g = proportions.size(); g-- > 0;)
    if (proportions[g] > 0.0) return static_cast<int>(g);
  return 0;
}

std::string sample_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06zu", i);
  return buf;
}

std::size_t corruption_count(double rate, std::size_t n) {
  return static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9));
}

}  // namespace

SampleSet generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng root(cfg.seed);
  Rng model_rng = root.fork(1);
  Rng sample_rng = root.fork(2);

  const std::size_t kz = cfg.latent_dim;
  const double proj_std = 1.0 / std::sqrt(static_cast<double>(kz));
  const Matrix a_img = gaussian_matrix(model_rng, cfg.dim_image, kz, proj_std);
  const Matrix a_txt = gaussian_matrix(model_rng, cfg.dim_text, kz, proj_std);
  std::vector<double> w(kz);
  for (double& x : w) x = model_rng.normal(0.0, cfg.label_signal * proj_std);

  SampleSet set;
  set.header.dim_image = cfg.dim_image;
  set.header.dim_text = cfg.dim_text;
  for (const auto& g : cfg.attributes) set.header.attributes[g.name] = g.cardinality;
  set.samples.reserve(cfg.n_samples);

  std::vector<double> z(kz);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    Sample s;
    s.id = sample_id(i);
    double noise_mult = 1.0;
    double shift = 0.0;
    for (const auto& g : cfg.attributes) {
      const int code = draw_category(sample_rng, g.proportions);
      s.attrs[g.name] = code;
      if (!g.noise_scale.empty()) noise_mult *= g.noise_scale[code];
      if (!g.label_shift.empty()) shift += g.label_shift[code];
    }
    for (double& x : z) x = sample_rng.normal();

    s.image.resize(cfg.dim_image);
    for (std::size_t r = 0; r < cfg.dim_image; ++r) {
      double acc = 0.0;
      for (std::size_t p = 0; p < kz; ++p) acc += a_img(r, p) * z[p];
      s.image[r] = acc + cfg.image_noise * noise_mult * sample_rng.normal();
    }
    s.text.resize(cfg.dim_text);
    for (std::size_t r = 0; r < cfg.dim_text; ++r) {
      double acc = 0.0;
      for (std::size_t p = 0; p < kz; ++p) acc += a_txt(r, p) * z[p];
      s.text[r] = acc + cfg.text_noise * noise_mult * sample_rng.normal();
    }
    double logit = cfg.label_offset + shift;
    for (std::size_t p = 0; p < kz; ++p) logit += w[p] * z[p];
    s.label = sample_rng.bernoulli(sigmoid(logit)) ? 1 : 0;
    s.corrupted = Corruption::kClean;
    set.samples.push_back(std::move(s));
  }

  if (cfg.corruption_rate > 0.0) {
    const std::uint64_t corruption_seed = root.fork(3).next_u64();
    set = inject_corruption(set, cfg.corruption_rate, cfg.corruption_mode, corruption_seed,
                            cfg.corruption_noise);
  }
  return set;
}

SampleSet corrupt_indices(const SampleSet& set, std::span<const std::size_t> indices,
                          CorruptionMode mode, std::uint64_t seed, double noise_std) {
  SampleSet out = set;
  for (auto& s : out.samples)
    if (!s.corrupted) s.corrupted = Corruption::kClean;
  if (indices.empty()) return out;

  for (std::size_t idx : indices) {
    if (idx >= set.size()) throw Error(Errc::kConfig, "corruption index out of range", idx);
  }
  if (mode == CorruptionMode::kSwap) {
    if (indices.size() < 2) {
      throw Error(Errc::kCorruptionInfeasible,
                  "swap corruption needs at least 2 chosen samples, got " +
                      std::to_string(indices.size()));
    }
    const std::size_t k = indices.size();
    for (std::size_t j = 0; j < k; ++j) {
      auto& dst = out.samples[indices[j]];
      dst.text = set.samples[indices[(j + 1) % k]].text;
      dst.corrupted = Corruption::kFaulty;
    }
  } else {
    Rng rng(seed);
    for (std::size_t idx : indices) {
      auto& dst = out.samples[idx];
      for (double& x : dst.text) x += noise_std * rng.normal();
      dst.corrupted = Corruption::kNoisy;
    }
  }
  return out;
}

SampleSet inject_corruption(const SampleSet& set, double rate, CorruptionMode mode,
                            std::uint64_t seed, double noise_std) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw Error(Errc::kConfig, "corruption rate must lie in [0, 1]");
  }
  const std::size_t k = corruption_count(rate, set.size());
  if (mode == CorruptionMode::kSwap && rate > 0.0 && k < 2) {
    throw Error(Errc::kCorruptionInfeasible,
                "swap corruption at rate " + std::to_string(rate) + " over " +
                    std::to_string(set.size()) + " samples selects fewer than 2");
  }
  Rng rng(seed);
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  order.resize(k);
  return corrupt_indices(set, order, mode, rng.fork(1).next_u64(), noise_std);
}

std::vector<SampleSet> split_sampleset(const SampleSet& set,
                                       std::span<const std::size_t> sizes) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total > set.size()) {
    throw Error(Errc::kConfig, "split sizes sum to " + std::to_string(total) +
                                   " but the set holds " + std::to_string(set.size()));
  }
  std::vector<SampleSet> out;
  std::size_t offset = 0;
  for (std::size_t n : sizes) {
    SampleSet part;
    part.header = set.header;
    part.samples.assign(set.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                        set.samples.begin() + static_cast<std::ptrdiff_t>(offset + n));
    offset += n;
    out.push_back(std::move(part));
  }
  return out;
}

void write_jsonl(const SampleSet& set, std::ostream& out) {
  ordered_json header;
  header["dim_image"] = set.header.dim_image;
  header["dim_text"] = set.header.dim_text;
  header["attributes"] = ordered_json::object();
  for (const auto& [name, card] : set.header.attributes) header["attributes"][name] = card;
  out << header.dump() << '\n';
  for (const auto& s : set.samples) {
    ordered_json j;
    j["id"] = s.id;
    j["image"] = s.image;
    j["text"] = s.text;
    j["label"] = s.label;
    j["attrs"] = ordered_json::object();
    for (const auto& [name, code] : s.attrs) j["attrs"][name] = code;
    if (s.corrupted) j["corrupted"] = std::string(corruption_name(*s.corrupted));
    out << j.dump() << '\n';
  }
}

void write_jsonl(const SampleSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIo, "cannot open '" + path.string() + "' for writing");
  write_jsonl(set, out);
  if (!out) throw Error(Errc::kIo, "write to '" + path.string() + "' failed");
}

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& why) {
  throw Error(Errc::kParse, "line " + std::to_string(line) + ": " + why, line);
}

std::vector<double> read_features(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key)) parse_fail(line, std::string("missing \"") + key + "\"");
  const json& arr = j.at(key);
  if (!arr.is_array()) parse_fail(line, std::string("\"") + key + "\" is not an array");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& x : arr) {
    if (!x.is_number()) parse_fail(line, std::string("\"") + key + "\" holds a non-number");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

SampleSet load_jsonl(std::istream& in) {
  SampleSet set;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  std::set<std::string> ids;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      parse_fail(line, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) parse_fail(line, "record is not a JSON object");

    try {
      if (!have_header) {
        for (const char* key : {"dim_image", "dim_text", "attributes"})
          if (!j.contains(key)) parse_fail(line, std::string("header missing \"") + key + "\"");
        set.header.dim_image = j.at("dim_image").get<std::size_t>();
        set.header.dim_text = j.at("dim_text").get<std::size_t>();
        for (const auto& [name, card] : j.at("attributes").items()) {
          const int c = card.get<int>();
          if (c <= 0) parse_fail(line, "attribute '" + name + "' has non-positive cardinality");
          set.header.attributes[name] = c;
        }
        have_header = true;
        continue;
      }

      Sample s;
      for (const char* key : {"id", "image", "text", "label", "attrs"})
        if (!j.contains(key)) parse_fail(line, std::string("missing \"") + key + "\"");
      s.id = j.at("id").get<std::string>();
      s.image = read_features(j, "image", line);
      s.text = read_features(j, "text", line);
      if (!j.at("label").is_number_integer()) parse_fail(line, "\"label\" is not an integer");
      s.label = j.at("label").get<int>();
      for (const auto& [name, code] : j.at("attrs").items()) s.attrs[name] = code.get<int>();
      if (j.contains("corrupted")) {
        try {
          s.corrupted = parse_corruption(j.at("corrupted").get<std::string>());
        } catch (const Error& e) {
          parse_fail(line, e.what());
        }
      }
      if (s.image.size() != set.header.dim_image || s.text.size() != set.header.dim_text) {
        throw Error(Errc::kSchema, "line " + std::to_string(line) + ": feature dims (" +
                                       std::to_string(s.image.size()) + ", " +
                                       std::to_string(s.text.size()) +
                                       ") do not match header",
                    line);
      }
      if (!ids.insert(s.id).second) {
        throw Error(Errc::kUniqueness,
                    "line " + std::to_string(line) + ": duplicate id '" + s.id + "'", line);
      }
      set.samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      parse_fail(line, std::string("wrong field type: ") + e.what());
    }
  }
  if (!have_header) throw Error(Errc::kParse, "missing header record", 1);
  try {
    set.validate();
  } catch (const Error& e) {
    if (e.code() == Errc::kSchema && e.index()) {
      // validate() indexes samples; report the file line (header is line 1).
      throw Error(Errc::kSchema, e.what(), *e.index() + 2);
    }
    throw;
  }
  return set;
}

SampleSet load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open '" + path.string() + "'");
  return load_jsonl(in);
}

BatchPlan partition_batches(std::size_t n_samples, std::size_t batch_size,
                            std::uint64_t seed) {
  if (batch_size < 2) throw Error(Errc::kConfig, "batch size must be at least 2");
  if (n_samples < batch_size) {
    throw Error(Errc::kInfeasiblePlan, "cannot form a batch of " +
                                           std::to_string(batch_size) + " from " +
                                           std::to_string(n_samples) + " samples");
  }
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  BatchPlan plan;
  plan.batch_size = batch_size;
  const std::size_t full = n_samples / batch_size;
  for (std::size_t b = 0; b < full; ++b) {
    Batch batch;
    batch.id = b;
    batch.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(b * batch_size),
                         order.begin() + static_cast<std::ptrdiff_t>((b + 1) * batch_size));
    plan.batches.push_back(std::move(batch));
  }
  plan.dropped.assign(order.begin() + static_cast<std::ptrdiff_t>(full * batch_size),
                      order.end());
  return plan;
}

BatchPlan partition_batches(const SampleSet& set, std::size_t batch_size,
                            std::uint64_t seed) {
  return partition_batches(set.size(), batch_size, seed);
}

}  // namespace rfclip
