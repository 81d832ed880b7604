// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rfclip/numkit.hpp"

namespace rfclip {

enum class Corruption { kClean, kNoisy, kFaulty };

std::string_view corruption_name(Corruption c);
Corruption parse_corruption(std::string_view name);

/// One paired image/text data point with its diagnosis label and
/// protected-attribute group codes.
struct Sample {
  std::string id;
  std::vector<double> image;
  std::vector<double> text;
  int label = 0;
  std::map<std::string, int> attrs;
  std::optional<Corruption> corrupted;

  bool operator==(const Sample&) const = default;
};

struct DatasetHeader {
  std::size_t dim_image = 0;
  std::size_t dim_text = 0;
  /// attribute name -> cardinality
  std::map<std::string, int> attributes;

  bool operator==(const DatasetHeader&) const = default;
};

struct SampleSet {
  DatasetHeader header;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }

  /// Throws kSchema / kUniqueness when a sample breaks the header contract.
  void validate() const;

  /// Group codes of every sample for one attribute; kSchema if undeclared.
  std::vector<int> codes(const std::string& attribute) const;
  std::vector<int> labels() const;

  /// Stacked feature blocks of the given samples, one row per index.
  Matrix image_block(std::span<const std::size_t> indices) const;
  Matrix text_block(std::span<const std::size_t> indices) const;

  bool operator==(const SampleSet&) const = default;
};

enum class CorruptionMode { kSwap, kNoise };

std::string_view corruption_mode_name(CorruptionMode m);
CorruptionMode parse_corruption_mode(std::string_view name);

/// Per-attribute synthetic group structure. `noise_scale` multiplies the
/// base feature noise for members of each group; `label_shift` is added to
/// the label logit.
struct GroupSpec {
  std::string name;
  int cardinality = 0;
  std::vector<double> proportions;
  std::vector<double> noise_scale;  // empty -> all 1
  std::vector<double> label_shift;  // empty -> all 0
};

struct SynthConfig {
  std::size_t n_samples = 10000;
  std::size_t latent_dim = 8;
  std::size_t dim_image = 16;
  std::size_t dim_text = 16;
  std::vector<GroupSpec> attributes;
  double image_noise = 0.3;
  double text_noise = 0.3;
  /// Standard deviation of the label logit w·z before group shifts.
  double label_signal = 2.0;
  double label_offset = 0.0;
  double corruption_rate = 0.0;
  CorruptionMode corruption_mode = CorruptionMode::kSwap;
  /// Standard deviation of the additive text noise in noise mode.
  double corruption_noise = 3.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Draws a dataset from the latent-factor model described on SynthConfig,
/// then applies corruption at `corruption_rate`.
SampleSet generate_synthetic(const SynthConfig& cfg);

/// Corrupts ⌊rate·N⌋ randomly chosen samples. Swap mode permutes their text
/// features cyclically (flagged faulty); noise mode adds Gaussian noise of
/// std `noise_std` to their text features (flagged noisy).
SampleSet inject_corruption(const SampleSet& set, double rate, CorruptionMode mode,
                            std::uint64_t seed, double noise_std = 3.0);

/// Corrupts exactly the listed samples, in list order for the swap cycle.
SampleSet corrupt_indices(const SampleSet& set, std::span<const std::size_t> indices,
                          CorruptionMode mode, std::uint64_t seed,
                          double noise_std = 3.0);

/// Consecutive slices of the set with the given sizes (must sum to <= N).
std::vector<SampleSet> split_sampleset(const SampleSet& set,
                                       std::span<const std::size_t> sizes);

void write_jsonl(const SampleSet& set, const std::filesystem::path& path);
void write_jsonl(const SampleSet& set, std::ostream& out);
SampleSet load_jsonl(const std::filesystem::path& path);
SampleSet load_jsonl(std::istream& in);

struct Batch {
  std::size_t id = 0;
  std::vector<std::size_t> indices;

  bool operator==(const Batch&) const = default;
};

/// A single shuffled partition reused for every epoch, so batch `id` always
/// names the same samples.
struct BatchPlan {
  std::size_t batch_size = 0;
  std::vector<Batch> batches;
  std::vector<std::size_t> dropped;

  bool operator==(const BatchPlan&) const = default;
};

BatchPlan partition_batches(std::size_t n_samples, std::size_t batch_size,
                            std::uint64_t seed);
BatchPlan partition_batches(const SampleSet& set, std::size_t batch_size,
                            std::uint64_t seed);

}  // namespace rfclip
