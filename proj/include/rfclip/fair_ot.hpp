// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rfclip/contrastive.hpp"
#include "rfclip/numkit.hpp"

namespace rfclip {

/// Finite weighted point set on the real line.
struct DiscreteDist {
  std::vector<double> support;
  std::vector<double> weights;

  static DiscreteDist uniform(std::vector<double> support);
  std::size_t size() const noexcept { return support.size(); }
  void validate() const;
};

struct SinkhornOptions {
  double eps = 1e-4;
  int max_iter = 2000;
  double tol = 1e-9;
  /// Geometric factor of the eps-annealing warm start; 0 disables it.
  double eps_scaling = 0.5;
  /// Try a Newton step on the source potentials before each plain sweep.
  bool newton = true;
};

struct SinkhornResult {
  /// <P, C> + eps · KL(P || a⊗b) at the returned plan.
  double value = 0.0;
  Matrix plan;
  std::vector<double> f;
  std::vector<double> g;
  int iterations = 0;
  bool converged = false;
  /// Euclidean norm of the source-marginal error after each iteration at
  /// the target eps; non-increasing by construction.
  std::vector<double> violation_trace;
};

/// Entropic OT between two 1-D distributions with squared-distance cost,
/// solved on the dual potentials in the log domain:
///   f_i = -eps · lse_j(log b_j + (g_j - C_ij) / eps)
///   g_j = -eps · lse_i(log a_i + (f_i - C_ij) / eps)
/// g is always the exact g-update of f, so the target marginal holds to
/// rounding. f is driven to the source marginal by damped Newton steps,
/// falling back to the plain f/g sweep whenever Newton makes no progress,
/// after an eps-annealing warm start. Iteration stops once the Euclidean
/// source-marginal error (an upper bound on the max-norm error) is below
/// `tol`, or after `max_iter` iterations in total.
SinkhornResult sinkhorn(const DiscreteDist& a, const DiscreteDist& b,
                        const SinkhornOptions& opts = {});

/// Uniform distribution over the diagonal (matched-pair) similarities.
DiscreteDist diagonal_distribution(const SimilarityMatrix& sim);

/// Diagonal similarities of the members of group `gamma`; nullopt when the
/// group has no member in this batch.
std::optional<DiscreteDist> group_distribution(const SimilarityMatrix& sim,
                                               std::span<const int> attr_codes, int gamma);

enum class FairGradMode { kEnvelope, kFiniteDifference };

std::string_view fair_grad_mode_name(FairGradMode m);
FairGradMode parse_fair_grad_mode(std::string_view name);

struct FairnessTerm {
  /// group code -> S_eps(B_W, B_W_gamma), for groups present in the batch
  std::map<int, double> per_group;
  double total = 0.0;
  /// d total / d W_ii
  std::vector<double> grad_diag;
  bool all_converged = true;
};

/// Sum over groups present in the batch of the Sinkhorn distance between the
/// whole-batch diagonal distribution and the group's sub-distribution.
/// Gradients hold each converged plan fixed (envelope theorem) unless
/// `mode` requests central finite differences.
FairnessTerm fairness_loss(const SimilarityMatrix& sim, std::span<const int> attr_codes,
                           const SinkhornOptions& opts = {},
                           FairGradMode mode = FairGradMode::kEnvelope, bool with_grad = true);

std::vector<double> fairness_grad(const SimilarityMatrix& sim, std::span<const int> attr_codes,
                                  const SinkhornOptions& opts = {},
                                  FairGradMode mode = FairGradMode::kEnvelope);

/// Fairness total as a function of the diagonal values alone.
double fairness_total_from_diagonal(std::span<const double> diag, std::span<const int> attr_codes,
                                    const SinkhornOptions& opts);

}  // namespace rfclip
