// SPDX-License-Identifier: Apache-2.0
#include "rfclip/fair_ot.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "rfclip/error.hpp"

namespace rfclip {

DiscreteDist DiscreteDist::uniform(std::vector<double> support) {
  if (support.empty()) throw Error(Errc::kEmptyInput, "distribution needs at least one point");
  const double w = 1.0 / static_cast<double>(support.size());
  std::vector<double> weights(support.size(), w);
  return {std::move(support), std::move(weights)};
}

void DiscreteDist::validate() const {
  if (support.empty() || support.size() != weights.size()) {
    throw Error(Errc::kConfig, "distribution support and weights must be nonempty and equal length");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error(Errc::kConfig, "distribution weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(Errc::kConfig, "distribution weights sum to " + std::to_string(total));
  }
  for (double x : support) {
    if (!std::isfinite(x)) throw Error(Errc::kNumeric, "non-finite distribution support");
  }
}

namespace {

// Solves (K + ridge·I) x = rhs for symmetric positive semidefinite K by
// Cholesky; K is overwritten. Returns false if a pivot collapses.
bool solve_spd(std::vector<double>& k, std::vector<double>& rhs, std::size_t n, double ridge) {
  for (std::size_t i = 0; i < n; ++i) k[i * n + i] += ridge;
  for (std::size_t j = 0; j < n; ++j) {
    double d = k[j * n + j];
    for (std::size_t p = 0; p < j; ++p) d -= k[j * n + p] * k[j * n + p];
    if (!(d > 0.0)) return false;
    const double l = std::sqrt(d);
    k[j * n + j] = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = k[i * n + j];
      for (std::size_t p = 0; p < j; ++p) v -= k[i * n + p] * k[j * n + p];
      k[i * n + j] = v / l;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double v = rhs[i];
    for (std::size_t p = 0; p < i; ++p) v -= k[i * n + p] * rhs[p];
    rhs[i] = v / k[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double v = rhs[i];
    for (std::size_t p = i + 1; p < n; ++p) v -= k[p * n + i] * rhs[p];
    rhs[i] = v / k[i * n + i];
  }
  return true;
}

class SinkhornSolver {
 public:
  SinkhornSolver(const DiscreteDist& a, const DiscreteDist& b)
      : a_(a), b_(b), n_(a.size()), m_(b.size()), cost_(n_, m_), log_a_(n_), log_b_(m_),
        scratch_(std::max(n_, m_)) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) {
        const double d = a.support[i] - b.support[j];
        cost_(i, j) = d * d;
      }
    }
    for (std::size_t i = 0; i < n_; ++i) log_a_[i] = std::log(a.weights[i]);
    for (std::size_t j = 0; j < m_; ++j) log_b_[j] = std::log(b.weights[j]);
  }

  double max_cost() const {
    double c = 0.0;
    for (double v : cost_.values()) c = std::max(c, v);
    return c;
  }

  void f_update(std::vector<double>& f, const std::vector<double>& g, double eps) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) scratch_[j] = log_b_[j] + (g[j] - cost_(i, j)) / eps;
      f[i] = -eps * logsumexp(std::span<const double>(scratch_.data(), m_));
    }
  }

  void g_update(const std::vector<double>& f, std::vector<double>& g, double eps) {
    for (std::size_t j = 0; j < m_; ++j) {
      for (std::size_t i = 0; i < n_; ++i) scratch_[i] = log_a_[i] + (f[i] - cost_(i, j)) / eps;
      g[j] = -eps * logsumexp(std::span<const double>(scratch_.data(), n_));
    }
  }

  void fill_plan(const std::vector<double>& f, const std::vector<double>& g, double eps,
                 Matrix& plan) const {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < m_; ++j)
        plan(i, j) = std::exp(log_a_[i] + log_b_[j] + (f[i] + g[j] - cost_(i, j)) / eps);
  }

  /// Euclidean norm of the gap between the plan's row sums and the source
  /// weights; it bounds the max-norm gap from above.
  double row_violation(const Matrix& plan, std::vector<double>& rows) const {
    double v = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      rows[i] = 0.0;
      for (std::size_t j = 0; j < m_; ++j) rows[i] += plan(i, j);
      v += (rows[i] - a_.weights[i]) * (rows[i] - a_.weights[i]);
    }
    return std::sqrt(v);
  }

  /// Newton direction for the row-marginal equations r(f) = a with g slaved
  /// to f through the exact g-update. The Jacobian is L / eps with L the
  /// graph Laplacian of the weights sum_j P_ij P_lj / b_j. L is singular
  /// along f + c·1, so the last potential is pinned.
  bool newton_direction(const Matrix& plan, double eps, const std::vector<double>& rows,
                        std::vector<double>& dir) const {
    dir.assign(n_, 0.0);
    if (n_ < 2) return false;
    const std::size_t d = n_ - 1;
    std::vector<double> lap(d * d, 0.0);
    std::vector<double> degree(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t l = 0; l < i; ++l) {
        double w = 0.0;
        for (std::size_t j = 0; j < m_; ++j) w += plan(i, j) * plan(l, j) / b_.weights[j];
        degree[i] += w;
        degree[l] += w;
        if (i < d) lap[i * d + l] = lap[l * d + i] = -w;
      }
    }
    double diag_max = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      lap[i * d + i] = degree[i];
      diag_max = std::max(diag_max, degree[i]);
    }
    for (std::size_t i = 0; i < d; ++i) dir[i] = eps * (a_.weights[i] - rows[i]);
    if (!(diag_max > 0.0)) return false;
    return solve_spd(lap, dir, d, 1e-14 * diag_max);
  }

  double semi_dual(const std::vector<double>& f, const std::vector<double>& g) const {
    double v = 0.0;
    for (std::size_t i = 0; i < n_; ++i) v += a_.weights[i] * f[i];
    for (std::size_t j = 0; j < m_; ++j) v += b_.weights[j] * g[j];
    return v;
  }

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  const Matrix& cost() const { return cost_; }
  const std::vector<double>& log_a() const { return log_a_; }
  const std::vector<double>& log_b() const { return log_b_; }

 private:
  const DiscreteDist& a_;
  const DiscreteDist& b_;
  std::size_t n_, m_;
  Matrix cost_;
  std::vector<double> log_a_, log_b_;
  mutable std::vector<double> scratch_;
};

}  // namespace

SinkhornResult sinkhorn(const DiscreteDist& a, const DiscreteDist& b,
                        const SinkhornOptions& opts) {
  if (!(opts.eps > 0.0)) throw Error(Errc::kConfig, "sinkhorn eps must be positive");
  if (opts.max_iter < 1) throw Error(Errc::kConfig, "sinkhorn max_iter must be positive");
  a.validate();
  b.validate();

  SinkhornSolver solver(a, b);
  const std::size_t n = solver.n();
  const std::size_t m = solver.m();
  const double eps = opts.eps;

  SinkhornResult res;
  res.f.assign(n, 0.0);
  res.g.assign(m, 0.0);
  res.plan = Matrix(n, m);
  std::vector<double> rows(n), dir, f_try(n), g_try(m), rows_try(n);
  Matrix plan_try(n, m);
  double violation = 0.0;

  // One iteration: a damped Newton step on the source potentials when it
  // makes progress, otherwise a plain f/g sweep.
  auto iterate = [&](double level, bool strict) {
    bool accepted = false;
    if (opts.newton && solver.newton_direction(res.plan, level, rows, dir)) {
      // Backtracking on the semi-dual F(f) = <a, f> + <b, g(f)>, concave
      // with gradient a - r. A step that lowers the violation is accepted
      // too, since near the optimum F is flat to rounding.
      const double f0 = solver.semi_dual(res.f, res.g);
      double slope = 0.0;
      for (std::size_t i = 0; i < n; ++i) slope += (a.weights[i] - rows[i]) * dir[i];
      for (double step = 1.0; step > 1e-12 && !accepted; step *= 0.5) {
        for (std::size_t i = 0; i < n; ++i) f_try[i] = res.f[i] + step * dir[i];
        solver.g_update(f_try, g_try, level);
        solver.fill_plan(f_try, g_try, level, plan_try);
        const double v = solver.row_violation(plan_try, rows_try);
        const double f1 = solver.semi_dual(f_try, g_try);
        if (v < violation || (!strict && f1 >= f0 + 1e-4 * step * slope)) {
          res.f.swap(f_try);
          res.g.swap(g_try);
          std::swap(res.plan, plan_try);
          rows.swap(rows_try);
          violation = v;
          accepted = true;
        }
      }
    }
    if (!accepted) {
      solver.f_update(res.f, res.g, level);
      solver.g_update(res.f, res.g, level);
      solver.fill_plan(res.f, res.g, level, res.plan);
      violation = solver.row_violation(res.plan, rows);
    }
  };
  auto restart = [&](double level) {
    solver.f_update(res.f, res.g, level);
    solver.g_update(res.f, res.g, level);
    solver.fill_plan(res.f, res.g, level, res.plan);
    violation = solver.row_violation(res.plan, rows);
  };

  // Anneal eps geometrically from the cost scale down to the target,
  // solving each level loosely and warm-starting the next from it.
  int budget = opts.max_iter;
  if (opts.eps_scaling > 0.0 && opts.eps_scaling < 1.0) {
    for (double level = solver.max_cost(); level > eps; level *= opts.eps_scaling) {
      restart(level);
      for (int k = 0; k < 20 && violation >= 1e-6 && budget > 0; ++k, --budget) iterate(level, false);
    }
  }
  restart(eps);
  for (int it = 1; it <= budget && violation >= opts.tol; ++it) {
    res.iterations = it;
    iterate(eps, true);
    res.violation_trace.push_back(violation);
  }
  res.converged = violation < opts.tol;

  double transport = 0.0, kl = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double p = res.plan(i, j);
      if (p > 0.0) {
        transport += p * solver.cost()(i, j);
        kl += p * (res.f[i] + res.g[j] - solver.cost()(i, j)) / eps;
        mass += p;
      }
    }
  }
  kl += 1.0 - mass;
  res.value = std::max(0.0, transport + eps * kl);
  return res;
}

DiscreteDist diagonal_distribution(const SimilarityMatrix& sim) {
  const std::size_t b = sim.batch();
  std::vector<double> diag(b);
  for (std::size_t i = 0; i < b; ++i) diag[i] = sim.values(i, i);
  return DiscreteDist::uniform(std::move(diag));
}

std::optional<DiscreteDist> group_distribution(const SimilarityMatrix& sim,
                                               std::span<const int> attr_codes, int gamma) {
  if (attr_codes.size() != sim.batch()) {
    throw Error(Errc::kShape, "attribute codes do not match batch size");
  }
  std::vector<double> support;
  for (std::size_t i = 0; i < attr_codes.size(); ++i)
    if (attr_codes[i] == gamma) support.push_back(sim.values(i, i));
  if (support.empty()) return std::nullopt;
  return DiscreteDist::uniform(std::move(support));
}

std::string_view fair_grad_mode_name(FairGradMode m) {
  return m == FairGradMode::kEnvelope ? "envelope" : "finite-difference";
}

FairGradMode parse_fair_grad_mode(std::string_view name) {
  if (name == "envelope") return FairGradMode::kEnvelope;
  if (name == "finite-difference") return FairGradMode::kFiniteDifference;
  throw Error(Errc::kConfig, "unknown sinkhorn gradient mode '" + std::string(name) + "'");
}

namespace {

FairnessTerm fairness_from_diagonal(std::span<const double> diag, std::span<const int> codes,
                                    const SinkhornOptions& opts, bool envelope_grad) {
  if (diag.size() != codes.size()) {
    throw Error(Errc::kShape, "attribute codes do not match batch size");
  }
  if (diag.size() < 2) throw Error(Errc::kBatchTooSmall, "fairness term needs B >= 2");
  const std::size_t b = diag.size();
  const DiscreteDist full = DiscreteDist::uniform({diag.begin(), diag.end()});
  const std::set<int> groups(codes.begin(), codes.end());

  FairnessTerm out;
  if (envelope_grad) out.grad_diag.assign(b, 0.0);
  for (int gamma : groups) {
    std::vector<std::size_t> members;
    std::vector<double> support;
    for (std::size_t i = 0; i < b; ++i) {
      if (codes[i] == gamma) {
        members.push_back(i);
        support.push_back(diag[i]);
      }
    }
    const DiscreteDist group = DiscreteDist::uniform(std::move(support));
    const SinkhornResult r = sinkhorn(full, group, opts);
    out.per_group[gamma] = r.value;
    out.total += r.value;
    out.all_converged = out.all_converged && r.converged;
    if (!envelope_grad) continue;
    // d/du_i Σ P_ij (u_i - v_j)^2 and d/dv_j likewise, plan held fixed.
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < members.size(); ++j) {
        const double d = 2.0 * r.plan(i, j) * (full.support[i] - group.support[j]);
        out.grad_diag[i] += d;
        out.grad_diag[members[j]] -= d;
      }
    }
  }
  return out;
}

}  // namespace

double fairness_total_from_diagonal(std::span<const double> diag, std::span<const int> attr_codes,
                                    const SinkhornOptions& opts) {
  return fairness_from_diagonal(diag, attr_codes, opts, false).total;
}

FairnessTerm fairness_loss(const SimilarityMatrix& sim, std::span<const int> attr_codes,
                           const SinkhornOptions& opts, FairGradMode mode, bool with_grad) {
  const std::size_t b = sim.batch();
  std::vector<double> diag(b);
  for (std::size_t i = 0; i < b; ++i) diag[i] = sim.values(i, i);

  const bool envelope = with_grad && mode == FairGradMode::kEnvelope;
  FairnessTerm out = fairness_from_diagonal(diag, attr_codes, opts, envelope);
  if (with_grad && mode == FairGradMode::kFiniteDifference) {
    constexpr double h = 1e-5;
    out.grad_diag.assign(b, 0.0);
    std::vector<double> probe = diag;
    for (std::size_t i = 0; i < b; ++i) {
      probe[i] = diag[i] + h;
      const double up = fairness_total_from_diagonal(probe, attr_codes, opts);
      probe[i] = diag[i] - h;
      const double down = fairness_total_from_diagonal(probe, attr_codes, opts);
      probe[i] = diag[i];
      out.grad_diag[i] = (up - down) / (2.0 * h);
    }
  }
  return out;
}

std::vector<double> fairness_grad(const SimilarityMatrix& sim, std::span<const int> attr_codes,
                                  const SinkhornOptions& opts, FairGradMode mode) {
  return fairness_loss(sim, attr_codes, opts, mode, true).grad_diag;
}

}  // namespace rfclip
