#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fedhybrid/fedhybrid.hpp"
#include "fedhybrid/metrics.hpp"

namespace fedhybrid {

/// Constraint matrix W = (1_n, -I_n) (x) I_d, materialized for oracle use.
Matrix constraint_matrix(std::size_t clients, Eigen::Index dim);

/// Hessian of the augmented Lagrangian on the (n + 1) d stacked point
/// (x0, x_1, ..., x_n).
Matrix lagrangian_hessian(const ProblemInstance& problem, const PrimalPoint& point,
                          double mu);

/// grad g(lambda) = W x~*(lambda), stacked by client.
Vector dual_grad_formula(const Blocks& lambda, const ProblemInstance& problem,
                         double mu);

/// hess g(lambda) = -W (hess L~(x~*(lambda)))^-1 W^T, nd x nd.
Matrix dual_hessian_formula(const Blocks& lambda, const ProblemInstance& problem,
                            double mu);

/// Approximate dual Newton direction -(hess f_i(x_i) + mu I)(x0 - x_i),
/// stacked by client.
Vector approx_dual_newton_dir(const PrimalPoint& point,
                              const ProblemInstance& problem, double mu);

/// Hessian-weighted average y = (sum hess f_i(x_i))^-1 sum hess f_i(x_i) x_i.
Vector hessian_weighted_average(const PrimalPoint& point,
                                const ProblemInstance& problem);

/// Direction solving -W (hess L~(x~))^-1 W^T d = W x~, stacked by client.
Vector exact_dual_newton_dir(const PrimalPoint& point,
                             const ProblemInstance& problem, double mu);

/// One named check over a sequence of points.
struct CheckResult {
  std::string name;
  bool pass = true;
  std::optional<std::size_t> first_violation;
  /// Largest lhs - rhs seen (before slack); <= 0 when the bound is strict.
  double max_excess = -std::numeric_limits<double>::infinity();
  double slack = 0.0;
  std::size_t checked = 0;

  void observe(std::size_t index, double excess);
};

struct Report {
  std::vector<CheckResult> checks;

  bool pass() const;
  std::string to_text() const;
  const CheckResult* find(const std::string& name) const;
};

struct MonitorOptions {
  /// Additive slack as a multiple of Delta^0.
  double relative_slack = 1e-9;
  /// Extra absolute slack as a multiple of 1 + |f*| for rounding.
  double rounding_slack = 1e-12;
  unsigned threads = 1;
};

/// Per-iteration descent inequalities and contraction along a trace whose
/// snapshots are consecutive rounds. Rows: lemma3, lemma4, lemma_mx,
/// theorem1, lemma_b1, lemma_b2.
Report descent_monitors(const std::vector<Snapshot>& trace,
                        const StepsizePlan& plan, const RateConstants& rc,
                        const ProblemInstance& problem,
                        const OptimumCertificate& certificate,
                        const MonitorOptions& options = {});

/// Spectra of -hess g at random multipliers and of hess_xx L at random
/// points against [1/(mu+l), 1/mu] and [m, l+mu].
Report curvature_check(const ProblemInstance& problem, double mu,
                       std::size_t samples, std::uint64_t seed,
                       double tol = 1e-8);

/// Central differences of g along random directions against the Lemma 1
/// gradient and Hessian formulas.
Report lemma1_check(const ProblemInstance& problem, double mu,
                    std::size_t samples, std::uint64_t seed);

}  // namespace fedhybrid
