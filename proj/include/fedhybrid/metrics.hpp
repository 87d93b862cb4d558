#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "fedhybrid/model.hpp"
#include "fedhybrid/numerics.hpp"

namespace fedhybrid {

/// Server block plus client blocks, x~ = (x0, x_1, ..., x_n).
struct PrimalPoint {
  Vector x0;
  Blocks x;
};

/// Full primal-dual state of the consensus problem.
struct Iterate {
  Vector x0;
  Blocks x;
  Blocks lambda;

  PrimalPoint primal() const { return {x0, x}; }
};

/// Constraint residual W x~: block i is x0 - x_i.
Blocks constraint_residual(const Vector& x0, const Blocks& x);

/// sum f_i(x_i) + sum <lambda_i, x0 - x_i> + (mu/2) sum ||x0 - x_i||^2.
/// mu = 0 gives the plain Lagrangian.
double aug_lagrangian(const ProblemInstance& problem, const Vector& x0,
                      const Blocks& x, const Blocks& lambda, double mu);

/// Gradient of the augmented Lagrangian in (x0, x).
PrimalPoint aug_lagrangian_gradient(const ProblemInstance& problem,
                                    const Vector& x0, const Blocks& x,
                                    const Blocks& lambda, double mu);

/// Server value x0(x, lambda) = mean x_i - sum lambda_i / (mu n).
Vector server_of(const Blocks& x, const Blocks& lambda, double mu);

/// The Lagrangian with x0 eliminated by the consensus update:
///   L(x, l) = f(x) - l^T M x + (mu/2) x^T M x - l^T Z l / (2 mu),
/// Z block averaging, M = I - Z, both applied structurally.
double reduced_lagrangian(const ProblemInstance& problem, const Blocks& x,
                          const Blocks& lambda, double mu);

/// grad_x L(x, l) = grad f(x) - M l + mu M x.
Blocks reduced_gradient(const ProblemInstance& problem, const Blocks& x,
                        const Blocks& lambda, double mu);

struct InnerSolveOptions {
  /// Stop when ||grad L~|| <= tol * scale, scale = 1 + ||lambda|| +
  /// sum_i (||grad f_i(x_i)|| + l_i ||x_i||) + mu sum_i ||x0 - x_i||.
  double tol = 1e-12;
  int max_iterations = 100;
};

/// Minimizer of the augmented Lagrangian over x~ for fixed multipliers.
///
/// Newton's method on the arrow-shaped Hessian, eliminating client blocks
/// so only a d x d Schur complement is factorized on the server block.
/// For all-quadratic problems the client and Schur factors are cached and
/// a single step (plus refinement) is exact.
class DualOracle {
 public:
  DualOracle(const ProblemInstance& problem, double mu,
             InnerSolveOptions options = {});

  PrimalPoint argmin(const Blocks& lambda,
                     const PrimalPoint* warm_start = nullptr) const;
  /// g(lambda) = L~(x~*(lambda), lambda)
  double value(const Blocks& lambda) const;
  double value_at(const Blocks& lambda, const PrimalPoint& minimizer) const;

  const ProblemInstance& problem() const { return problem_; }
  double mu() const { return mu_; }

 private:
  struct Gradient {
    PrimalPoint grad;
    double norm = 0.0;
    double scale = 0.0;
  };
  Gradient gradient(const PrimalPoint& point, const Blocks& lambda) const;
  PrimalPoint newton_direction(const PrimalPoint& point,
                               const PrimalPoint& grad) const;

  ProblemInstance problem_;
  double mu_;
  InnerSolveOptions options_;
  bool quadratic_;
  std::vector<SpdFactor> client_factors_;
  SpdFactor schur_factor_;
};

PrimalPoint inner_argmin(const Blocks& lambda, const ProblemInstance& problem,
                         double mu, const InnerSolveOptions& options = {});

double dual_value(const Blocks& lambda, const ProblemInstance& problem,
                  double mu, const InnerSolveOptions& options = {});

/// Primal optimum omega* of sum f_i and the matching multipliers
/// lambda_i* = grad f_i(omega*).
struct OptimumCertificate {
  Vector omega;
  Blocks lambda;
  double f_star = 0.0;
  double residual = 0.0;  // ||sum_i grad f_i(omega*)||
};

struct OptimumOptions {
  double tol = 1e-12;  // relative to 1 + sum_i ||grad f_i(omega)||
  int max_iterations = 200;
};

/// Centralized damped Newton on sum f_i.
OptimumCertificate kkt_optimum(const ProblemInstance& problem,
                               const OptimumOptions& options = {});

/// One trace row.
struct IterateRecord {
  std::size_t k = 0;
  std::optional<double> delta_lambda;
  std::optional<double> delta_x;
  std::optional<double> delta;  // 13 delta_lambda + delta_x
  double consensus_err = 0.0;   // ||W x~||
  double primal_grad_norm = 0.0;
  double fun_gap = 0.0;  // sum f_i(x0) - f*
  std::optional<double> elapsed_ms;
  std::uint64_t uplink_bytes = 0;
  std::uint64_t downlink_bytes = 0;
};

/// Weight of the dual gap in the combined error.
inline constexpr double kDualGapWeight = 13.0;

/// Metric evaluation bound to one problem and certificate; reuses the
/// cached inner-solve factors across trace rows.
class MetricsEvaluator {
 public:
  MetricsEvaluator(const ProblemInstance& problem, double mu,
                   OptimumCertificate certificate,
                   InnerSolveOptions options = {});

  IterateRecord record(const Iterate& iterate, std::size_t k = 0) const;
  /// Rows without dual quantities (FedAvg): fun_gap, ||sum grad f_i(omega)||
  /// and the spread of the local models around omega.
  IterateRecord primal_only(const Vector& omega, const Blocks& local_models,
                            std::size_t k = 0) const;

  const DualOracle& oracle() const { return oracle_; }
  const OptimumCertificate& certificate() const { return cert_; }

 private:
  ProblemInstance problem_;
  double mu_;
  OptimumCertificate cert_;
  DualOracle oracle_;
};

/// Delta_x, Delta_lambda and their combination for one iterate.
IterateRecord tracking_errors(const Iterate& iterate,
                              const OptimumCertificate& certificate,
                              const ProblemInstance& problem, double mu);

}  // namespace fedhybrid
