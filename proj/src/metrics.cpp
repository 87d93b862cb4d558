#include "fedhybrid/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace fedhybrid {

namespace {

void require_blocks(const ProblemInstance& problem, const Blocks& blocks,
                    const char* what) {
  if (blocks.size() != problem.clients()) {
    throw DimensionMismatch(std::string(what) + ": expected " +
                            std::to_string(problem.clients()) +
                            " blocks, got " + std::to_string(blocks.size()));
  }
  for (const auto& b : blocks) {
    if (b.size() != problem.dimension()) {
      throw DimensionMismatch(std::string(what) + ": block of length " +
                              std::to_string(b.size()) + ", expected " +
                              std::to_string(problem.dimension()));
    }
  }
}

Vector block_mean(const Blocks& v) {
  Vector s = Vector::Zero(v.front().size());
  for (const auto& b : v) s += b;
  return s / static_cast<double>(v.size());
}

}  // namespace

Blocks constraint_residual(const Vector& x0, const Blocks& x) {
  Blocks r;
  r.reserve(x.size());
  for (const auto& xi : x) r.push_back(x0 - xi);
  return r;
}

double aug_lagrangian(const ProblemInstance& problem, const Vector& x0,
                      const Blocks& x, const Blocks& lambda, double mu) {
  require_blocks(problem, x, "aug_lagrangian x");
  require_blocks(problem, lambda, "aug_lagrangian lambda");
  if (x0.size() != problem.dimension()) {
    throw DimensionMismatch("aug_lagrangian: server block has wrong length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Vector r = x0 - x[i];
    total += problem.objective(i).value(x[i]) + lambda[i].dot(r) +
             0.5 * mu * r.squaredNorm();
  }
  return total;
}

PrimalPoint aug_lagrangian_gradient(const ProblemInstance& problem,
                                    const Vector& x0, const Blocks& x,
                                    const Blocks& lambda, double mu) {
  PrimalPoint g;
  g.x0 = Vector::Zero(x0.size());
  g.x.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Vector r = x0 - x[i];
    g.x0 += lambda[i] + mu * r;
    g.x[i] = problem.objective(i).gradient(x[i]) - lambda[i] - mu * r;
  }
  return g;
}

Vector server_of(const Blocks& x, const Blocks& lambda, double mu) {
  const double n = static_cast<double>(x.size());
  Vector sx = Vector::Zero(x.front().size());
  Vector sl = Vector::Zero(x.front().size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sl += lambda[i];
  }
  return sx / n - sl / (mu * n);
}

double reduced_lagrangian(const ProblemInstance& problem, const Blocks& x,
                          const Blocks& lambda, double mu) {
  require_blocks(problem, x, "reduced_lagrangian x");
  require_blocks(problem, lambda, "reduced_lagrangian lambda");
  const double n = static_cast<double>(x.size());
  const Vector xbar = block_mean(x);
  const Vector lbar = block_mean(lambda);
  double f = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) f += problem.objective(i).value(x[i]);
  // l^T M x = l^T x - n <lbar, xbar>, x^T M x = ||x||^2 - n ||xbar||^2
  const double lmx = dot(lambda, x) - n * lbar.dot(xbar);
  const double xmx = squared_norm(x) - n * xbar.squaredNorm();
  const double lzl = n * lbar.squaredNorm();
  return f - lmx + 0.5 * mu * xmx - lzl / (2.0 * mu);
}

Blocks reduced_gradient(const ProblemInstance& problem, const Blocks& x,
                        const Blocks& lambda, double mu) {
  require_blocks(problem, x, "reduced_gradient x");
  require_blocks(problem, lambda, "reduced_gradient lambda");
  const Vector x0 = server_of(x, lambda, mu);
  Blocks g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    g[i] = problem.objective(i).gradient(x[i]) - lambda[i] + mu * (x[i] - x0);
  }
  return g;
}

// ---------------------------------------------------------------------------

DualOracle::DualOracle(const ProblemInstance& problem, double mu,
                       InnerSolveOptions options)
    : problem_(problem),
      mu_(mu),
      options_(options),
      quadratic_(problem.all_quadratic()) {
  if (!(mu > 0.0)) throw InvalidArgument("dual oracle: mu must be > 0");
  if (!quadratic_) return;
  const auto d = problem.dimension();
  const auto n = static_cast<double>(problem.clients());
  Matrix schur = mu * n * Matrix::Identity(d, d);
  client_factors_.reserve(problem.clients());
  for (std::size_t i = 0; i < problem.clients(); ++i) {
    Matrix h = problem.objective(i).hessian(Vector::Zero(d));
    h.diagonal().array() += mu;
    client_factors_.emplace_back(h);
    schur -= mu * mu * client_factors_.back().solve(Matrix(Matrix::Identity(d, d)));
  }
  schur = 0.5 * (schur + schur.transpose()).eval();
  schur_factor_ = SpdFactor(schur);
}

DualOracle::Gradient DualOracle::gradient(const PrimalPoint& point,
                                          const Blocks& lambda) const {
  Gradient out;
  out.grad.x0 = Vector::Zero(point.x0.size());
  out.grad.x.resize(point.x.size());
  double scale = 1.0 + std::sqrt(squared_norm(lambda));
  const auto& curv = problem_.curvatures();
  for (std::size_t i = 0; i < point.x.size(); ++i) {
    const Vector r = point.x0 - point.x[i];
    const Vector gi = problem_.objective(i).gradient(point.x[i]);
    out.grad.x0 += lambda[i] + mu_ * r;
    out.grad.x[i] = gi - lambda[i] - mu_ * r;
    scale += gi.norm() + curv[i].l * point.x[i].norm() + mu_ * r.norm();
  }
  out.norm = std::sqrt(out.grad.x0.squaredNorm() + squared_norm(out.grad.x));
  out.scale = scale;
  return out;
}

PrimalPoint DualOracle::newton_direction(const PrimalPoint& point,
                                         const PrimalPoint& grad) const {
  // Arrow system [[mu n I, -mu 1^T], [-mu 1, H_i]] [d0; d_i] = -[g0; g_i],
  // H_i = hess f_i + mu I. Eliminating d_i leaves
  //   (mu n I - mu^2 sum H_i^-1) d0 = -g0 - mu sum H_i^-1 g_i.
  const auto d = problem_.dimension();
  const std::size_t n = problem_.clients();
  std::vector<SpdFactor> local;
  const std::vector<SpdFactor>* factors = &client_factors_;
  SpdFactor local_schur;
  const SpdFactor* schur = &schur_factor_;
  if (!quadratic_) {
    local.reserve(n);
    Matrix s = mu_ * static_cast<double>(n) * Matrix::Identity(d, d);
    for (std::size_t i = 0; i < n; ++i) {
      Matrix h = problem_.objective(i).hessian(point.x[i]);
      h.diagonal().array() += mu_;
      local.emplace_back(h);
      s -= mu_ * mu_ * local.back().solve(Matrix(Matrix::Identity(d, d)));
    }
    s = 0.5 * (s + s.transpose()).eval();
    local_schur = SpdFactor(s);
    factors = &local;
    schur = &local_schur;
  }
  std::vector<Vector> hinv_g(n);
  Vector rhs = -grad.x0;
  for (std::size_t i = 0; i < n; ++i) {
    hinv_g[i] = (*factors)[i].solve(grad.x[i]);
    rhs -= mu_ * hinv_g[i];
  }
  PrimalPoint dir;
  dir.x0 = schur->solve(rhs);
  dir.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    dir.x[i] = (*factors)[i].solve(Vector(mu_ * dir.x0)) - hinv_g[i];
  }
  return dir;
}

PrimalPoint DualOracle::argmin(const Blocks& lambda,
                               const PrimalPoint* warm_start) const {
  require_blocks(problem_, lambda, "inner_argmin lambda");
  const auto d = problem_.dimension();
  PrimalPoint point;
  if (warm_start) {
    point = *warm_start;
  } else {
    point.x0 = Vector::Zero(d);
    point.x = zero_blocks(problem_.clients(), d);
  }
  Gradient g = gradient(point, lambda);
  double best = g.norm;
  int stalled = 0;
  for (int it = 0; it < options_.max_iterations; ++it) {
    if (g.norm <= options_.tol * g.scale) return point;
    const PrimalPoint dir = newton_direction(point, g.grad);
    double slope = dir.x0.dot(g.grad.x0) + dot(dir.x, g.grad.x);
    auto step_to = [&](double t) {
      PrimalPoint p{point.x0 + t * dir.x0, point.x};
      for (std::size_t i = 0; i < p.x.size(); ++i) p.x[i] += t * dir.x[i];
      return p;
    };
    PrimalPoint next = step_to(1.0);
    if (!quadratic_) {
      // Armijo backtracking; near the optimum value differences drown in
      // rounding, so a drop in the gradient norm at a value that did not
      // rise beyond rounding also accepts the step.
      const double f0 = aug_lagrangian(problem_, point.x0, point.x, lambda, mu_);
      double t = 1.0;
      for (int ls = 0; ls < 40; ++ls) {
        const double f1 = aug_lagrangian(problem_, next.x0, next.x, lambda, mu_);
        if (f1 <= f0 + 1e-4 * t * slope) break;
        if (f1 <= f0 + 1e-12 * (1.0 + std::abs(f0)) &&
            gradient(next, lambda).norm < (1.0 - 1e-4 * t) * g.norm) {
          break;
        }
        t *= 0.5;
        next = step_to(t);
      }
    }
    point = std::move(next);
    g = gradient(point, lambda);
    if (g.norm < best) {
      best = g.norm;
      stalled = 0;
    } else if (++stalled >= 8) {
      break;
    }
  }
  if (g.norm <= options_.tol * g.scale) return point;
  char msg[160];
  std::snprintf(msg, sizeof msg, "inner solve: gradient norm %.3e above tolerance %.3e",
                g.norm, options_.tol * g.scale);
  throw InnerSolveFailure(msg);
}

double DualOracle::value_at(const Blocks& lambda,
                            const PrimalPoint& minimizer) const {
  return aug_lagrangian(problem_, minimizer.x0, minimizer.x, lambda, mu_);
}

double DualOracle::value(const Blocks& lambda) const {
  return value_at(lambda, argmin(lambda));
}

PrimalPoint inner_argmin(const Blocks& lambda, const ProblemInstance& problem,
                         double mu, const InnerSolveOptions& options) {
  return DualOracle(problem, mu, options).argmin(lambda);
}

double dual_value(const Blocks& lambda, const ProblemInstance& problem,
                  double mu, const InnerSolveOptions& options) {
  return DualOracle(problem, mu, options).value(lambda);
}

// ---------------------------------------------------------------------------

OptimumCertificate kkt_optimum(const ProblemInstance& problem,
                               const OptimumOptions& options) {
  const auto d = problem.dimension();
  Vector omega = Vector::Zero(d);

  auto grad_and_scale = [&](const Vector& w, double& scale) {
    Vector g = Vector::Zero(d);
    scale = 1.0;
    for (const auto& obj : problem.objectives()) {
      const Vector gi = obj->gradient(w);
      g += gi;
      scale += gi.norm();
    }
    return g;
  };

  double scale = 1.0;
  Vector g = grad_and_scale(omega, scale);
  int it = 0;
  double best = g.norm();
  int stalled = 0;
  while (g.norm() > options.tol * scale) {
    if (it++ >= options.max_iterations || stalled >= 3) {
      throw SolverFailure("kkt_optimum: gradient norm " +
                          std::to_string(g.norm()) + " after " +
                          std::to_string(it - 1) + " Newton steps");
    }
    const Vector step = spd_solve(problem.total_hessian(omega), g);
    double t = 1.0;
    if (!problem.all_quadratic()) {
      const double f0 = problem.total_value(omega);
      const double slope = -g.dot(step);
      for (int ls = 0; ls < 40; ++ls) {
        const Vector trial = omega - t * step;
        const double f1 = problem.total_value(trial);
        if (f1 <= f0 + 1e-4 * t * slope) break;
        double s;
        if (f1 <= f0 + 1e-12 * (1.0 + std::abs(f0)) &&
            grad_and_scale(trial, s).norm() < (1.0 - 1e-4 * t) * g.norm()) {
          break;
        }
        t *= 0.5;
      }
    }
    omega -= t * step;
    g = grad_and_scale(omega, scale);
    if (g.norm() < 0.5 * best) {
      best = g.norm();
      stalled = 0;
    } else {
      ++stalled;
    }
  }

  OptimumCertificate cert;
  cert.omega = omega;
  cert.lambda.reserve(problem.clients());
  for (const auto& obj : problem.objectives()) {
    cert.lambda.push_back(obj->gradient(omega));
  }
  cert.f_star = problem.total_value(omega);
  cert.residual = g.norm();
  return cert;
}

// ---------------------------------------------------------------------------

MetricsEvaluator::MetricsEvaluator(const ProblemInstance& problem, double mu,
                                   OptimumCertificate certificate,
                                   InnerSolveOptions options)
    : problem_(problem),
      mu_(mu),
      cert_(std::move(certificate)),
      oracle_(problem, mu, options) {}

IterateRecord MetricsEvaluator::record(const Iterate& iterate,
                                       std::size_t k) const {
  IterateRecord rec;
  rec.k = k;
  const PrimalPoint inner = oracle_.argmin(iterate.lambda);
  const double g = oracle_.value_at(iterate.lambda, inner);
  const double lval =
      aug_lagrangian(problem_, iterate.x0, iterate.x, iterate.lambda, mu_);
  rec.delta_x = lval - g;
  rec.delta_lambda = cert_.f_star - g;
  rec.delta = kDualGapWeight * *rec.delta_lambda + *rec.delta_x;
  rec.consensus_err =
      std::sqrt(squared_norm(constraint_residual(iterate.x0, iterate.x)));
  rec.primal_grad_norm = std::sqrt(
      squared_norm(reduced_gradient(problem_, iterate.x, iterate.lambda, mu_)));
  rec.fun_gap = problem_.total_value(iterate.x0) - cert_.f_star;
  return rec;
}

IterateRecord MetricsEvaluator::primal_only(const Vector& omega,
                                            const Blocks& local_models,
                                            std::size_t k) const {
  IterateRecord rec;
  rec.k = k;
  rec.consensus_err = local_models.empty()
                          ? 0.0
                          : std::sqrt(squared_norm(
                                constraint_residual(omega, local_models)));
  rec.primal_grad_norm = problem_.total_gradient(omega).norm();
  rec.fun_gap = problem_.total_value(omega) - cert_.f_star;
  return rec;
}

IterateRecord tracking_errors(const Iterate& iterate,
                              const OptimumCertificate& certificate,
                              const ProblemInstance& problem, double mu) {
  return MetricsEvaluator(problem, mu, certificate).record(iterate);
}

}  // namespace fedhybrid
