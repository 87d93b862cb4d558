#include "fedhybrid/reference.hpp"

#include <string>

#include "fedhybrid/simnet.hpp"

namespace fedhybrid {

namespace {

// (-hess g)^-1 r without forming the nd x nd matrix. With F_i the client
// Hessians at x~*(lambda), block elimination of W (hess L~)^-1 W^T gives
//   d_i = (F_i + mu I) r_i - F_i y,  y = (sum F_j)^-1 sum F_j r_j.
Blocks dual_newton_solve(const ProblemInstance& problem, const PrimalPoint& inner,
                         double mu, const Blocks& r) {
  const auto d = problem.dimension();
  std::vector<Matrix> f(problem.clients());
  Matrix total = Matrix::Zero(d, d);
  Vector weighted = Vector::Zero(d);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i] = problem.objective(i).hessian(inner.x[i]);
    total += f[i];
    weighted += f[i] * r[i];
  }
  const Vector y = spd_solve(total, weighted);
  Blocks out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    out[i] = f[i] * (r[i] - y) + mu * r[i];
  }
  return out;
}

}  // namespace

MmStep mm_step(const Blocks& lambda, const ProblemInstance& problem, double mu,
               const DualRule& rule) {
  if (!(mu > 0.0)) throw InvalidArgument("mm_step: mu must be > 0");
  MmStep out;
  out.inner = inner_argmin(lambda, problem, mu);
  const Vector grad = stack(constraint_residual(out.inner.x0, out.inner.x));
  const Vector l = stack(lambda);
  Vector next;
  if (const auto* ga = std::get_if<GradientAscentRule>(&rule)) {
    next = l + ga->beta1 * grad;
  } else {
    const double beta2 = std::get<NewtonRule>(rule).beta2;
    next = l + beta2 * stack(dual_newton_solve(problem, out.inner, mu,
                                               constraint_residual(out.inner.x0, out.inner.x)));
  }
  out.lambda = unstack(next, problem.clients(), problem.dimension());
  return out;
}

FedAvgTrace fedavg_run(const ProblemInstance& problem,
                       const FedAvgOptions& options, std::size_t rounds,
                       const Vector& omega0) {
  if (!(options.eta >= 0.0)) throw InvalidArgument("fedavg: eta must be >= 0");
  if (options.local_steps < 1) {
    throw InvalidArgument("fedavg: local_steps must be >= 1");
  }
  if (omega0.size() != problem.dimension()) {
    throw DimensionMismatch("fedavg: initial model has wrong length");
  }
  const std::size_t n = problem.clients();
  const auto d = static_cast<std::uint64_t>(problem.dimension());
  std::vector<double> weights(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = options.weighting == FedAvgWeighting::SampleCount
                     ? static_cast<double>(problem.objective(i).sample_count())
                     : 1.0;
    total += weights[i];
  }
  for (auto& w : weights) w /= total;

  const std::size_t cadence = std::max<std::size_t>(1, options.cadence);
  FedAvgTrace trace;
  auto emit = [&](FedAvgSnapshot s) {
    const bool stop = options.hook && options.hook(s);
    if (options.keep_snapshots) trace.snapshots.push_back(s);
    trace.last = std::move(s);
    return stop;
  };

  Vector omega = omega0;
  std::uint64_t up = 0;
  std::uint64_t down = 0;
  if (emit({0, omega, Blocks(n, omega), 0, 0})) {
    trace.stopped_early = true;
    return trace;
  }
  Blocks local(n);
  for (std::size_t k = 1; k <= rounds; ++k) {
    parallel_for(n, options.threads, [&](std::size_t i) {
      Vector x = omega;
      for (std::size_t e = 0; e < options.local_steps; ++e) {
        x -= options.eta * problem.objective(i).gradient(x);
      }
      local[i] = std::move(x);
    });
    Vector next = Vector::Zero(omega.size());
    for (std::size_t i = 0; i < n; ++i) next += weights[i] * local[i];
    omega = std::move(next);
    down += 8 * d * n;
    up += 8 * d * n;
    if (k % cadence == 0 || k == rounds) {
      if (emit({k, omega, local, up, down})) {
        trace.stopped_early = k < rounds;
        return trace;
      }
    }
  }
  return trace;
}

}  // namespace fedhybrid
