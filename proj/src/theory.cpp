#include "fedhybrid/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fedhybrid/data.hpp"
#include "fedhybrid/simnet.hpp"

namespace fedhybrid {

namespace {

Matrix shifted_hessian(const Objective& f, const Vector& x, double mu) {
  Matrix h = f.hessian(x);
  h.diagonal().array() += mu;
  return h;
}

Blocks random_blocks(Rng& rng, std::size_t count, Eigen::Index dim) {
  Blocks out(count, Vector(dim));
  for (auto& b : out) {
    for (Eigen::Index j = 0; j < dim; ++j) b[j] = rng.normal();
  }
  return out;
}

Vector random_unit(Rng& rng, Eigen::Index size) {
  Vector v(size);
  for (Eigen::Index j = 0; j < size; ++j) v[j] = rng.normal();
  return v / v.norm();
}

Vector stacked_residual(const PrimalPoint& p) {
  return stack(constraint_residual(p.x0, p.x));
}

/// hess_xx L(x, lambda) = blockdiag(hess f_i(x_i)) + mu (I - Z).
Matrix reduced_hessian(const ProblemInstance& problem, const Blocks& x,
                       double mu) {
  const auto n = static_cast<Eigen::Index>(problem.clients());
  const auto d = problem.dimension();
  Matrix h = Matrix::Zero(n * d, n * d);
  const Matrix eye = Matrix::Identity(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    h.block(i * d, i * d, d, d) =
        problem.objective(static_cast<std::size_t>(i)).hessian(x[i]) + mu * eye;
    for (Eigen::Index j = 0; j < n; ++j) {
      h.block(i * d, j * d, d, d) -= (mu / static_cast<double>(n)) * eye;
    }
  }
  return h;
}

}  // namespace

Matrix constraint_matrix(std::size_t clients, Eigen::Index dim) {
  const auto n = static_cast<Eigen::Index>(clients);
  Matrix w = Matrix::Zero(n * dim, (n + 1) * dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    w.block(i * dim, 0, dim, dim).setIdentity();
    w.block(i * dim, (i + 1) * dim, dim, dim) = -Matrix::Identity(dim, dim);
  }
  return w;
}

Matrix lagrangian_hessian(const ProblemInstance& problem,
                          const PrimalPoint& point, double mu) {
  const auto n = static_cast<Eigen::Index>(problem.clients());
  const auto d = problem.dimension();
  Matrix h = Matrix::Zero((n + 1) * d, (n + 1) * d);
  const Matrix eye = Matrix::Identity(d, d);
  h.topLeftCorner(d, d) = mu * static_cast<double>(n) * eye;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = (i + 1) * d;
    h.block(0, c, d, d) = -mu * eye;
    h.block(c, 0, d, d) = -mu * eye;
    h.block(c, c, d, d) = shifted_hessian(
        problem.objective(static_cast<std::size_t>(i)), point.x[i], mu);
  }
  return h;
}

Vector dual_grad_formula(const Blocks& lambda, const ProblemInstance& problem,
                         double mu) {
  return stacked_residual(inner_argmin(lambda, problem, mu));
}

Matrix dual_hessian_formula(const Blocks& lambda, const ProblemInstance& problem,
                            double mu) {
  const PrimalPoint inner = inner_argmin(lambda, problem, mu);
  const Matrix w = constraint_matrix(problem.clients(), problem.dimension());
  const SpdFactor h(lagrangian_hessian(problem, inner, mu));
  Matrix out = -(w * h.solve(Matrix(w.transpose())));
  return 0.5 * (out + out.transpose());
}

Vector approx_dual_newton_dir(const PrimalPoint& point,
                              const ProblemInstance& problem, double mu) {
  Blocks dir(point.x.size());
  for (std::size_t i = 0; i < point.x.size(); ++i) {
    dir[i] = -(shifted_hessian(problem.objective(i), point.x[i], mu) *
               (point.x0 - point.x[i]));
  }
  return stack(dir);
}

Vector hessian_weighted_average(const PrimalPoint& point,
                                const ProblemInstance& problem) {
  const auto d = problem.dimension();
  Matrix total = Matrix::Zero(d, d);
  Vector weighted = Vector::Zero(d);
  for (std::size_t i = 0; i < point.x.size(); ++i) {
    const Matrix h = problem.objective(i).hessian(point.x[i]);
    total += h;
    weighted += h * point.x[i];
  }
  return spd_solve(total, weighted);
}

Vector exact_dual_newton_dir(const PrimalPoint& point,
                             const ProblemInstance& problem, double mu) {
  const Matrix w = constraint_matrix(problem.clients(), problem.dimension());
  const SpdFactor h(lagrangian_hessian(problem, point, mu));
  Matrix s = w * h.solve(Matrix(w.transpose()));
  s = 0.5 * (s + s.transpose()).eval();
  return -spd_solve(s, stacked_residual(point));
}

// ---------------------------------------------------------------------------

void CheckResult::observe(std::size_t index, double excess) {
  ++checked;
  if (!(excess <= max_excess)) max_excess = excess;
  // NaN counts as a violation
  if (!(excess <= slack) && !first_violation) {
    first_violation = index;
    pass = false;
  }
}

bool Report::pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.pass; });
}

const CheckResult* Report::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::string Report::to_text() const {
  std::ostringstream out;
  char buf[256];
  for (const auto& c : checks) {
    std::snprintf(buf, sizeof buf, "%-12s %s checked=%zu max_excess=%.6e slack=%.6e",
                  c.name.c_str(), c.pass ? "PASS" : "FAIL", c.checked,
                  c.max_excess, c.slack);
    out << buf;
    if (c.first_violation) out << " first_violation=" << *c.first_violation;
    out << '\n';
  }
  out << "overall " << (pass() ? "PASS" : "FAIL") << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {

struct StepQuantities {
  IterateRecord record;
  double grad_g_bd = 0.0;     // ||grad g(lambda^k)||^2_{BD^k}
  double grad_l_sq = 0.0;     // ||grad_x L(x^k, lambda^k)||^2
  double grad_l_p = 0.0;      // ||grad_x L||^2_{P^k}
  double mx_lhs = 0.0;        // ||W x~^k - W x~*(lambda^k)||^2_{BD^k}
  double b1_excess = 0.0;     // relative, max over the Lemma B.1 bounds
  double q_min = 0.0;         // theta_min(Q^k)
};

double relative_excess(double lhs, double rhs) {
  return (lhs - rhs) / std::max(std::abs(rhs), 1e-300);
}

StepQuantities step_quantities(const Snapshot& snap, const StepsizePlan& plan,
                               const RateConstants& rc,
                               const ProblemInstance& problem,
                               const MetricsEvaluator& metrics) {
  const double mu = problem.mu();
  const auto d = problem.dimension();
  const Matrix eye = Matrix::Identity(d, d);
  const Iterate& it = snap.state;

  StepQuantities q;
  q.record = metrics.record(it, snap.k);
  const PrimalPoint inner = metrics.oracle().argmin(it.lambda);
  const Blocks grad_l = reduced_gradient(problem, it.x, it.lambda, mu);
  q.grad_l_sq = squared_norm(grad_l);

  const double m2 = rc.m * rc.m;
  const double p_shift = rc.beta * rc.kappa / m2;
  const double q_shift = (6.0 + 12.0 * rc.beta * rc.l_g) * rc.beta / m2;
  double ad_norm = 0.0;
  double ad_min = std::numeric_limits<double>::infinity();
  double bd_min = std::numeric_limits<double>::infinity();
  q.q_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < problem.clients(); ++i) {
    const bool newton = plan.kinds[i] == UpdateKind::Newton;
    const Matrix di = newton ? shifted_hessian(problem.objective(i), it.x[i], mu)
                             : Matrix(eye);
    const Matrix di_inv = newton ? SpdFactor(di).solve(Matrix(eye)) : Matrix(eye);
    const double a = plan.a[i];
    const double b = plan.b[i];

    const Vector gg = inner.x0 - inner.x[i];
    q.grad_g_bd += b * gg.dot(di * gg);
    const Vector gap = (it.x0 - it.x[i]) - gg;
    q.mx_lhs += b * gap.dot(di * gap);

    Matrix p = a * di_inv - (rc.beta + rc.l_L / 2.0) * a * a * (di_inv * di_inv) -
               p_shift * eye;
    p = 0.5 * (p + p.transpose()).eval();
    q.grad_l_p += grad_l[i].dot(p * grad_l[i]);
    q.q_min = std::min(q.q_min, eig_extremes(p - q_shift * eye).min);

    const EigenExtremes de = eig_extremes(di);
    ad_norm = std::max(ad_norm, a / de.min);
    ad_min = std::min(ad_min, a / de.max);
    bd_min = std::min(bd_min, b * de.min);
  }
  q.b1_excess = std::max(
      {relative_excess(rc.beta, std::min(mu / 9.0, rc.alpha_min * m2 / 21.0)),
       relative_excess(ad_norm, 1.0 / (2.0 * (2.0 * rc.beta + rc.l_L))),
       relative_excess(rc.alpha_min, ad_min),
       relative_excess(rc.beta_min, bd_min)});
  return q;
}

}  // namespace

Report descent_monitors(const std::vector<Snapshot>& trace,
                        const StepsizePlan& plan, const RateConstants& rc,
                        const ProblemInstance& problem,
                        const OptimumCertificate& certificate,
                        const MonitorOptions& options) {
  const MetricsEvaluator metrics(problem, problem.mu(), certificate);
  std::vector<StepQuantities> q(trace.size());
  parallel_for(trace.size(), options.threads, [&](std::size_t j) {
    q[j] = step_quantities(trace[j], plan, rc, problem, metrics);
  });

  Report report;
  const double delta0 = trace.empty() ? 0.0 : std::max(0.0, *q.front().record.delta);
  const double slack = options.relative_slack * delta0 +
                       options.rounding_slack * (1.0 + std::abs(certificate.f_star));
  const double rel_slack = 1e-12;
  auto make = [](const char* name, double s) {
    CheckResult c;
    c.name = name;
    c.slack = s;
    return c;
  };
  CheckResult lemma3 = make("lemma3", slack);
  CheckResult lemma4 = make("lemma4", slack);
  CheckResult mx = make("lemma_mx", slack);
  CheckResult theorem = make("theorem1", slack);
  CheckResult b1 = make("lemma_b1", rel_slack);
  CheckResult b2 = make("lemma_b2", rel_slack);

  const double bl = rc.beta * rc.l_g;
  const double kappa_bound =
      relative_excess(rc.kappa + 12.0 * rc.l_g * rc.beta, 4.5);
  for (std::size_t j = 0; j < trace.size(); ++j) {
    const auto& cur = q[j];
    const std::size_t k = trace[j].k;
    mx.observe(k, cur.mx_lhs - rc.beta / (rc.m * rc.m) * cur.grad_l_sq);
    b1.observe(k, cur.b1_excess);
    b2.observe(k, std::max(kappa_bound,
                           relative_excess(rc.alpha_min / 4.0, cur.q_min)));
    if (j + 1 >= trace.size() || trace[j + 1].k != k + 1) continue;
    const auto& nxt = q[j + 1].record;
    const double dl = *cur.record.delta_lambda;
    const double dx = *cur.record.delta_x;
    const double rhs3 = dl - (0.5 - bl) * cur.grad_g_bd +
                        (0.5 + bl) * rc.beta / (rc.m * rc.m) * cur.grad_l_sq;
    lemma3.observe(k, *nxt.delta_lambda - rhs3);
    const double rhs4 = dx + rc.kappa * cur.grad_g_bd - cur.grad_l_p + dl -
                        *nxt.delta_lambda;
    lemma4.observe(k, *nxt.delta_x - rhs4);
    theorem.observe(k, *nxt.delta - (1.0 - rc.rho) * *cur.record.delta);
  }
  report.checks = {lemma3, lemma4, mx, theorem, b1, b2};
  return report;
}

Report curvature_check(const ProblemInstance& problem, double mu,
                       std::size_t samples, std::uint64_t seed, double tol) {
  if (samples == 0) throw InvalidArgument("curvature_check: samples must be >= 1");
  const Curvature g = problem.global_curvature();
  const std::size_t n = problem.clients();
  const auto d = problem.dimension();
  const std::size_t draws = problem.all_quadratic() ? 1 : samples;
  Rng rng(seed, 7);

  CheckResult dual;
  dual.name = "dual_curv";
  dual.slack = tol;
  CheckResult primal;
  primal.name = "primal_curv";
  primal.slack = tol;
  for (std::size_t s = 0; s < samples; ++s) {
    const Blocks lambda = random_blocks(rng, n, d);
    const Blocks x = random_blocks(rng, n, d);
    if (s >= draws) continue;
    const EigenExtremes eg =
        eig_extremes(-dual_hessian_formula(lambda, problem, mu));
    dual.observe(s, std::max(1.0 / (mu + g.l) - eg.min, eg.max - 1.0 / mu));
    const EigenExtremes el = eig_extremes(reduced_hessian(problem, x, mu));
    primal.observe(s, std::max(g.m - el.min, el.max - (g.l + mu)));
  }
  return Report{{dual, primal}};
}

Report lemma1_check(const ProblemInstance& problem, double mu,
                    std::size_t samples, std::uint64_t seed) {
  const std::size_t n = problem.clients();
  const auto d = problem.dimension();
  const DualOracle oracle(problem, mu);
  Rng rng(seed, 11);
  CheckResult grad;
  grad.name = "lemma1_grad";
  grad.slack = 0.0;
  CheckResult hess;
  hess.name = "lemma1_hess";
  hess.slack = 0.0;
  const double hg = 1e-4;
  const double hh = kFiniteDiffStep;
  for (std::size_t s = 0; s < samples; ++s) {
    const Blocks lambda = random_blocks(rng, n, d);
    const Vector v = random_unit(rng, static_cast<Eigen::Index>(n) * d);
    const Vector l = stack(lambda);
    auto shifted = [&](double t) { return unstack(l + t * v, n, d); };

    const Vector gr = dual_grad_formula(lambda, problem, mu);
    const double fd = (oracle.value(shifted(hg)) - oracle.value(shifted(-hg))) /
                      (2.0 * hg);
    grad.observe(s, std::abs(fd - gr.dot(v)) - 1e-6 * (1.0 + gr.norm()));

    const Vector hv = dual_hessian_formula(lambda, problem, mu) * v;
    const Vector fdh = (dual_grad_formula(shifted(hh), problem, mu) -
                        dual_grad_formula(shifted(-hh), problem, mu)) /
                       (2.0 * hh);
    hess.observe(s, (fdh - hv).norm() - 1e-5 * (1.0 + hv.norm()));
  }
  return Report{{grad, hess}};
}

}  // namespace fedhybrid
