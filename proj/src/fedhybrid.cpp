#include "fedhybrid/fedhybrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fedhybrid {

namespace {

Curvature global_of(const std::vector<Curvature>& curvatures) {
  Curvature g{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& c : curvatures) {
    g.m = std::min(g.m, c.m);
    g.l = std::max(g.l, c.l);
  }
  return g;
}

void check_plan(const StepsizePlan& plan, std::size_t clients) {
  if (plan.kinds.size() != clients || plan.a.size() != clients ||
      plan.b.size() != clients) {
    throw DimensionMismatch(
        "stepsize plan has " + std::to_string(plan.kinds.size()) + " kinds, " +
        std::to_string(plan.a.size()) + " a and " + std::to_string(plan.b.size()) +
        " b entries; problem has " + std::to_string(clients) + " clients");
  }
}

}  // namespace

StepsizePlan manual_plan(std::vector<UpdateKind> kinds, std::vector<double> a,
                         std::vector<double> b) {
  StepsizePlan plan{std::move(kinds), std::move(a), std::move(b),
                    StepsizeMode::Manual};
  if (plan.a.size() != plan.clients() || plan.b.size() != plan.clients()) {
    throw InvalidArgument("stepsize lists have " + std::to_string(plan.a.size()) +
                          " and " + std::to_string(plan.b.size()) +
                          " entries for " + std::to_string(plan.clients()) +
                          " clients");
  }
  for (std::size_t i = 0; i < plan.clients(); ++i) {
    if (!(plan.a[i] > 0.0) || !(plan.b[i] > 0.0) || !std::isfinite(plan.a[i]) ||
        !std::isfinite(plan.b[i])) {
      throw InvalidArgument("stepsizes of client " + std::to_string(i + 1) +
                            " must be positive and finite");
    }
  }
  return plan;
}

std::vector<UpdateKind> kinds_with_newton(
    std::size_t clients, const std::vector<std::size_t>& newton) {
  std::vector<UpdateKind> kinds(clients, UpdateKind::Gradient);
  for (auto i : newton) {
    if (i >= clients) {
      throw InvalidArgument("Newton client " + std::to_string(i + 1) +
                            " out of range 1.." + std::to_string(clients));
    }
    kinds[i] = UpdateKind::Newton;
  }
  return kinds;
}

StepsizePlan safe_stepsizes(const std::vector<Curvature>& curvatures, double mu,
                            const std::vector<UpdateKind>& kinds) {
  if (!(mu > 0.0)) throw InvalidArgument("safe_stepsizes: mu must be > 0");
  if (curvatures.empty() || curvatures.size() != kinds.size()) {
    throw DimensionMismatch("safe_stepsizes: curvature and kind counts differ");
  }
  for (std::size_t i = 0; i < curvatures.size(); ++i) {
    if (!(curvatures[i].m > 0.0)) {
      throw NotStronglyConvex("client " + std::to_string(i + 1) +
                              " has m_i = " + std::to_string(curvatures[i].m));
    }
  }
  const Curvature g = global_of(curvatures);
  const double denom = 22.0 * mu / 9.0 + 2.0 * g.l;
  const std::size_t n = curvatures.size();

  StepsizePlan plan;
  plan.kinds = kinds;
  plan.mode = StepsizeMode::Auto;
  plan.a.resize(n);
  plan.b.resize(n);
  double alpha = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (kinds[i] == UpdateKind::Gradient) {
      plan.a[i] = 1.0 / denom;
      alpha = std::min(alpha, plan.a[i]);
    } else {
      plan.a[i] = (curvatures[i].m + mu) / denom;
      alpha = std::min(alpha, plan.a[i] / (curvatures[i].l + mu));
    }
  }
  const double bcap = std::min(mu / 9.0, alpha * g.m * g.m / 21.0);
  for (std::size_t i = 0; i < n; ++i) {
    plan.b[i] = kinds[i] == UpdateKind::Gradient ? bcap
                                                 : bcap / (curvatures[i].l + mu);
  }
  return plan;
}

RateConstants rate_rho(const StepsizePlan& plan,
                       const std::vector<Curvature>& curvatures, double mu) {
  check_plan(plan, curvatures.size());
  const Curvature g = global_of(curvatures);
  RateConstants rc;
  rc.m = g.m;
  rc.l = g.l;
  rc.m_g = 1.0 / (mu + g.l);
  rc.l_g = 1.0 / mu;
  rc.l_L = g.l + mu;
  const double inf = std::numeric_limits<double>::infinity();
  rc.alpha_min = inf;
  rc.beta_min = inf;
  rc.beta = 0.0;
  for (std::size_t i = 0; i < plan.clients(); ++i) {
    const auto& c = curvatures[i];
    if (plan.kinds[i] == UpdateKind::Gradient) {
      rc.alpha_min = std::min(rc.alpha_min, plan.a[i]);
      rc.beta_min = std::min(rc.beta_min, plan.b[i]);
      rc.beta = std::max(rc.beta, plan.b[i]);
    } else {
      rc.alpha_min = std::min(rc.alpha_min, plan.a[i] / (c.l + mu));
      rc.beta_min = std::min(rc.beta_min, plan.b[i] * (c.m + mu));
      rc.beta = std::max(rc.beta, plan.b[i] * (c.l + mu));
    }
  }
  rc.kappa = 3.0 + 2.0 * rc.beta * rc.beta / (mu * mu) + rc.beta / mu;
  const double primal = g.m * rc.alpha_min / 2.0;
  rc.rho = std::min(3.0 * rc.beta_min / (13.0 * (mu + g.l)), primal);
  rc.rho_theorem = std::min(3.0 * rc.beta_min / (13.0 * g.m + 13.0 * mu), primal);
  return rc;
}

ClientState gradient_client_step(const ClientState& state, const Vector& x0,
                                 double mu) {
  const Vector r =
      state.objective->gradient(state.x) - state.lambda + mu * (state.x - x0);
  ClientState next = state;
  next.x = state.x - state.a * r;
  next.lambda = state.lambda + state.b * (x0 - state.x);
  return next;
}

ClientState newton_client_step(const ClientState& state, const Vector& x0,
                               double mu) {
  Matrix h = state.objective->hessian(state.x);
  h.diagonal().array() += mu;
  const Vector r =
      state.objective->gradient(state.x) - state.lambda + mu * (state.x - x0);
  ClientState next = state;
  next.x = state.x - state.a * spd_solve(h, r);
  next.lambda = state.lambda + state.b * (h * (x0 - state.x));
  return next;
}

ClientState client_step(const ClientState& state, const Vector& x0, double mu) {
  return state.kind == UpdateKind::Newton ? newton_client_step(state, x0, mu)
                                          : gradient_client_step(state, x0, mu);
}

InitialState InitialState::zeros(std::size_t clients, Eigen::Index dim) {
  return {zero_blocks(clients, dim), zero_blocks(clients, dim), std::nullopt};
}

RunTrace run(const ProblemInstance& problem, const StepsizePlan& plan,
             std::size_t iterations, const RunOptions& options,
             const std::optional<InitialState>& init) {
  if (iterations == 0) throw InvalidArgument("run: iterations must be >= 1");
  const std::size_t n = problem.clients();
  const auto d = problem.dimension();
  const double mu = problem.mu();
  check_plan(plan, n);
  const std::size_t cadence = std::max<std::size_t>(1, options.cadence);

  const InitialState start = init ? *init : InitialState::zeros(n, d);
  if (start.x.size() != n || start.lambda.size() != n) {
    throw DimensionMismatch("run: initial state has wrong client count");
  }
  std::vector<ClientState> clients(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (start.x[i].size() != d || start.lambda[i].size() != d) {
      throw DimensionMismatch("run: initial block of client " +
                              std::to_string(i + 1) + " has wrong length");
    }
    clients[i] = {i, start.x[i], start.lambda[i], plan.kinds[i],
                  plan.a[i], plan.b[i], problem.objective_ptr(i)};
  }
  ServerState server{start.x0 ? *start.x0 : consensus_update(clients, mu)};

  RunTrace trace;
  auto snapshot = [&](std::size_t k, std::uint64_t up, std::uint64_t down) {
    Snapshot s;
    s.k = k;
    s.state.x0 = server.x0;
    s.state.x.reserve(n);
    s.state.lambda.reserve(n);
    for (const auto& c : clients) {
      s.state.x.push_back(c.x);
      s.state.lambda.push_back(c.lambda);
    }
    s.uplink_bytes = up;
    s.downlink_bytes = down;
    return s;
  };
  auto emit = [&](Snapshot s) {
    const bool stop = options.hook && options.hook(s);
    if (options.keep_snapshots) trace.snapshots.push_back(s);
    trace.last = std::move(s);
    return stop;
  };

  const StepFn step = client_step;
  std::uint64_t up = 0;
  std::uint64_t down = 0;
  if (emit(snapshot(0, 0, 0))) {
    trace.stopped_early = true;
    return trace;
  }
  for (std::size_t k = 1; k <= iterations; ++k) {
    RoundResult round = run_round(server, clients, step, mu, k, options.threads);
    server = std::move(round.server);
    clients = std::move(round.clients);
    up += round.log.uplink_bytes;
    down += round.log.downlink_bytes;
    if (k % cadence == 0 || k == iterations) {
      if (emit(snapshot(k, up, down))) {
        trace.stopped_early = k < iterations;
        return trace;
      }
    }
  }
  return trace;
}

}  // namespace fedhybrid
