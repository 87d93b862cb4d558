#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fedhybrid/metrics.hpp"
#include "fedhybrid/model.hpp"
#include "fedhybrid/simnet.hpp"

namespace fedhybrid {

enum class StepsizeMode { Auto, Manual };

/// Per-client stepsizes and update kinds.
struct StepsizePlan {
  std::vector<UpdateKind> kinds;
  std::vector<double> a;
  std::vector<double> b;
  StepsizeMode mode = StepsizeMode::Manual;

  std::size_t clients() const { return kinds.size(); }
};

/// Checked manual plan; throws InvalidArgument on non-positive or
/// mismatched entries.
StepsizePlan manual_plan(std::vector<UpdateKind> kinds, std::vector<double> a,
                         std::vector<double> b);

/// Kinds with the listed 0-based clients on Newton updates.
std::vector<UpdateKind> kinds_with_newton(std::size_t clients,
                                          const std::vector<std::size_t>& newton);

/// Largest stepsizes allowed by the convergence condition:
///   gradient a_i = 1 / (22 mu / 9 + 2 l),  Newton a_i = (m_i + mu) / (same)
///   b_i = min(mu / 9, alpha m^2 / 21), divided by (l_i + mu) on Newton
/// clients, where alpha = min(min_G a_i, min_N a_i / (l_i + mu)).
StepsizePlan safe_stepsizes(const std::vector<Curvature>& curvatures, double mu,
                            const std::vector<UpdateKind>& kinds);

struct RateConstants {
  double m = 0.0;
  double l = 0.0;
  double m_g = 0.0;      // 1 / (mu + l)
  double l_g = 0.0;      // 1 / mu
  double l_L = 0.0;      // l + mu
  double alpha_min = 0.0;
  double beta_min = 0.0;
  double beta = 0.0;
  double kappa = 0.0;    // 3 + 2 beta^2 / mu^2 + beta / mu
  double rho = 0.0;          // min(3 beta_min / (13 (mu + l)), m alpha / 2)
  double rho_theorem = 0.0;  // min(3 beta_min / (13 m + 13 mu), m alpha / 2)
};

RateConstants rate_rho(const StepsizePlan& plan,
                       const std::vector<Curvature>& curvatures, double mu);

/// r = grad f_i(x_i) - lambda_i + mu (x_i - x0); x_i -= a r;
/// lambda_i += b (x0 - x_i), all from the pre-update x_i.
ClientState gradient_client_step(const ClientState& state, const Vector& x0,
                                 double mu);

/// H = hess f_i(x_i) + mu I; x_i -= a H^-1 r; lambda_i += b H (x0 - x_i).
ClientState newton_client_step(const ClientState& state, const Vector& x0,
                               double mu);

/// Dispatch on state.kind.
ClientState client_step(const ClientState& state, const Vector& x0, double mu);

/// Iterate after k rounds plus cumulative communication.
struct Snapshot {
  std::size_t k = 0;
  Iterate state;
  std::uint64_t uplink_bytes = 0;
  std::uint64_t downlink_bytes = 0;
};

struct RunOptions {
  unsigned threads = 1;
  /// Snapshots at k = 0 and every multiple of `cadence`.
  std::size_t cadence = 1;
  bool keep_snapshots = true;
  /// Called on every snapshot; returning true stops the run.
  std::function<bool(const Snapshot&)> hook;
};

/// Client starting points; x0 defaults to the consensus update of them.
struct InitialState {
  Blocks x;
  Blocks lambda;
  std::optional<Vector> x0;

  static InitialState zeros(std::size_t clients, Eigen::Index dim);
};

struct RunTrace {
  std::vector<Snapshot> snapshots;
  Snapshot last;
  bool stopped_early = false;
};

/// Algorithm 1 for `iterations` rounds (>= 1).
RunTrace run(const ProblemInstance& problem, const StepsizePlan& plan,
             std::size_t iterations, const RunOptions& options = {},
             const std::optional<InitialState>& init = std::nullopt);

}  // namespace fedhybrid
