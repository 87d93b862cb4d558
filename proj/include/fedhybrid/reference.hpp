#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "fedhybrid/metrics.hpp"
#include "fedhybrid/model.hpp"

namespace fedhybrid {

/// lambda' = lambda + beta1 grad g(lambda)
struct GradientAscentRule {
  double beta1 = 1.0;
};

/// lambda' = lambda + beta2 (-hess g(lambda))^-1 grad g(lambda)
struct NewtonRule {
  double beta2 = 1.0;
};

using DualRule = std::variant<GradientAscentRule, NewtonRule>;

struct MmStep {
  PrimalPoint inner;  // x~*(lambda)
  Blocks lambda;      // updated multipliers
};

/// One iteration of the method of multipliers with an exact inner solve.
MmStep mm_step(const Blocks& lambda, const ProblemInstance& problem, double mu,
               const DualRule& rule);

enum class FedAvgWeighting { SampleCount, Uniform };

struct FedAvgSnapshot {
  std::size_t k = 0;
  Vector omega;
  Blocks local;  // client models before averaging (omega at k = 0)
  std::uint64_t uplink_bytes = 0;
  std::uint64_t downlink_bytes = 0;
};

struct FedAvgOptions {
  double eta = 0.0;
  std::size_t local_steps = 1;
  FedAvgWeighting weighting = FedAvgWeighting::SampleCount;
  unsigned threads = 1;
  std::size_t cadence = 1;
  bool keep_snapshots = true;
  std::function<bool(const FedAvgSnapshot&)> hook;
};

struct FedAvgTrace {
  std::vector<FedAvgSnapshot> snapshots;
  FedAvgSnapshot last;
  bool stopped_early = false;
};

/// Full-gradient FedAvg: each round every client takes `local_steps`
/// gradient steps from omega, and the server averages the results.
FedAvgTrace fedavg_run(const ProblemInstance& problem,
                       const FedAvgOptions& options, std::size_t rounds,
                       const Vector& omega0);

}  // namespace fedhybrid
