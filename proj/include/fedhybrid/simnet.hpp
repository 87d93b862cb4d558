#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "fedhybrid/model.hpp"
#include "fedhybrid/numerics.hpp"

namespace fedhybrid {

enum class UpdateKind { Gradient, Newton };

/// One client's primal/dual pair and its update settings.
struct ClientState {
  std::size_t id = 0;  // position in the problem; fixes reduction order
  Vector x;
  Vector lambda;
  UpdateKind kind = UpdateKind::Gradient;
  double a = 0.0;
  double b = 0.0;
  ObjectivePtr objective;
};

struct ServerState {
  Vector x0;
};

/// Communication accounting for one round; every vector costs 8 d bytes.
struct RoundLog {
  std::size_t round = 0;
  Vector broadcast;
  std::size_t broadcasts = 0;
  std::size_t uploads = 0;
  std::uint64_t downlink_bytes = 0;
  std::uint64_t uplink_bytes = 0;
};

/// Pure per-client rule (state, x0, mu) -> new state.
using StepFn =
    std::function<ClientState(const ClientState&, const Vector&, double)>;

/// x0 = mean_i x_i - sum_i lambda_i / (mu n), summed by ascending id.
Vector consensus_update(const std::vector<ClientState>& clients, double mu);

/// Same reduction over bare blocks (block i belongs to client i).
Vector consensus_update(const Blocks& x, const Blocks& lambda, double mu);

struct RoundResult {
  ServerState server;
  std::vector<ClientState> clients;
  RoundLog log;
};

/// Apply `fn` to every client in parallel (results in input order), then
/// propagate the first failure, tagged with the client's id.
std::vector<ClientState> map_clients(const std::vector<ClientState>& clients,
                                     const StepFn& fn, const Vector& x0,
                                     double mu, unsigned threads);

/// One synchronous round: broadcast x0, update every client independently,
/// then reduce on the server. `threads` = 0 or 1 runs inline.
RoundResult run_round(const ServerState& server,
                      const std::vector<ClientState>& clients,
                      const StepFn& step, double mu, std::size_t round = 0,
                      unsigned threads = 1);

/// Run `task(i)` for i in [0, count) over up to `threads` workers.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& task);

}  // namespace fedhybrid
