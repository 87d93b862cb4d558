#include "fedhybrid/simnet.hpp"

#include <algorithm>
#include <exception>
#include <numeric>
#include <thread>

namespace fedhybrid {

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& task) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, threads), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) task(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Vector consensus_update(const Blocks& x, const Blocks& lambda, double mu) {
  if (x.empty() || x.size() != lambda.size()) {
    throw DimensionMismatch("consensus_update: need n >= 1 matching blocks");
  }
  if (!(mu > 0.0)) throw InvalidArgument("consensus_update: mu must be > 0");
  const double n = static_cast<double>(x.size());
  Vector sx = Vector::Zero(x.front().size());
  Vector sl = Vector::Zero(x.front().size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sl += lambda[i];
  }
  return sx / n - sl / (mu * n);
}

Vector consensus_update(const std::vector<ClientState>& clients, double mu) {
  std::vector<const ClientState*> order(clients.size());
  for (std::size_t i = 0; i < clients.size(); ++i) order[i] = &clients[i];
  std::sort(order.begin(), order.end(),
            [](const ClientState* l, const ClientState* r) { return l->id < r->id; });
  Blocks x;
  Blocks lambda;
  x.reserve(clients.size());
  lambda.reserve(clients.size());
  for (const auto* c : order) {
    x.push_back(c->x);
    lambda.push_back(c->lambda);
  }
  return consensus_update(x, lambda, mu);
}

std::vector<ClientState> map_clients(const std::vector<ClientState>& clients,
                                     const StepFn& fn, const Vector& x0,
                                     double mu, unsigned threads) {
  std::vector<ClientState> out(clients.size());
  std::vector<std::exception_ptr> errors(clients.size());
  parallel_for(clients.size(), threads, [&](std::size_t i) {
    try {
      out[i] = fn(clients[i], x0, mu);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (std::size_t i = 0; i < clients.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw ClientStepError("client " + std::to_string(clients[i].id) +
                                ": " + e.what(),
                            clients[i].id);
    }
  }
  return out;
}

RoundResult run_round(const ServerState& server,
                      const std::vector<ClientState>& clients,
                      const StepFn& step, double mu, std::size_t round,
                      unsigned threads) {
  RoundResult result;
  const auto d = static_cast<std::uint64_t>(server.x0.size());
  const auto n = static_cast<std::uint64_t>(clients.size());
  result.log.round = round;
  result.log.broadcast = server.x0;
  result.log.broadcasts = 1;
  result.log.downlink_bytes = 8 * d * n;

  result.clients = map_clients(clients, step, server.x0, mu, threads);

  // each client uploads x_i and lambda_i
  result.log.uploads = clients.size();
  result.log.uplink_bytes = 2 * 8 * d * n;
  result.server.x0 = consensus_update(result.clients, mu);
  return result;
}

}  // namespace fedhybrid
