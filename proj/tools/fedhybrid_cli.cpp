// Experiment runner: `fedhybrid run` writes traces, `fedhybrid verify`
// checks the convergence theory on a fresh run.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedhybrid/experiment.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> iters;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config, "experiment config file")->required();
  cmd->add_option("--seed", flags.seed, "override run.seed");
  cmd->add_option("--out", flags.out, "override output.dir");
  cmd->add_option("--iters", flags.iters, "override run.iters");
  cmd->add_option("--set", flags.sets, "extra key=value override (repeatable)");
}

fedhybrid::ExperimentConfig resolve(const Flags& flags) {
  auto config = fedhybrid::load_config(flags.config);
  for (const auto& s : flags.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw fedhybrid::ConfigError("--set expects key=value, got '" + s + "'", s);
    }
    fedhybrid::apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
  }
  if (flags.seed) fedhybrid::apply_setting(config, "run.seed", std::to_string(*flags.seed));
  if (flags.out) fedhybrid::apply_setting(config, "output.dir", *flags.out);
  if (flags.iters) fedhybrid::apply_setting(config, "run.iters", std::to_string(*flags.iters));
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FedHybrid consensus optimization experiments"};
  app.require_subcommand(1);
  Flags run_flags;
  Flags verify_flags;
  auto* run_cmd = app.add_subcommand("run", "run the configured methods and write traces");
  add_common(run_cmd, run_flags);
  auto* verify_cmd = app.add_subcommand("verify", "check curvature, Lemma 1 and descent bounds");
  add_common(verify_cmd, verify_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  const unsigned threads = fedhybrid::threads_from_env();
  try {
    if (*run_cmd) {
      const auto config = resolve(run_flags);
      fedhybrid::run_experiment(config, threads, std::cout);
      return 0;
    }
    const auto config = resolve(verify_flags);
    const auto report = fedhybrid::verify_experiment(config, threads);
    std::cout << report.to_text();
    return report.pass() ? 0 : 1;
  } catch (const fedhybrid::ConfigError& e) {
    std::cerr << "config error [" << e.key() << "]: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}
