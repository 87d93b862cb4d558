#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedhybrid/fedhybrid.hpp"
#include "fedhybrid/metrics.hpp"
#include "fedhybrid/reference.hpp"
#include "fedhybrid/theory.hpp"

namespace fedhybrid {

/// Experiment settings read from a flat `section.key = value` file.
struct ExperimentConfig {
  std::string kind = "linreg";  // linreg | logreg
  std::string source = "synthetic";  // synthetic | csv:<path>
  std::size_t n = 20;
  Eigen::Index d = 30;
  double rho = 0.1;
  double mu = 9.0;
  double noise = 0.5;
  std::string target;
  bool normalize = true;
  bool intercept = true;

  std::string partition = "auto";  // auto | lognormal | sorted | label_skew
  std::optional<std::vector<std::size_t>> skew;  // zeros, ones, mixed

  std::string stepsize_mode = "auto";  // auto | manual
  std::vector<double> a_i;
  std::vector<double> b_i;
  std::optional<double> a_gradient;
  std::optional<double> b_gradient;
  std::optional<double> a_newton;
  std::optional<double> b_newton;
  std::vector<std::size_t> newton;  // 1-based client indices

  std::size_t iters = 500;
  double tol = 0.0;  // 0 disables early stopping
  std::uint64_t seed = 1;
  std::size_t metric_cadence = 1;

  std::string output_dir = "out";
  bool timing = false;

  std::vector<std::string> methods{"fedh"};

  std::optional<double> fedavg_eta;
  std::size_t fedavg_local_steps = 1;
  std::string fedavg_weighting = "samples";  // samples | uniform

  std::string mm_rule = "newton";  // newton | gradient
  double mm_beta = 1.0;

  std::size_t verify_samples = 10;
  std::size_t verify_lemma1_samples = 3;

  /// Directory relative csv paths are resolved against (the config's).
  std::filesystem::path base_dir;

  /// Every key with its current value, in file order of the key table.
  std::vector<std::pair<std::string, std::string>> resolved() const;
};

/// Set one key from its text value; throws ConfigError naming the key.
void apply_setting(ExperimentConfig& config, const std::string& key,
                   const std::string& value);

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Problem described by the configuration (data, partition, objectives).
ProblemInstance build_problem(const ExperimentConfig& config);

enum class MethodFamily { FedHybrid, FedAvg, MethodOfMultipliers };

struct MethodSpec {
  std::string name;
  MethodFamily family = MethodFamily::FedHybrid;
  std::vector<UpdateKind> kinds;
};

/// fedh-g, fedh-n, fedh (clients.newton), fedh-<K> (first K Newton),
/// fedavg, mm.
MethodSpec resolve_method(const std::string& name, const ExperimentConfig& config,
                          std::size_t clients);

/// Auto (convergence-safe) or manual stepsizes for the given kinds.
StepsizePlan plan_for(const ExperimentConfig& config,
                      const ProblemInstance& problem,
                      const std::vector<UpdateKind>& kinds);

struct MethodResult {
  MethodSpec spec;
  std::vector<IterateRecord> rows;  // k = c, 2c, ...
  IterateRecord initial;            // k = 0
  std::optional<StepsizePlan> plan;
  std::optional<RateConstants> rates;
  bool stopped_early = false;
};

MethodResult run_method(const ExperimentConfig& config,
                        const ProblemInstance& problem,
                        const MetricsEvaluator& metrics, const MethodSpec& spec,
                        unsigned threads);

/// CSV trace with the standard header; reals printed with 17 digits.
std::string trace_csv(const std::vector<IterateRecord>& rows);

/// Run every configured method, writing <method>.csv and manifest.json
/// under config.output_dir. Progress lines go to `log`.
void run_experiment(const ExperimentConfig& config, unsigned threads,
                    std::ostream& log);

/// Curvature, Lemma 1 and descent-monitor checks on a fresh run.
Report verify_experiment(const ExperimentConfig& config, unsigned threads);

/// Worker count from FEDHYBRID_THREADS, default 1.
unsigned threads_from_env();

}  // namespace fedhybrid
