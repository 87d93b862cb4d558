#include "fedhybrid/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "fedhybrid/data.hpp"

namespace fedhybrid {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string value) {
  value = trim(value);
  if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
    value = value.substr(1, value.size() - 2);
  }
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, double>) {
      out += fmt(values[i]);
    } else if constexpr (std::is_same_v<T, std::string>) {
      out += values[i];
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ConfigError("invalid value '" + value + "' for key '" + key +
                        "': expected " + expected,
                    key);
}

double parse_real(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) {
    bad_value(key, value, "a real number");
  }
  return out;
}

std::uint64_t parse_count(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v.empty() || !std::all_of(v.begin(), v.end(),
                                [](char c) { return c >= '0' && c <= '9'; })) {
    bad_value(key, value, "a non-negative integer");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    bad_value(key, value, "a non-negative integer");
  }
}

bool parse_flag(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, value, "true or false");
}

std::string parse_choice(const std::string& key, const std::string& value,
                         std::initializer_list<const char*> choices) {
  const std::string v = trim(value);
  std::string expected;
  for (const char* c : choices) {
    if (v == c) return v;
    if (!expected.empty()) expected += " | ";
    expected += c;
  }
  bad_value(key, value, expected);
}

std::vector<double> parse_reals(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : split_list(value)) out.push_back(parse_real(key, item));
  return out;
}

std::vector<std::size_t> parse_counts(const std::string& key,
                                      const std::string& value) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(value)) {
    out.push_back(static_cast<std::size_t>(parse_count(key, item)));
  }
  return out;
}

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

struct Setting {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<Setting>& settings() {
  using C = ExperimentConfig;
  using S = std::string;
  static const std::vector<Setting> table = {
      {"problem.kind",
       [](C& c, const S& k, const S& v) { c.kind = parse_choice(k, v, {"linreg", "logreg"}); },
       [](const C& c) { return c.kind; }},
      {"problem.source",
       [](C& c, const S& k, const S& v) {
         const S t = trim(v);
         if (t != "synthetic" && t.rfind("csv:", 0) != 0) {
           bad_value(k, v, "synthetic | csv:<path>");
         }
         c.source = t;
       },
       [](const C& c) { return c.source; }},
      {"problem.n",
       [](C& c, const S& k, const S& v) {
         c.n = parse_count(k, v);
         if (c.n == 0) bad_value(k, v, "at least 1");
       },
       [](const C& c) { return std::to_string(c.n); }},
      {"problem.d",
       [](C& c, const S& k, const S& v) {
         c.d = static_cast<Eigen::Index>(parse_count(k, v));
         if (c.d == 0) bad_value(k, v, "at least 1");
       },
       [](const C& c) { return std::to_string(c.d); }},
      {"problem.rho",
       [](C& c, const S& k, const S& v) {
         c.rho = parse_real(k, v);
         if (c.rho < 0) bad_value(k, v, "a value >= 0");
       },
       [](const C& c) { return fmt(c.rho); }},
      {"problem.mu",
       [](C& c, const S& k, const S& v) {
         c.mu = parse_real(k, v);
         if (!(c.mu > 0)) bad_value(k, v, "a value > 0");
       },
       [](const C& c) { return fmt(c.mu); }},
      {"problem.noise",
       [](C& c, const S& k, const S& v) {
         c.noise = parse_real(k, v);
         if (c.noise < 0) bad_value(k, v, "a value >= 0");
       },
       [](const C& c) { return fmt(c.noise); }},
      {"problem.target", [](C& c, const S&, const S& v) { c.target = trim(v); },
       [](const C& c) { return c.target; }},
      {"problem.normalize",
       [](C& c, const S& k, const S& v) { c.normalize = parse_flag(k, v); },
       [](const C& c) { return S(c.normalize ? "true" : "false"); }},
      {"problem.intercept",
       [](C& c, const S& k, const S& v) { c.intercept = parse_flag(k, v); },
       [](const C& c) { return S(c.intercept ? "true" : "false"); }},
      {"partition.kind",
       [](C& c, const S& k, const S& v) {
         c.partition = parse_choice(k, v, {"auto", "lognormal", "sorted", "label_skew"});
       },
       [](const C& c) { return c.partition; }},
      {"partition.skew",
       [](C& c, const S& k, const S& v) {
         auto counts = parse_counts(k, v);
         if (counts.size() != 3) bad_value(k, v, "zeros,ones,mixed");
         c.skew = counts;
       },
       [](const C& c) { return c.skew ? join(*c.skew) : S(); }},
      {"stepsize.mode",
       [](C& c, const S& k, const S& v) { c.stepsize_mode = parse_choice(k, v, {"auto", "manual"}); },
       [](const C& c) { return c.stepsize_mode; }},
      {"stepsize.a_i", [](C& c, const S& k, const S& v) { c.a_i = parse_reals(k, v); },
       [](const C& c) { return join(c.a_i); }},
      {"stepsize.b_i", [](C& c, const S& k, const S& v) { c.b_i = parse_reals(k, v); },
       [](const C& c) { return join(c.b_i); }},
      {"stepsize.a_gradient",
       [](C& c, const S& k, const S& v) { c.a_gradient = parse_real(k, v); },
       [](const C& c) { return opt(c.a_gradient); }},
      {"stepsize.b_gradient",
       [](C& c, const S& k, const S& v) { c.b_gradient = parse_real(k, v); },
       [](const C& c) { return opt(c.b_gradient); }},
      {"stepsize.a_newton",
       [](C& c, const S& k, const S& v) { c.a_newton = parse_real(k, v); },
       [](const C& c) { return opt(c.a_newton); }},
      {"stepsize.b_newton",
       [](C& c, const S& k, const S& v) { c.b_newton = parse_real(k, v); },
       [](const C& c) { return opt(c.b_newton); }},
      {"clients.newton",
       [](C& c, const S& k, const S& v) {
         c.newton = parse_counts(k, v);
         for (auto i : c.newton) {
           if (i == 0) bad_value(k, v, "1-based client indices");
         }
       },
       [](const C& c) { return join(c.newton); }},
      {"run.iters",
       [](C& c, const S& k, const S& v) {
         c.iters = parse_count(k, v);
         if (c.iters == 0) bad_value(k, v, "at least 1");
       },
       [](const C& c) { return std::to_string(c.iters); }},
      {"run.tol",
       [](C& c, const S& k, const S& v) {
         c.tol = parse_real(k, v);
         if (c.tol < 0) bad_value(k, v, "a value >= 0");
       },
       [](const C& c) { return fmt(c.tol); }},
      {"run.seed", [](C& c, const S& k, const S& v) { c.seed = parse_count(k, v); },
       [](const C& c) { return std::to_string(c.seed); }},
      {"run.metric_cadence",
       [](C& c, const S& k, const S& v) {
         c.metric_cadence = parse_count(k, v);
         if (c.metric_cadence == 0) bad_value(k, v, "at least 1");
       },
       [](const C& c) { return std::to_string(c.metric_cadence); }},
      {"output.dir", [](C& c, const S&, const S& v) { c.output_dir = trim(v); },
       [](const C& c) { return c.output_dir; }},
      {"output.timing",
       [](C& c, const S& k, const S& v) { c.timing = parse_flag(k, v); },
       [](const C& c) { return S(c.timing ? "true" : "false"); }},
      {"methods",
       [](C& c, const S& k, const S& v) {
         c.methods = split_list(v);
         if (c.methods.empty()) bad_value(k, v, "a non-empty list");
       },
       [](const C& c) { return join(c.methods); }},
      {"fedavg.eta",
       [](C& c, const S& k, const S& v) {
         c.fedavg_eta = parse_real(k, v);
         if (*c.fedavg_eta < 0) bad_value(k, v, "a value >= 0");
       },
       [](const C& c) { return opt(c.fedavg_eta); }},
      {"fedavg.local_steps",
       [](C& c, const S& k, const S& v) {
         c.fedavg_local_steps = parse_count(k, v);
         if (c.fedavg_local_steps == 0) bad_value(k, v, "at least 1");
       },
       [](const C& c) { return std::to_string(c.fedavg_local_steps); }},
      {"fedavg.weighting",
       [](C& c, const S& k, const S& v) {
         c.fedavg_weighting = parse_choice(k, v, {"samples", "uniform"});
       },
       [](const C& c) { return c.fedavg_weighting; }},
      {"mm.rule",
       [](C& c, const S& k, const S& v) { c.mm_rule = parse_choice(k, v, {"newton", "gradient"}); },
       [](const C& c) { return c.mm_rule; }},
      {"mm.beta",
       [](C& c, const S& k, const S& v) {
         c.mm_beta = parse_real(k, v);
         if (!(c.mm_beta > 0)) bad_value(k, v, "a value > 0");
       },
       [](const C& c) { return fmt(c.mm_beta); }},
      {"verify.samples",
       [](C& c, const S& k, const S& v) {
         c.verify_samples = parse_count(k, v);
         if (c.verify_samples == 0) bad_value(k, v, "at least 1");
       },
       [](const C& c) { return std::to_string(c.verify_samples); }},
      {"verify.lemma1_samples",
       [](C& c, const S& k, const S& v) { c.verify_lemma1_samples = parse_count(k, v); },
       [](const C& c) { return std::to_string(c.verify_lemma1_samples); }},
  };
  return table;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> ExperimentConfig::resolved() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : settings()) out.emplace_back(s.key, s.get(*this));
  return out;
}

void apply_setting(ExperimentConfig& config, const std::string& key,
                   const std::string& value) {
  for (const auto& s : settings()) {
    if (key == s.key) {
      s.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'", key);
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  std::stringstream ss(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(ss, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(number) +
                            ": expected 'key = value', got '" + line + "'",
                        line);
    }
    apply_setting(config, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string(), "--config");
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig config = parse_config(ss.str());
  config.base_dir = path.parent_path();
  return config;
}

// ---------------------------------------------------------------------------

ProblemInstance build_problem(const ExperimentConfig& config) {
  const bool logistic = config.kind == "logreg";
  const std::size_t n = config.n;
  const double share = config.rho / static_cast<double>(n);
  auto plan_of = [&]() {
    return config.skew ? SkewPlan::counts((*config.skew)[0], (*config.skew)[1],
                                          (*config.skew)[2])
                       : SkewPlan::default_for(n);
  };
  if (config.skew) {
    const auto total = (*config.skew)[0] + (*config.skew)[1] + (*config.skew)[2];
    if (total != n) {
      throw ConfigError("partition.skew counts sum to " + std::to_string(total) +
                            " but problem.n = " + std::to_string(n),
                        "partition.skew");
    }
  }

  if (config.source == "synthetic") {
    if (config.partition == "sorted") {
      throw ConfigError("synthetic data uses lognormal or label_skew partitions",
                        "partition.kind");
    }
    if (logistic) {
      const auto gen = gen_logreg_synthetic(n, config.d, plan_of(), config.seed);
      return ProblemInstance(build_objectives(gen.data, gen.partition, share),
                             config.mu);
    }
    const auto gen = gen_linreg_synthetic(n, config.d, config.seed, config.noise);
    return ProblemInstance(build_objectives(gen.data, gen.partition, share),
                           config.mu);
  }

  std::filesystem::path path = config.source.substr(4);
  if (path.is_relative() && !config.base_dir.empty()) path = config.base_dir / path;
  if (!std::filesystem::exists(path)) {
    throw ConfigError("dataset file not found: " + path.string(), "problem.source");
  }
  if (config.target.empty()) {
    throw ConfigError("csv sources need problem.target", "problem.target");
  }
  CsvOptions options;
  options.target = config.target;
  options.normalize = config.normalize;
  options.add_intercept = config.intercept;
  options.task = logistic ? TaskKind::Classification : TaskKind::Regression;
  const Dataset data = load_csv(path, options);
  std::string kind = config.partition;
  if (kind == "auto") kind = logistic ? "label_skew" : "sorted";
  Partition partition;
  if (kind == "sorted") {
    Rng rng(config.seed, 0);
    partition = partition_sorted_blocks(data, uniform_sizes(data.rows(), n, rng));
  } else if (kind == "label_skew") {
    if (!logistic) {
      throw ConfigError("label_skew needs problem.kind = logreg", "partition.kind");
    }
    partition = partition_label_skew(data, plan_of(), config.seed);
  } else {
    throw ConfigError("csv sources use sorted or label_skew partitions",
                      "partition.kind");
  }
  return ProblemInstance(build_objectives(data, partition, share), config.mu);
}

MethodSpec resolve_method(const std::string& name, const ExperimentConfig& config,
                          std::size_t clients) {
  MethodSpec spec;
  spec.name = name;
  if (name == "fedavg") {
    spec.family = MethodFamily::FedAvg;
    return spec;
  }
  if (name == "mm") {
    spec.family = MethodFamily::MethodOfMultipliers;
    return spec;
  }
  std::vector<std::size_t> newton;
  if (name == "fedh-g") {
  } else if (name == "fedh-n") {
    for (std::size_t i = 0; i < clients; ++i) newton.push_back(i);
  } else if (name == "fedh") {
    for (auto i : config.newton) {
      if (i > clients) {
        throw ConfigError("client " + std::to_string(i) + " out of range 1.." +
                              std::to_string(clients),
                          "clients.newton");
      }
      newton.push_back(i - 1);
    }
  } else if (name.rfind("fedh-", 0) == 0) {
    const std::string count = name.substr(5);
    if (count.empty() ||
        !std::all_of(count.begin(), count.end(),
                     [](char c) { return c >= '0' && c <= '9'; }) ||
        std::stoull(count) > clients) {
      throw ConfigError("unknown method '" + name + "'", "methods");
    }
    for (std::size_t i = 0; i < std::stoull(count); ++i) newton.push_back(i);
  } else {
    throw ConfigError("unknown method '" + name + "'", "methods");
  }
  spec.kinds = kinds_with_newton(clients, newton);
  return spec;
}

StepsizePlan plan_for(const ExperimentConfig& config,
                      const ProblemInstance& problem,
                      const std::vector<UpdateKind>& kinds) {
  if (config.stepsize_mode == "auto") {
    return safe_stepsizes(problem.curvatures(), problem.mu(), kinds);
  }
  const std::size_t n = kinds.size();
  auto pick = [&](const std::vector<double>& list, const std::optional<double>& g,
                  const std::optional<double>& nw, const char* list_key,
                  const char* g_key, const char* n_key) {
    std::vector<double> out(n);
    if (!list.empty()) {
      if (list.size() != 1 && list.size() != n) {
        throw ConfigError(std::string(list_key) + " needs 1 or " +
                              std::to_string(n) + " entries",
                          list_key);
      }
      for (std::size_t i = 0; i < n; ++i) out[i] = list.size() == 1 ? list[0] : list[i];
      return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const bool newton = kinds[i] == UpdateKind::Newton;
      const auto& v = newton ? nw : g;
      if (!v) {
        throw ConfigError("manual stepsizes need " + std::string(list_key) +
                              " or " + (newton ? n_key : g_key),
                          newton ? n_key : g_key);
      }
      out[i] = *v;
    }
    return out;
  };
  auto a = pick(config.a_i, config.a_gradient, config.a_newton, "stepsize.a_i",
                "stepsize.a_gradient", "stepsize.a_newton");
  auto b = pick(config.b_i, config.b_gradient, config.b_newton, "stepsize.b_i",
                "stepsize.b_gradient", "stepsize.b_newton");
  try {
    return manual_plan(kinds, std::move(a), std::move(b));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what(), "stepsize.a_i");
  }
}

// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

bool converged(const ExperimentConfig& config, const IterateRecord& r) {
  return config.tol > 0.0 && r.consensus_err + r.primal_grad_norm <= config.tol;
}

}  // namespace

MethodResult run_method(const ExperimentConfig& config,
                        const ProblemInstance& problem,
                        const MetricsEvaluator& metrics, const MethodSpec& spec,
                        unsigned threads) {
  MethodResult result;
  result.spec = spec;
  const auto start = Clock::now();
  const std::size_t n = problem.clients();
  const auto d = problem.dimension();
  auto stamp = [&](IterateRecord& r) {
    if (config.timing) r.elapsed_ms = elapsed_ms(start);
  };

  if (spec.family == MethodFamily::FedHybrid) {
    result.plan = plan_for(config, problem, spec.kinds);
    result.rates = rate_rho(*result.plan, problem.curvatures(), problem.mu());
    RunOptions options;
    options.threads = threads;
    options.cadence = config.metric_cadence;
    options.keep_snapshots = false;
    options.hook = [&](const Snapshot& s) {
      IterateRecord r = metrics.record(s.state, s.k);
      r.uplink_bytes = s.uplink_bytes;
      r.downlink_bytes = s.downlink_bytes;
      stamp(r);
      if (s.k == 0) {
        result.initial = r;
        return false;
      }
      result.rows.push_back(r);
      return converged(config, r);
    };
    result.stopped_early = run(problem, *result.plan, config.iters, options).stopped_early;
    return result;
  }

  if (spec.family == MethodFamily::FedAvg) {
    FedAvgOptions options;
    options.eta = config.fedavg_eta ? *config.fedavg_eta
                                    : 1.0 / problem.global_curvature().l;
    options.local_steps = config.fedavg_local_steps;
    options.weighting = config.fedavg_weighting == "uniform"
                            ? FedAvgWeighting::Uniform
                            : FedAvgWeighting::SampleCount;
    options.threads = threads;
    options.cadence = config.metric_cadence;
    options.keep_snapshots = false;
    options.hook = [&](const FedAvgSnapshot& s) {
      IterateRecord r = metrics.primal_only(s.omega, s.local, s.k);
      r.uplink_bytes = s.uplink_bytes;
      r.downlink_bytes = s.downlink_bytes;
      stamp(r);
      if (s.k == 0) {
        result.initial = r;
        return false;
      }
      result.rows.push_back(r);
      return converged(config, r);
    };
    result.stopped_early =
        fedavg_run(problem, options, config.iters, Vector::Zero(d)).stopped_early;
    return result;
  }

  // method of multipliers, starting from zero multipliers
  const DualRule rule = config.mm_rule == "gradient"
                            ? DualRule{GradientAscentRule{config.mm_beta}}
                            : DualRule{NewtonRule{config.mm_beta}};
  Blocks lambda = zero_blocks(n, d);
  PrimalPoint primal = metrics.oracle().argmin(lambda);
  result.initial = metrics.record({primal.x0, primal.x, lambda}, 0);
  for (std::size_t k = 1; k <= config.iters; ++k) {
    MmStep step = mm_step(lambda, problem, problem.mu(), rule);
    lambda = std::move(step.lambda);
    if (k % config.metric_cadence != 0 && k != config.iters) continue;
    primal = metrics.oracle().argmin(lambda);
    IterateRecord r = metrics.record({primal.x0, primal.x, lambda}, k);
    stamp(r);
    result.rows.push_back(r);
    if (converged(config, r)) {
      result.stopped_early = k < config.iters;
      break;
    }
  }
  return result;
}

std::string trace_csv(const std::vector<IterateRecord>& rows) {
  std::string out =
      "iter,delta_lambda,delta_x,delta_combined,consensus_err,primal_grad_norm,"
      "fun_gap,elapsed_ms,uplink_bytes,downlink_bytes\n";
  auto field = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  for (const auto& r : rows) {
    out += std::to_string(r.k) + "," + field(r.delta_lambda) + "," +
           field(r.delta_x) + "," + field(r.delta) + "," + fmt(r.consensus_err) +
           "," + fmt(r.primal_grad_norm) + "," + fmt(r.fun_gap) + "," +
           field(r.elapsed_ms) + "," + std::to_string(r.uplink_bytes) + "," +
           std::to_string(r.downlink_bytes) + "\n";
  }
  return out;
}

namespace {

nlohmann::json rates_json(const RateConstants& rc) {
  return {{"m", rc.m},         {"l", rc.l},
          {"m_g", rc.m_g},     {"l_g", rc.l_g},
          {"l_L", rc.l_L},     {"alpha_min", rc.alpha_min},
          {"beta_min", rc.beta_min}, {"beta", rc.beta},
          {"kappa", rc.kappa}, {"rho", rc.rho},
          {"rho_theorem", rc.rho_theorem}};
}

nlohmann::json plan_json(const StepsizePlan& plan) {
  std::vector<std::string> kinds;
  for (auto k : plan.kinds) kinds.push_back(k == UpdateKind::Newton ? "newton" : "gradient");
  return {{"mode", plan.mode == StepsizeMode::Auto ? "auto" : "manual"},
          {"kinds", kinds},
          {"a", plan.a},
          {"b", plan.b}};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

void run_experiment(const ExperimentConfig& config, unsigned threads,
                    std::ostream& log) {
  std::vector<MethodSpec> specs;
  const ProblemInstance problem = build_problem(config);
  for (const auto& name : config.methods) {
    specs.push_back(resolve_method(name, config, problem.clients()));
  }
  const OptimumCertificate cert = kkt_optimum(problem);
  const MetricsEvaluator metrics(problem, problem.mu(), cert);
  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);

  nlohmann::json manifest;
  nlohmann::json resolved = nlohmann::json::object();
  for (const auto& [k, v] : config.resolved()) resolved[k] = v;
  manifest["config"] = resolved;
  manifest["seed"] = config.seed;
  const Curvature g = problem.global_curvature();
  manifest["problem"] = {{"clients", problem.clients()},
                         {"dimension", problem.dimension()},
                         {"mu", problem.mu()},
                         {"m", g.m},
                         {"l", g.l},
                         {"f_star", cert.f_star},
                         {"optimum_residual", cert.residual}};
  manifest["methods"] = nlohmann::json::array();

  for (const auto& spec : specs) {
    const MethodResult result = run_method(config, problem, metrics, spec, threads);
    const std::string file = spec.name + ".csv";
    write_file(dir / file, trace_csv(result.rows));
    nlohmann::json entry = {{"name", spec.name},
                            {"file", file},
                            {"rows", result.rows.size()},
                            {"stopped_early", result.stopped_early}};
    if (result.initial.delta) entry["delta0"] = *result.initial.delta;
    entry["fun_gap0"] = result.initial.fun_gap;
    if (result.plan) entry["stepsizes"] = plan_json(*result.plan);
    if (result.rates) {
      entry["rates"] = rates_json(*result.rates);
      entry["rho"] = result.rates->rho;
    }
    manifest["methods"].push_back(entry);
    const auto& last = result.rows.empty() ? result.initial : result.rows.back();
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-10s rows=%zu fun_gap=%.3e consensus_err=%.3e\n",
                  spec.name.c_str(), result.rows.size(), last.fun_gap,
                  last.consensus_err);
    log << buf;
  }
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Report verify_experiment(const ExperimentConfig& config, unsigned threads) {
  const ProblemInstance problem = build_problem(config);
  Report report = curvature_check(problem, problem.mu(), config.verify_samples,
                                  config.seed);
  if (config.verify_lemma1_samples > 0) {
    const Report l1 = lemma1_check(problem, problem.mu(),
                                   config.verify_lemma1_samples, config.seed);
    report.checks.insert(report.checks.end(), l1.checks.begin(), l1.checks.end());
  }
  const OptimumCertificate cert = kkt_optimum(problem);
  // the first FedHybrid method of the run, else the configured hybrid
  MethodSpec spec = resolve_method("fedh", config, problem.clients());
  for (const auto& name : config.methods) {
    const MethodSpec s = resolve_method(name, config, problem.clients());
    if (s.family == MethodFamily::FedHybrid) {
      spec = s;
      break;
    }
  }
  const StepsizePlan plan = plan_for(config, problem, spec.kinds);
  const RateConstants rc = rate_rho(plan, problem.curvatures(), problem.mu());
  RunOptions options;
  options.threads = threads;
  const RunTrace trace = run(problem, plan, config.iters, options);
  MonitorOptions monitor;
  monitor.threads = threads;
  const Report d = descent_monitors(trace.snapshots, plan, rc, problem, cert, monitor);
  report.checks.insert(report.checks.end(), d.checks.begin(), d.checks.end());
  return report;
}

unsigned threads_from_env() {
  const char* env = std::getenv("FEDHYBRID_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) return 1;
  return static_cast<unsigned>(v);
}

}  // namespace fedhybrid
