#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fedhybrid/model.hpp"
#include "fedhybrid/numerics.hpp"

namespace fedhybrid {

/// Seedable generator with a fixed, documented algorithm.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Its seed is SplitMix64(seed) xor SplitMix64(stream + golden),
/// so independent streams can be split off one user seed. Distributions are
/// implemented here rather than taken from <random>, whose distribution
/// algorithms vary between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1].
  double uniform_open_closed() { return 1.0 - uniform(); }
  /// Standard normal (Box-Muller, both outputs used).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// exp(Normal(mu, sigma))
  double lognormal(double mu, double sigma);
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

enum class TaskKind { Regression, Classification };

/// Row-major data set: features N x d, targets length N.
struct Dataset {
  Matrix features;
  Vector targets;
  TaskKind task = TaskKind::Regression;
  std::vector<std::string> feature_names;

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
};

/// rows[i] lists the data rows owned by client i.
struct Partition {
  std::vector<std::vector<std::size_t>> rows;

  std::size_t clients() const { return rows.size(); }
  std::vector<std::size_t> sizes() const;
};

/// Throws SizeMismatch unless the partition covers 0..total-1 exactly once.
void validate_partition(const Partition& partition, std::size_t total);

/// Subset of a data set's rows, in the given order.
Dataset select_rows(const Dataset& data, const std::vector<std::size_t>& rows);

enum class LabelRegime { OnlyZero, OnlyOne, Mixed };

/// Label regime of every client, in client order.
struct SkewPlan {
  std::vector<LabelRegime> regimes;

  static SkewPlan uniform(std::size_t clients, LabelRegime regime);
  static SkewPlan counts(std::size_t zeros, std::size_t ones,
                         std::size_t mixed);
  /// 11/8/1 for 20 clients, 4/3/1 for 8, scaled by rounding otherwise;
  /// a single client is mixed.
  static SkewPlan default_for(std::size_t clients);

  std::size_t count(LabelRegime regime) const;
};

struct LinregSynthetic {
  Dataset data;
  Partition partition;
  Vector truth;
};

struct LogregSynthetic {
  Dataset data;
  Partition partition;
  Vector truth;
};

/// Local sizes floor(lognormal(4, 2)) + 50.
std::vector<std::size_t> lognormal_sizes(std::size_t clients, Rng& rng);

/// Heterogeneous least-squares data: per client A_i = eta_i * U(0,1] entries
/// with eta_i ~ N(0,1), b_i = A_i w0 + N(0, noise_sigma^2).
LinregSynthetic gen_linreg_synthetic(std::size_t clients, Eigen::Index dim,
                                     std::uint64_t seed,
                                     double noise_sigma = 0.5);

/// Label-skewed logistic data: N(0,1) features, labels drawn from a random
/// logistic model with weights N(0, I/d), rows routed so each client's
/// regime holds. Throws InfeasibleSkew after `max_attempts` failed draws.
LogregSynthetic gen_logreg_synthetic(std::size_t clients, Eigen::Index dim,
                                     const SkewPlan& plan, std::uint64_t seed,
                                     int max_attempts = 32);

struct CsvOptions {
  std::string target;
  bool normalize = false;
  bool add_intercept = false;
  TaskKind task = TaskKind::Regression;
};

/// Parse a header-first, comma-delimited CSV. On the classification path
/// non-numeric feature columns are one-hot encoded (categories in sorted
/// order) and a two-valued non-numeric target maps to {0, 1} in sorted
/// order. Normalization is z-scoring with the population deviation; the
/// intercept column is appended last and never normalized.
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options);
Dataset parse_csv(const std::string& text, const CsvOptions& options);

/// Stable sort by target, then contiguous blocks of the given sizes.
Partition partition_sorted_blocks(const Dataset& data,
                                  const std::vector<std::size_t>& sizes);

/// Label-skewed split of a fixed data set. Label-0 rows are shared between
/// the only-zero and mixed clients, label-1 rows between the only-one and
/// mixed clients, with uniform random shares.
Partition partition_label_skew(const Dataset& data, const SkewPlan& plan,
                               std::uint64_t seed);

/// n sizes summing to total, each >= 1, from uniform weights with
/// largest-remainder rounding.
std::vector<std::size_t> uniform_sizes(std::size_t total, std::size_t clients,
                                       Rng& rng);

/// One objective per client from a partitioned data set.
std::vector<ObjectivePtr> build_objectives(const Dataset& data,
                                           const Partition& partition,
                                           double ridge_share);

}  // namespace fedhybrid
