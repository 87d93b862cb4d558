#include "fedhybrid/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

namespace fedhybrid {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : engine_(splitmix64(seed) ^ splitmix64(stream + 0x9e3779b97f4a7c15ULL)) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open_closed();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

double Rng::lognormal(double mu, double sigma) {
  return std::exp(normal(mu, sigma));
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw InvalidArgument("Rng::below: bound must be > 0");
  // rejection keeps the draw unbiased
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % bound;
}

std::vector<std::size_t> Partition::sizes() const {
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.size());
  return out;
}

void validate_partition(const Partition& partition, std::size_t total) {
  std::vector<char> seen(total, 0);
  std::size_t count = 0;
  for (const auto& client : partition.rows) {
    for (std::size_t r : client) {
      if (r >= total || seen[r]) {
        throw SizeMismatch("partition: row " + std::to_string(r) +
                           " is out of range or assigned twice");
      }
      seen[r] = 1;
      ++count;
    }
  }
  if (count != total) {
    throw SizeMismatch("partition covers " + std::to_string(count) + " of " +
                       std::to_string(total) + " rows");
  }
}

Dataset select_rows(const Dataset& data, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.task = data.task;
  out.feature_names = data.feature_names;
  out.features.resize(static_cast<Eigen::Index>(rows.size()),
                      data.features.cols());
  out.targets.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(rows[k]);
    out.features.row(static_cast<Eigen::Index>(k)) = data.features.row(r);
    out.targets(static_cast<Eigen::Index>(k)) = data.targets(r);
  }
  return out;
}

SkewPlan SkewPlan::uniform(std::size_t clients, LabelRegime regime) {
  return {std::vector<LabelRegime>(clients, regime)};
}

SkewPlan SkewPlan::counts(std::size_t zeros, std::size_t ones,
                          std::size_t mixed) {
  SkewPlan plan;
  plan.regimes.insert(plan.regimes.end(), zeros, LabelRegime::OnlyZero);
  plan.regimes.insert(plan.regimes.end(), ones, LabelRegime::OnlyOne);
  plan.regimes.insert(plan.regimes.end(), mixed, LabelRegime::Mixed);
  return plan;
}

SkewPlan SkewPlan::default_for(std::size_t clients) {
  if (clients <= 1) return uniform(clients, LabelRegime::Mixed);
  const std::size_t pure = clients - 1;
  const auto zeros = static_cast<std::size_t>(
      std::lround(static_cast<double>(pure) * 11.0 / 19.0));
  return counts(zeros, pure - zeros, 1);
}

std::size_t SkewPlan::count(LabelRegime regime) const {
  return static_cast<std::size_t>(
      std::count(regimes.begin(), regimes.end(), regime));
}

std::vector<std::size_t> lognormal_sizes(std::size_t clients, Rng& rng) {
  std::vector<std::size_t> sizes(clients);
  for (auto& s : sizes) {
    s = static_cast<std::size_t>(std::floor(rng.lognormal(4.0, 2.0))) + 50;
  }
  return sizes;
}

LinregSynthetic gen_linreg_synthetic(std::size_t clients, Eigen::Index dim,
                                     std::uint64_t seed, double noise_sigma) {
  if (clients == 0 || dim <= 0) {
    throw InvalidArgument("gen_linreg_synthetic: need n >= 1 and d >= 1");
  }
  Rng size_rng(seed, 0);
  const auto sizes = lognormal_sizes(clients, size_rng);
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(),
                                            std::size_t{0});

  Rng truth_rng(seed, 1);
  Vector truth(dim);
  for (Eigen::Index j = 0; j < dim; ++j) truth(j) = truth_rng.normal();

  LinregSynthetic out;
  out.truth = truth;
  out.data.task = TaskKind::Regression;
  out.data.features.resize(static_cast<Eigen::Index>(total), dim);
  out.data.targets.resize(static_cast<Eigen::Index>(total));
  out.partition.rows.resize(clients);

  Eigen::Index row = 0;
  for (std::size_t i = 0; i < clients; ++i) {
    Rng rng(seed, 2 + i);
    const double scale = rng.normal();
    for (std::size_t k = 0; k < sizes[i]; ++k, ++row) {
      for (Eigen::Index j = 0; j < dim; ++j) {
        out.data.features(row, j) = scale * rng.uniform_open_closed();
      }
      out.data.targets(row) = out.data.features.row(row).dot(truth) +
                              noise_sigma * rng.normal();
      out.partition.rows[i].push_back(static_cast<std::size_t>(row));
    }
  }
  return out;
}

namespace {

bool accepts(LabelRegime regime, int label) {
  switch (regime) {
    case LabelRegime::OnlyZero: return label == 0;
    case LabelRegime::OnlyOne: return label == 1;
    case LabelRegime::Mixed: return true;
  }
  return false;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

LogregSynthetic gen_logreg_synthetic(std::size_t clients, Eigen::Index dim,
                                     const SkewPlan& plan, std::uint64_t seed,
                                     int max_attempts) {
  if (clients == 0 || dim <= 0) {
    throw InvalidArgument("gen_logreg_synthetic: need n >= 1 and d >= 1");
  }
  if (plan.regimes.size() != clients) {
    throw InvalidArgument("gen_logreg_synthetic: plan has " +
                          std::to_string(plan.regimes.size()) +
                          " regimes for " + std::to_string(clients) +
                          " clients");
  }
  Rng size_rng(seed, 0);
  const auto sizes = lognormal_sizes(clients, size_rng);
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(),
                                            std::size_t{0});
  const std::size_t draw_cap = 64 * total + 1024;

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Rng rng(seed, 1000 + static_cast<std::uint64_t>(attempt));
    Vector truth(dim);
    const double w_scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (Eigen::Index j = 0; j < dim; ++j) truth(j) = w_scale * rng.normal();

    std::vector<std::vector<Vector>> feats(clients);
    std::vector<std::vector<int>> labels(clients);
    std::vector<std::array<std::size_t, 2>> per_label(clients, {0, 0});
    std::size_t filled = 0;
    std::size_t draws = 0;
    Vector x(dim);
    while (filled < total && draws < draw_cap) {
      ++draws;
      for (Eigen::Index j = 0; j < dim; ++j) x(j) = rng.normal();
      const int y = rng.uniform() < sigmoid(truth.dot(x)) ? 1 : 0;
      for (std::size_t i = 0; i < clients; ++i) {
        if (labels[i].size() >= sizes[i] || !accepts(plan.regimes[i], y)) {
          continue;
        }
        // mixed clients take at most half of their rows (rounded up) from
        // either label, so the pure clients cannot starve them of one label
        if (plan.regimes[i] == LabelRegime::Mixed &&
            per_label[i][y] >= (sizes[i] + 1) / 2) {
          continue;
        }
        feats[i].push_back(x);
        labels[i].push_back(y);
        ++per_label[i][y];
        ++filled;
        break;
      }
    }
    if (filled < total) continue;

    bool mixed_ok = true;
    for (std::size_t i = 0; i < clients; ++i) {
      if (plan.regimes[i] != LabelRegime::Mixed || sizes[i] < 2) continue;
      const auto ones = std::count(labels[i].begin(), labels[i].end(), 1);
      if (ones == 0 || ones == static_cast<long>(labels[i].size())) {
        mixed_ok = false;
      }
    }
    if (!mixed_ok) continue;

    LogregSynthetic out;
    out.truth = truth;
    out.data.task = TaskKind::Classification;
    out.data.features.resize(static_cast<Eigen::Index>(total), dim);
    out.data.targets.resize(static_cast<Eigen::Index>(total));
    out.partition.rows.resize(clients);
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < clients; ++i) {
      for (std::size_t k = 0; k < sizes[i]; ++k, ++row) {
        out.data.features.row(row) = feats[i][k].transpose();
        out.data.targets(row) = labels[i][k];
        out.partition.rows[i].push_back(static_cast<std::size_t>(row));
      }
    }
    return out;
  }
  throw InfeasibleSkew("gen_logreg_synthetic: could not satisfy the label plan "
                       "after " + std::to_string(max_attempts) + " attempts");
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) {
    --e;
  }
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> cells;  // row-major
  std::vector<std::size_t> line_of_row;
};

RawTable read_table(const std::string& text) {
  RawTable table;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (!have_header) {
      if (line_no == 1 && fields[0].size() >= 3 &&
          fields[0].compare(0, 3, "\xEF\xBB\xBF") == 0) {
        fields[0].erase(0, 3);
      }
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() > table.header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": " +
                           std::to_string(fields.size()) + " fields, header has " +
                           std::to_string(table.header.size()),
                       line_no, "");
    }
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (c >= fields.size() || fields[c].empty()) {
        throw ParseError("line " + std::to_string(line_no) + ", column '" +
                             table.header[c] + "': missing value",
                         line_no, table.header[c]);
      }
    }
    table.cells.push_back(std::move(fields));
    table.line_of_row.push_back(line_no);
  }
  if (!have_header) throw EmptyDataset("csv: no header row");
  if (table.cells.empty()) throw EmptyDataset("csv: no data rows");
  return table;
}

}  // namespace

Dataset parse_csv(const std::string& text, const CsvOptions& options) {
  const RawTable table = read_table(text);
  const auto target_it =
      std::find(table.header.begin(), table.header.end(), options.target);
  if (target_it == table.header.end()) {
    throw ParseError("csv: target column '" + options.target + "' not found",
                     1, options.target);
  }
  const auto target_col =
      static_cast<std::size_t>(target_it - table.header.begin());
  const std::size_t rows = table.cells.size();
  const bool classify = options.task == TaskKind::Classification;

  // Each feature column expands to one (numeric) or several (one-hot) columns.
  struct ColumnPlan {
    std::size_t source;
    bool numeric;
    std::vector<std::string> categories;
  };
  std::vector<ColumnPlan> plans;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == target_col) continue;
    ColumnPlan plan{c, true, {}};
    for (std::size_t r = 0; r < rows; ++r) {
      double v;
      if (!parse_number(table.cells[r][c], v)) {
        if (!classify) {
          throw ParseError("line " + std::to_string(table.line_of_row[r]) +
                               ", column '" + table.header[c] +
                               "': not a number: '" + table.cells[r][c] + "'",
                           table.line_of_row[r], table.header[c]);
        }
        plan.numeric = false;
        break;
      }
    }
    if (!plan.numeric) {
      std::set<std::string> cats;
      for (std::size_t r = 0; r < rows; ++r) cats.insert(table.cells[r][c]);
      plan.categories.assign(cats.begin(), cats.end());
    }
    plans.push_back(std::move(plan));
  }

  Dataset data;
  data.task = options.task;
  Eigen::Index width = 0;
  for (const auto& p : plans) {
    if (p.numeric) {
      data.feature_names.push_back(table.header[p.source]);
      ++width;
    } else {
      for (const auto& cat : p.categories) {
        data.feature_names.push_back(table.header[p.source] + "=" + cat);
      }
      width += static_cast<Eigen::Index>(p.categories.size());
    }
  }
  const Eigen::Index feature_width = width;
  if (options.add_intercept) {
    data.feature_names.push_back("intercept");
    ++width;
  }
  data.features = Matrix::Zero(static_cast<Eigen::Index>(rows), width);
  data.targets.resize(static_cast<Eigen::Index>(rows));

  for (std::size_t r = 0; r < rows; ++r) {
    Eigen::Index col = 0;
    const auto er = static_cast<Eigen::Index>(r);
    for (const auto& p : plans) {
      const std::string& cell = table.cells[r][p.source];
      if (p.numeric) {
        double v = 0.0;
        parse_number(cell, v);
        data.features(er, col++) = v;
      } else {
        const auto at = std::lower_bound(p.categories.begin(),
                                         p.categories.end(), cell);
        data.features(er, col + (at - p.categories.begin())) = 1.0;
        col += static_cast<Eigen::Index>(p.categories.size());
      }
    }
    if (options.add_intercept) data.features(er, col) = 1.0;
  }

  // targets
  if (!classify) {
    for (std::size_t r = 0; r < rows; ++r) {
      double v;
      if (!parse_number(table.cells[r][target_col], v)) {
        throw ParseError("line " + std::to_string(table.line_of_row[r]) +
                             ", column '" + options.target +
                             "': not a number: '" +
                             table.cells[r][target_col] + "'",
                         table.line_of_row[r], options.target);
      }
      data.targets(static_cast<Eigen::Index>(r)) = v;
    }
  } else {
    bool numeric = true;
    std::vector<double> values(rows);
    for (std::size_t r = 0; r < rows && numeric; ++r) {
      numeric = parse_number(table.cells[r][target_col], values[r]);
    }
    std::map<std::string, int> code;
    if (numeric) {
      std::set<double> distinct(values.begin(), values.end());
      const bool binary01 = std::all_of(
          distinct.begin(), distinct.end(),
          [](double v) { return v == 0.0 || v == 1.0; });
      if (!binary01 && distinct.size() > 2) {
        throw ParseError("csv: target '" + options.target +
                             "' has more than two classes",
                         1, options.target);
      }
      for (std::size_t r = 0; r < rows; ++r) {
        const double v = values[r];
        data.targets(static_cast<Eigen::Index>(r)) =
            binary01 ? v : (v == *distinct.begin() ? 0.0 : 1.0);
      }
    } else {
      std::set<std::string> distinct;
      for (std::size_t r = 0; r < rows; ++r) {
        distinct.insert(table.cells[r][target_col]);
      }
      if (distinct.size() > 2) {
        throw ParseError("csv: target '" + options.target +
                             "' has more than two classes",
                         1, options.target);
      }
      for (std::size_t r = 0; r < rows; ++r) {
        data.targets(static_cast<Eigen::Index>(r)) =
            table.cells[r][target_col] == *distinct.begin() ? 0.0 : 1.0;
      }
    }
  }

  if (options.normalize) {
    const double n = static_cast<double>(rows);
    for (Eigen::Index c = 0; c < feature_width; ++c) {
      auto col = data.features.col(c);
      const double mean = col.sum() / n;
      col.array() -= mean;
      const double sd = std::sqrt(col.squaredNorm() / n);
      if (sd > 0.0) col /= sd;
    }
  }
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InvalidArgument("csv: cannot open '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), options);
}

Partition partition_sorted_blocks(const Dataset& data,
                                  const std::vector<std::size_t>& sizes) {
  const std::size_t total = data.rows();
  const std::size_t sum = std::accumulate(sizes.begin(), sizes.end(),
                                          std::size_t{0});
  if (sum != total) {
    throw SizeMismatch("partition_sorted_blocks: sizes sum to " +
                       std::to_string(sum) + ", data set has " +
                       std::to_string(total) + " rows");
  }
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.targets(static_cast<Eigen::Index>(a)) <
           data.targets(static_cast<Eigen::Index>(b));
  });
  Partition part;
  part.rows.resize(sizes.size());
  std::size_t at = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    part.rows[i].assign(order.begin() + static_cast<long>(at),
                        order.begin() + static_cast<long>(at + sizes[i]));
    at += sizes[i];
  }
  return part;
}

std::vector<std::size_t> uniform_sizes(std::size_t total, std::size_t clients,
                                       Rng& rng) {
  if (clients == 0) throw InvalidArgument("uniform_sizes: need clients >= 1");
  if (total < clients) {
    throw SizeMismatch("uniform_sizes: " + std::to_string(total) +
                       " rows cannot give " + std::to_string(clients) +
                       " non-empty clients");
  }
  std::vector<double> w(clients);
  for (auto& v : w) v = rng.uniform_open_closed();
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  const std::size_t spare = total - clients;

  std::vector<std::size_t> sizes(clients, 1);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < clients; ++i) {
    const double share = static_cast<double>(spare) * w[i] / wsum;
    const auto whole = static_cast<std::size_t>(std::floor(share));
    sizes[i] += whole;
    assigned += whole;
    remainders.emplace_back(share - static_cast<double>(whole), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < spare; ++k, ++assigned) {
    ++sizes[remainders[k % clients].second];
  }
  return sizes;
}

Partition partition_label_skew(const Dataset& data, const SkewPlan& plan,
                               std::uint64_t seed) {
  const std::size_t clients = plan.regimes.size();
  if (clients == 0) throw InvalidArgument("partition_label_skew: empty plan");
  std::vector<std::size_t> zeros;
  std::vector<std::size_t> ones;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const double y = data.targets(static_cast<Eigen::Index>(r));
    if (y == 0.0) {
      zeros.push_back(r);
    } else if (y == 1.0) {
      ones.push_back(r);
    } else {
      throw InvalidArgument("partition_label_skew: labels must be 0 or 1");
    }
  }
  // client indices taking a share of each pool, in client order
  std::vector<std::size_t> zero_takers;
  std::vector<std::size_t> one_takers;
  for (std::size_t i = 0; i < clients; ++i) {
    if (accepts(plan.regimes[i], 0)) zero_takers.push_back(i);
    if (accepts(plan.regimes[i], 1)) one_takers.push_back(i);
  }
  auto check = [](const std::vector<std::size_t>& pool,
                  const std::vector<std::size_t>& takers, const char* label) {
    if (pool.size() < takers.size() || (!pool.empty() && takers.empty())) {
      throw InfeasibleSkew("partition_label_skew: " +
                           std::to_string(pool.size()) + " rows with label " +
                           label + " cannot serve " +
                           std::to_string(takers.size()) + " clients");
    }
  };
  check(zeros, zero_takers, "0");
  check(ones, one_takers, "1");

  Rng rng(seed, 0);
  Partition part;
  part.rows.resize(clients);
  auto deal = [&](const std::vector<std::size_t>& pool,
                  const std::vector<std::size_t>& takers) {
    if (takers.empty()) return;
    const auto sizes = uniform_sizes(pool.size(), takers.size(), rng);
    std::size_t at = 0;
    for (std::size_t k = 0; k < takers.size(); ++k) {
      auto& dst = part.rows[takers[k]];
      dst.insert(dst.end(), pool.begin() + static_cast<long>(at),
                 pool.begin() + static_cast<long>(at + sizes[k]));
      at += sizes[k];
    }
  };
  deal(zeros, zero_takers);
  deal(ones, one_takers);
  for (auto& r : part.rows) std::sort(r.begin(), r.end());
  return part;
}

std::vector<ObjectivePtr> build_objectives(const Dataset& data,
                                           const Partition& partition,
                                           double ridge_share) {
  validate_partition(partition, data.rows());
  std::vector<ObjectivePtr> out;
  out.reserve(partition.clients());
  for (const auto& rows : partition.rows) {
    if (rows.empty()) {
      throw SizeMismatch("build_objectives: a client holds no rows");
    }
    Dataset local = select_rows(data, rows);
    if (data.task == TaskKind::Regression) {
      out.push_back(std::make_shared<QuadraticObjective>(
          std::move(local.features), std::move(local.targets), ridge_share));
    } else {
      out.push_back(std::make_shared<LogisticObjective>(
          std::move(local.features), std::move(local.targets), ridge_share));
    }
  }
  return out;
}

}  // namespace fedhybrid
