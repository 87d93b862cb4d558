#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "fedhybrid/data.hpp"
#include "helpers.hpp"

using namespace fedhybrid;

namespace {

bool disjoint_exhaustive(const Partition& p, std::size_t total) {
  std::vector<std::size_t> all;
  for (const auto& rows : p.rows) all.insert(all.end(), rows.begin(), rows.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(total);
  std::iota(expect.begin(), expect.end(), 0);
  return all == expect;
}

std::size_t label_ones(const Dataset& d, const std::vector<std::size_t>& rows) {
  std::size_t ones = 0;
  for (auto r : rows) ones += d.targets(static_cast<Eigen::Index>(r)) == 1.0;
  return ones;
}

void check_regimes(const Dataset& d, const Partition& p, const SkewPlan& plan) {
  for (std::size_t i = 0; i < p.clients(); ++i) {
    const auto ones = label_ones(d, p.rows[i]);
    switch (plan.regimes[i]) {
      case LabelRegime::OnlyZero: CHECK(ones == 0); break;
      case LabelRegime::OnlyOne: CHECK(ones == p.rows[i].size()); break;
      case LabelRegime::Mixed:
        if (p.rows[i].size() >= 2) {
          CHECK(ones > 0);
          CHECK(ones < p.rows[i].size());
        }
        break;
    }
  }
}

}  // namespace

TEST_CASE("rng is deterministic and streams differ") {
  Rng a(42, 3), b(42, 3), c(42, 4);
  for (int i = 0; i < 10; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK(a.normal() != c.normal());
  Rng m(1);
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double z = m.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / 20000) < 0.03);
  CHECK(std::abs(sq / 20000 - 1.0) < 0.05);
}

TEST_CASE("gen_linreg_synthetic sizes, determinism and noise-free fit") {
  const auto g = gen_linreg_synthetic(20, 30, 7);
  CHECK(g.partition.clients() == 20);
  for (auto s : g.partition.sizes()) CHECK(s >= 50);
  CHECK(disjoint_exhaustive(g.partition, g.data.rows()));
  CHECK(g.data.features.cols() == 30);

  const auto h = gen_linreg_synthetic(20, 30, 7);
  CHECK(g.data.features == h.data.features);
  CHECK(g.data.targets == h.data.targets);
  CHECK(g.truth == h.truth);
  CHECK(gen_linreg_synthetic(20, 30, 8).truth != g.truth);

  const auto clean = gen_linreg_synthetic(5, 4, 3, 0.0);
  const Vector r = clean.data.features * clean.truth - clean.data.targets;
  CHECK(r.norm() <= 1e-10);

  // within a client all rows share one scale eta_i: entries of A_i / eta_i
  // lie in (0, 1], so every entry of a client has the sign of eta_i
  for (const auto& rows : g.partition.rows) {
    const Dataset local = select_rows(g.data, rows);
    const bool pos = local.features(0, 0) > 0;
    CHECK(((local.features.array() > 0) == pos).all());
  }
}

TEST_CASE("gen_logreg_synthetic label skew") {
  const auto plan = SkewPlan::default_for(20);
  CHECK(plan.count(LabelRegime::OnlyZero) == 11);
  CHECK(plan.count(LabelRegime::OnlyOne) == 8);
  CHECK(plan.count(LabelRegime::Mixed) == 1);
  const auto g = gen_logreg_synthetic(20, 30, plan, 5);
  CHECK(disjoint_exhaustive(g.partition, g.data.rows()));
  for (auto s : g.partition.sizes()) CHECK(s >= 50);
  check_regimes(g.data, g.partition, plan);
  const auto h = gen_logreg_synthetic(20, 30, plan, 5);
  CHECK(g.partition.rows == h.partition.rows);
  CHECK(g.data.features == h.data.features);

  const auto one = gen_logreg_synthetic(1, 3, SkewPlan::uniform(1, LabelRegime::Mixed), 2);
  const auto ones = label_ones(one.data, one.partition.rows[0]);
  CHECK(ones > 0);
  CHECK(ones < one.data.rows());

  const auto eight = SkewPlan::default_for(8);
  CHECK(eight.count(LabelRegime::OnlyZero) == 4);
  CHECK(eight.count(LabelRegime::OnlyOne) == 3);
  CHECK(eight.count(LabelRegime::Mixed) == 1);
}

TEST_CASE("parse_csv examples") {
  const std::string text = "x,y\n1,2\n2,4\n3,6\n";
  CsvOptions opt;
  opt.target = "y";
  opt.add_intercept = true;
  auto d = parse_csv(text, opt);
  Matrix expect(3, 2);
  expect << 1, 1, 2, 1, 3, 1;
  CHECK(d.features == expect);
  CHECK(d.targets == testing::vec({2, 4, 6}));

  opt.normalize = true;
  d = parse_csv(text, opt);
  CHECK(d.features(0, 0) == doctest::Approx(-1.224744871391589));
  CHECK(d.features(1, 0) == doctest::Approx(0.0));
  CHECK(d.features(2, 0) == doctest::Approx(1.224744871391589));
  CHECK(d.features.col(1) == Vector::Ones(3));
}

TEST_CASE("parse_csv errors") {
  CsvOptions opt;
  opt.target = "y";
  try {
    parse_csv("x,y\n1,2\n,4\n", opt);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row() == 3);
    CHECK(e.column() == "x");
    CHECK(std::string(e.what()).find("x") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_csv("x,y\n1,abc\n", opt), ParseError);
  CHECK_THROWS_AS(parse_csv("x,y\n", opt), EmptyDataset);
  opt.target = "z";
  CHECK_THROWS_AS(parse_csv("x,y\n1,2\n", opt), ParseError);
}

TEST_CASE("parse_csv one-hot encodes categorical columns") {
  CsvOptions opt;
  opt.target = "class";
  opt.task = TaskKind::Classification;
  const auto d = parse_csv("class,color,size\np,red,1\ne,blue,2\np,red,3\n", opt);
  CHECK(d.features.cols() == 3);  // color=blue, color=red, size
  CHECK(d.feature_names[0] == "color=blue");
  CHECK(d.feature_names[1] == "color=red");
  CHECK(d.targets == testing::vec({1, 0, 1}));  // e -> 0, p -> 1
  CHECK(d.features.row(1) == testing::vec({1, 0, 2}).transpose());
}

TEST_CASE("load_csv reads files") {
  const auto path = std::filesystem::temp_directory_path() / "fedhybrid_load_csv.csv";
  {
    std::ofstream out(path);
    out << "a,b,t\n1,2,3\n4,5,6\n";
  }
  CsvOptions opt;
  opt.target = "t";
  const auto d = load_csv(path, opt);
  CHECK(d.rows() == 2);
  CHECK(d.features.cols() == 2);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_csv(path, opt), Error);
}

TEST_CASE("partition_sorted_blocks") {
  Dataset d;
  d.features = Matrix::Zero(5, 1);
  d.targets = testing::vec({5, 1, 3, 2, 4});
  const auto p = partition_sorted_blocks(d, {3, 2});
  std::vector<double> first, second;
  for (auto r : p.rows[0]) first.push_back(d.targets(static_cast<Eigen::Index>(r)));
  for (auto r : p.rows[1]) second.push_back(d.targets(static_cast<Eigen::Index>(r)));
  CHECK(first == std::vector<double>{1, 2, 3});
  CHECK(second == std::vector<double>{4, 5});
  const auto whole = partition_sorted_blocks(d, {5});
  CHECK(whole.rows[0] == std::vector<std::size_t>{1, 3, 2, 4, 0});
  CHECK_THROWS_AS(partition_sorted_blocks(d, {3, 3}), SizeMismatch);
}

TEST_CASE("sorted partition property on random data") {
  Rng rng(9);
  Dataset d;
  d.features = testing::random_matrix(rng, 100, 2);
  d.targets = testing::random_vector(rng, 100);
  const auto sizes = uniform_sizes(100, 7, rng);
  CHECK(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) == 100);
  for (auto s : sizes) CHECK(s >= 1);
  const auto p = partition_sorted_blocks(d, sizes);
  CHECK(disjoint_exhaustive(p, 100));
  for (std::size_t i = 0; i + 1 < p.clients(); ++i) {
    double hi = -1e300, lo = 1e300;
    for (auto r : p.rows[i]) hi = std::max(hi, d.targets(static_cast<Eigen::Index>(r)));
    for (auto r : p.rows[i + 1]) lo = std::min(lo, d.targets(static_cast<Eigen::Index>(r)));
    CHECK(hi <= lo);
  }
}

TEST_CASE("partition_label_skew") {
  Rng rng(10);
  Dataset d;
  d.task = TaskKind::Classification;
  d.features = testing::random_matrix(rng, 200, 3);
  d.targets.resize(200);
  for (int i = 0; i < 200; ++i) d.targets(i) = i % 3 == 0 ? 1.0 : 0.0;
  const auto plan = SkewPlan::counts(4, 3, 1);
  const auto p = partition_label_skew(d, plan, 3);
  CHECK(disjoint_exhaustive(p, 200));
  check_regimes(d, p, plan);
  CHECK(partition_label_skew(d, plan, 3).rows == p.rows);

  const auto whole = partition_label_skew(d, SkewPlan::uniform(1, LabelRegime::Mixed), 1);
  CHECK(whole.rows[0].size() == 200);

  Dataset few = d;
  few.targets.setZero();
  few.targets(0) = 1.0;
  CHECK_THROWS_AS(partition_label_skew(few, SkewPlan::counts(1, 2, 0), 1), InfeasibleSkew);
}

TEST_CASE("build_objectives follows the task") {
  const auto g = gen_linreg_synthetic(3, 4, 1);
  const auto objs = build_objectives(g.data, g.partition, 0.1);
  CHECK(objs.size() == 3);
  CHECK(objs[0]->is_quadratic());
  CHECK(objs[0]->sample_count() == g.partition.rows[0].size());
  const auto l = gen_logreg_synthetic(3, 4, SkewPlan::default_for(3), 1);
  CHECK_FALSE(build_objectives(l.data, l.partition, 0.1)[0]->is_quadratic());
}
