#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fedhybrid/numerics.hpp"
#include "helpers.hpp"

using namespace fedhybrid;
using testing::vec;

TEST_CASE("spd_solve examples") {
  CHECK((spd_solve(Matrix::Identity(2, 2), vec({3, -1})) - vec({3, -1})).norm() == 0.0);
  Matrix diag(2, 2);
  diag << 2, 0, 0, 4;
  CHECK((spd_solve(diag, vec({2, 4})) - vec({1, 1})).norm() < 1e-15);
  Matrix a(2, 2);
  a << 2, 1, 1, 2;
  CHECK((spd_solve(a, vec({3, 3})) - vec({1, 1})).norm() < 1e-15);
}

TEST_CASE("spd_solve errors") {
  Matrix indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  CHECK_THROWS_AS(spd_solve(indefinite, vec({1, 1})), NotSPD);
  CHECK_THROWS_AS(spd_solve(-Matrix::Identity(2, 2), vec({1, 1})), NotSPD);
  CHECK_THROWS_AS(spd_solve(Matrix::Identity(2, 2), vec({1, 1, 1})), DimensionMismatch);
  CHECK_THROWS_AS(spd_solve(Matrix::Ones(2, 3), vec({1, 1})), DimensionMismatch);
}

TEST_CASE("spd_solve recovers x from A x up to dimension 200") {
  Rng rng(5);
  for (Eigen::Index n : {1, 2, 7, 50, 200}) {
    const Matrix a = testing::random_spd(rng, n);
    const Vector x = testing::random_vector(rng, n);
    const Vector b = a * x;
    const Vector got = spd_solve(a, b);
    CHECK((got - x).norm() <= 1e-9 * x.norm());
    CHECK((a * got - b).norm() <= 1e-10 * (1.0 + b.norm()));
  }
}

TEST_CASE("SpdFactor reuse matches spd_solve") {
  Rng rng(6);
  const Matrix a = testing::random_spd(rng, 6);
  const SpdFactor f(a);
  const Vector b = testing::random_vector(rng, 6);
  CHECK((f.solve(b) - spd_solve(a, b)).norm() < 1e-13);
  const Matrix inv = f.solve(Matrix(Matrix::Identity(6, 6)));
  CHECK((a * inv - Matrix::Identity(6, 6)).norm() < 1e-12);
}

TEST_CASE("eig_extremes examples") {
  auto e = eig_extremes(Matrix::Identity(3, 3));
  CHECK(e.min == doctest::Approx(1.0));
  CHECK(e.max == doctest::Approx(1.0));
  Matrix d(2, 2);
  d << 2, 0, 0, 5;
  e = eig_extremes(d);
  CHECK(e.min == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(e.max == doctest::Approx(5.0).epsilon(1e-12));
  Matrix a(2, 2);
  a << 2, 1, 1, 2;
  e = eig_extremes(a);
  CHECK(std::abs(e.min - 1.0) < 1e-12);
  CHECK(std::abs(e.max - 3.0) < 1e-12);
  CHECK_THROWS_AS(eig_extremes(Matrix::Ones(2, 3)), DimensionMismatch);
}

TEST_CASE("eig_extremes bounds random quadratic forms") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix b = testing::random_matrix(rng, 8, 8);
    const Matrix a = 0.5 * (b + b.transpose());
    const auto e = eig_extremes(a);
    for (int s = 0; s < 50; ++s) {
      const Vector v = testing::random_vector(rng, 8);
      const double q = v.dot(a * v) / v.squaredNorm();
      CHECK(q >= e.min - 1e-12);
      CHECK(q <= e.max + 1e-12);
    }
  }
}

TEST_CASE("finite_diff_grad examples") {
  const auto g = finite_diff_grad([](const Vector& x) { return x(0) * x(0); }, vec({1}));
  CHECK(std::abs(g(0) - 2.0) < 1e-8);
  const auto z = finite_diff_grad([](const Vector&) { return 4.0; }, vec({1, 2, 3}));
  CHECK(z.norm() == 0.0);
  const auto p = finite_diff_grad([](const Vector& x) { return x(0) * x(1); }, vec({2, 3}));
  CHECK(std::abs(p(0) - 3.0) < 1e-8);
  CHECK(std::abs(p(1) - 2.0) < 1e-8);
  CHECK_THROWS_AS(finite_diff_grad([](const Vector&) { return 0.0; }, vec({1}), 0.0),
                  InvalidArgument);
}

TEST_CASE("finite_diff_jacobian of a linear map") {
  Matrix a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  const Matrix j = finite_diff_jacobian([&](const Vector& x) { return Vector(a * x); },
                                       vec({0.1, -0.2, 0.3}));
  CHECK((j - a).norm() < 1e-9);
}

TEST_CASE("block helpers") {
  const Blocks b{vec({1, 2}), vec({3, 4}), vec({5, 6})};
  const Vector s = stack(b);
  CHECK(s.size() == 6);
  CHECK(s(4) == 5.0);
  const Blocks u = unstack(s, 3, 2);
  for (std::size_t i = 0; i < 3; ++i) CHECK((u[i] - b[i]).norm() == 0.0);
  CHECK(squared_norm(b) == doctest::Approx(91.0));
  CHECK(dot(b, b) == doctest::Approx(91.0));
  CHECK(squared_norm(zero_blocks(4, 3)) == 0.0);
  CHECK_THROWS_AS(unstack(s, 4, 2), DimensionMismatch);
  CHECK(all_finite(s));
  Vector bad = s;
  bad(0) = std::nan("");
  CHECK_FALSE(all_finite(bad));
}
