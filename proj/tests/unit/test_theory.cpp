#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "fedhybrid/theory.hpp"
#include "helpers.hpp"

using namespace fedhybrid;
using testing::vec;

namespace {

Vector stack_point(const PrimalPoint& p) {
  Vector v(p.x0.size() * static_cast<Eigen::Index>(p.x.size() + 1));
  v << p.x0, stack(p.x);
  return v;
}

}  // namespace

TEST_CASE("constraint_matrix layout") {
  const Matrix w = constraint_matrix(2, 1);
  Matrix expected(2, 3);
  expected << 1, -1, 0, 1, 0, -1;
  CHECK(w == expected);
  CHECK(constraint_matrix(3, 2).rows() == 6);
  CHECK(constraint_matrix(3, 2).cols() == 8);
}

TEST_CASE("lagrangian_hessian on the scalar toy") {
  const Matrix h = lagrangian_hessian(testing::toy1(), {vec({0}), {vec({0})}}, 1.0);
  Matrix expected(2, 2);
  expected << 1, -1, -1, 2;
  CHECK((h - expected).norm() < 1e-15);
}

TEST_CASE("dual formulas on the scalar toy") {
  const auto t = testing::toy1();
  for (double l : {-2.0, 0.0, 1.0}) {
    CHECK(dual_grad_formula({vec({l})}, t, 1.0)(0) == doctest::Approx(-l));
    CHECK(std::abs(dual_hessian_formula({vec({l})}, t, 1.0)(0, 0) + 1.0) <= 1e-10);
  }
  CHECK(approx_dual_newton_dir({vec({0}), {vec({2})}}, t, 1.0)(0) == doctest::Approx(4.0));
}

TEST_CASE("dual gradient vanishes at lambda*") {
  for (const auto& p : {testing::toy2(), testing::random_quadratic(2, 3, 2, 1.0),
                        testing::random_logistic(2, 3, 2, 1.0)}) {
    const auto c = kkt_optimum(p);
    CHECK(dual_grad_formula(c.lambda, p, p.mu()).norm() <= 1e-9);
  }
}

TEST_CASE("dual formulas match finite differences") {
  for (const auto& p : {testing::toy2(), testing::random_quadratic(3, 5, 3, 1.0),
                        testing::random_logistic(4, 3, 2, 0.8)}) {
    const auto n = p.clients();
    const auto d = p.dimension();
    Rng rng(20);
    for (int s = 0; s < 20; ++s) {
      const Vector l = stack(testing::random_blocks(rng, n, d));
      const auto g = [&](const Vector& v) { return dual_value(unstack(v, n, d), p, p.mu()); };
      const Vector fd = finite_diff_grad(g, l, 1e-5);
      const Vector an = dual_grad_formula(unstack(l, n, d), p, p.mu());
      CHECK((fd - an).cwiseAbs().maxCoeff() <= 1e-6 * (1 + an.norm()));
      if (s < 5) {
        const Matrix fh = finite_diff_jacobian(
            [&](const Vector& v) { return dual_grad_formula(unstack(v, n, d), p, p.mu()); },
            l, 1e-5);
        const Matrix ah = dual_hessian_formula(unstack(l, n, d), p, p.mu());
        CHECK((fh - ah).cwiseAbs().maxCoeff() <= 1e-5);
      }
    }
  }
}

TEST_CASE("dual curvature bounds") {
  for (const auto& p : {testing::random_quadratic(5, 4, 3, 1.0),
                        testing::random_logistic(5, 4, 3, 0.5)}) {
    const auto gc = p.global_curvature();
    Rng rng(5);
    for (int s = 0; s < 10; ++s) {
      const Matrix h = -dual_hessian_formula(testing::random_blocks(rng, 4, 3), p, p.mu());
      const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(h).eigenvalues();
      CHECK(eig.minCoeff() >= 1 / (p.mu() + gc.l) - 1e-8);
      CHECK(eig.maxCoeff() <= 1 / p.mu() + 1e-8);
    }
  }
}

TEST_CASE("approximate Newton direction is zero at consensus") {
  const auto p = testing::random_logistic(6, 3, 2, 1.0);
  const Vector w = vec({0.3, -1.2});
  CHECK(approx_dual_newton_dir({w, Blocks(3, w)}, p, 1.0).norm() == 0.0);
}

TEST_CASE("Lemma 2: exact direction against the weighted-average form") {
  const auto p = testing::random_quadratic(7, 3, 2, 1.4);
  Rng rng(7);
  for (int s = 0; s < 5; ++s) {
    const PrimalPoint x{testing::random_vector(rng, 2), testing::random_blocks(rng, 3, 2)};
    const Vector d = exact_dual_newton_dir(x, p, 1.4);
    const Matrix w = constraint_matrix(3, 2);
    const Matrix h = lagrangian_hessian(p, x, 1.4);

    // independent Hessian-weighted average
    Matrix hs = Matrix::Zero(2, 2);
    Vector hx = Vector::Zero(2);
    for (std::size_t i = 0; i < 3; ++i) {
      const Matrix hi = p.objective(i).hessian(x.x[i]);
      hs += hi;
      hx += hi * x.x[i];
    }
    const Vector y = hs.ldlt().solve(hx);
    CHECK((hessian_weighted_average(x, p) - y).norm() <= 1e-12);

    const Vector rhs = h * (stack_point({y, Blocks(3, y)}) - stack_point(x));
    const Vector lhs = w.transpose() * d;
    CHECK((lhs - rhs).norm() <= 1e-8 * (1 + rhs.norm()));
  }
}

TEST_CASE("report shape") {
  CheckResult c{"x"};
  c.slack = 0.1;
  c.observe(0, -1.0);
  c.observe(1, 0.05);
  CHECK(c.pass);
  c.observe(2, 0.2);
  c.observe(3, std::nan(""));
  CHECK_FALSE(c.pass);
  CHECK(c.first_violation == 2u);
  CHECK(c.checked == 4);
  Report r{{c}};
  CHECK_FALSE(r.pass());
  CHECK(r.find("x") != nullptr);
  CHECK(r.find("y") == nullptr);
  CHECK(r.to_text().find("x") != std::string::npos);
}

TEST_CASE("descent monitors on the two-client toy") {
  const auto p = testing::toy2(9.0);
  const auto c = kkt_optimum(p);
  for (const auto& newton : {std::vector<std::size_t>{}, std::vector<std::size_t>{1},
                             std::vector<std::size_t>{0, 1}}) {
    const auto plan = safe_stepsizes(p.curvatures(), 9.0, kinds_with_newton(2, newton));
    const auto rc = rate_rho(plan, p.curvatures(), 9.0);
    InitialState init{{vec({2}), vec({-0.5})}, {vec({0.3}), vec({1})}, std::nullopt};
    const auto trace = run(p, plan, 200, {}, init);
    const auto report = descent_monitors(trace.snapshots, plan, rc, p, c);
    CHECK_MESSAGE(report.pass(), report.to_text());
    for (const char* name : {"lemma3", "lemma4", "lemma_mx", "theorem1", "lemma_b1", "lemma_b2"}) {
      REQUIRE(report.find(name) != nullptr);
      CHECK(report.find(name)->checked > 0);
    }
  }
}

TEST_CASE("descent monitors with doubled dual steps stay well-formed") {
  const auto p = testing::random_quadratic(8, 3, 2, 1.0);
  const auto c = kkt_optimum(p);
  auto plan = safe_stepsizes(p.curvatures(), 1.0, kinds_with_newton(3, {1}));
  for (auto& b : plan.b) b *= 2.0;
  const auto rc = rate_rho(plan, p.curvatures(), 1.0);
  const auto trace = run(p, plan, 50);
  const auto report = descent_monitors(trace.snapshots, plan, rc, p, c);
  CHECK(report.checks.size() == 6);
  for (const auto& ch : report.checks) {
    CHECK(ch.checked > 0);
    CHECK((ch.pass || ch.first_violation.has_value()));
  }
  CHECK_FALSE(report.to_text().empty());
}

TEST_CASE("descent monitors pass vacuously at the optimum") {
  const auto p = testing::toy2(9.0);
  const auto c = kkt_optimum(p);
  const auto plan = safe_stepsizes(p.curvatures(), 9.0, kinds_with_newton(2, {}));
  const auto rc = rate_rho(plan, p.curvatures(), 9.0);
  InitialState init{Blocks(2, c.omega), c.lambda, c.omega};
  const auto trace = run(p, plan, 5, {}, init);
  const auto report = descent_monitors(trace.snapshots, plan, rc, p, c);
  CHECK_MESSAGE(report.pass(), report.to_text());
}

TEST_CASE("curvature_check examples") {
  const auto t = testing::toy1();
  auto r = curvature_check(t, 1.0, 3, 1);
  CHECK_MESSAGE(r.pass(), r.to_text());
  // -hess g = 1 at mu = 1 lies in [1/2, 1]
  CHECK(-dual_hessian_formula({vec({0})}, t, 1.0)(0, 0) == doctest::Approx(1.0));

  const auto big = testing::toy1(100.0);
  const double h = -dual_hessian_formula({vec({0})}, big, 100.0)(0, 0);
  CHECK(h >= 1 / 101.0 - 1e-12);
  CHECK(h <= 1 / 100.0 + 1e-12);
  CHECK(curvature_check(big, 100.0, 3, 1).pass());

  r = curvature_check(testing::random_quadratic(9, 5, 3, 2.0), 2.0, 4, 9);
  CHECK_MESSAGE(r.pass(), r.to_text());
  CHECK(r.find("primal_curv")->checked == 1);  // constant Hessian: checked once
  r = curvature_check(testing::random_logistic(9, 5, 3, 0.5), 0.5, 4, 9);
  CHECK_MESSAGE(r.pass(), r.to_text());
}

TEST_CASE("lemma1_check passes on small instances") {
  for (const auto& p : {testing::toy2(), testing::random_quadratic(10, 5, 3, 1.0),
                        testing::random_logistic(10, 5, 3, 1.0)}) {
    const auto r = lemma1_check(p, p.mu(), 3, 10);
    CHECK_MESSAGE(r.pass(), r.to_text());
  }
}
