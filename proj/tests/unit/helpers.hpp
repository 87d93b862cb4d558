#pragma once

#include <memory>
#include <vector>

#include "fedhybrid/data.hpp"
#include "fedhybrid/model.hpp"

namespace testing {

using fedhybrid::Matrix;
using fedhybrid::Vector;

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

/// f(x) = 1/2 (x - c)^2 in one dimension.
inline fedhybrid::ObjectivePtr scalar_quadratic(double c) {
  return std::make_shared<fedhybrid::QuadraticObjective>(Matrix::Ones(1, 1),
                                                         vec({c}), 0.0);
}

/// n = 1, f = x^2 / 2
inline fedhybrid::ProblemInstance toy1(double mu = 1.0) {
  return fedhybrid::ProblemInstance({scalar_quadratic(0.0)}, mu);
}

/// f1 = (x - 1)^2 / 2, f2 = (x + 1)^2 / 2
inline fedhybrid::ProblemInstance toy2(double mu = 9.0) {
  return fedhybrid::ProblemInstance({scalar_quadratic(1.0), scalar_quadratic(-1.0)},
                                    mu);
}

inline Matrix random_matrix(fedhybrid::Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

inline Vector random_vector(fedhybrid::Rng& rng, Eigen::Index n) {
  return random_matrix(rng, n, 1).col(0);
}

inline fedhybrid::Blocks random_blocks(fedhybrid::Rng& rng, std::size_t n,
                                       Eigen::Index d, double scale = 1.0) {
  fedhybrid::Blocks out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(scale * random_vector(rng, d));
  return out;
}

inline Matrix random_spd(fedhybrid::Rng& rng, Eigen::Index n) {
  const Matrix a = random_matrix(rng, n, n);
  return a * a.transpose() + static_cast<double>(n) * Matrix::Identity(n, n);
}

/// Random ridge least-squares problem with n clients.
inline fedhybrid::ProblemInstance random_quadratic(std::uint64_t seed, std::size_t n,
                                                   Eigen::Index d, double mu,
                                                   double ridge = 0.05,
                                                   bool equal_rows = false) {
  fedhybrid::Rng rng(seed, 99);
  std::vector<fedhybrid::ObjectivePtr> objs;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index rows = d + 3 + (equal_rows ? 0 : static_cast<Eigen::Index>(i));
    objs.push_back(std::make_shared<fedhybrid::QuadraticObjective>(
        random_matrix(rng, rows, d), random_vector(rng, rows), ridge));
  }
  return fedhybrid::ProblemInstance(objs, mu);
}

/// Random regularized logistic problem; labels drawn from a random model.
inline fedhybrid::ProblemInstance random_logistic(std::uint64_t seed, std::size_t n,
                                                  Eigen::Index d, double mu,
                                                  double ridge = 0.05) {
  fedhybrid::Rng rng(seed, 77);
  const Vector w = random_vector(rng, d);
  std::vector<fedhybrid::ObjectivePtr> objs;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index rows = 20 + 5 * static_cast<Eigen::Index>(i);
    const Matrix x = random_matrix(rng, rows, d);
    Vector y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      y(r) = rng.uniform() < 1.0 / (1.0 + std::exp(-x.row(r).dot(w))) ? 1.0 : 0.0;
    }
    objs.push_back(std::make_shared<fedhybrid::LogisticObjective>(x, y, ridge));
  }
  return fedhybrid::ProblemInstance(objs, mu);
}

}  // namespace testing
