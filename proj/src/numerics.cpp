#include "fedhybrid/numerics.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace fedhybrid {

namespace {

void require_square(const Matrix& a, const char* op) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch(std::string(op) + ": matrix is " +
                            std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + ", expected square");
  }
}

}  // namespace

SpdFactor::SpdFactor(const Matrix& a) : a_(a) {
  require_square(a, "spd factor");
  llt_.compute(a);
  // Eigen reports NumericalIssue exactly when a pivot is <= 0.
  if (llt_.info() != Eigen::Success) {
    throw NotSPD("spd factor: non-positive pivot in Cholesky factorization");
  }
}

Vector SpdFactor::solve(const Vector& b) const {
  if (b.size() != a_.rows()) {
    throw DimensionMismatch("spd solve: rhs has length " +
                            std::to_string(b.size()) + ", matrix has order " +
                            std::to_string(a_.rows()));
  }
  Vector x = llt_.solve(b);
  // one refinement sweep
  const Vector r = b - a_ * x;
  x += llt_.solve(r);
  return x;
}

Matrix SpdFactor::solve(const Matrix& b) const {
  if (b.rows() != a_.rows()) {
    throw DimensionMismatch("spd solve: rhs has " + std::to_string(b.rows()) +
                            " rows, matrix has order " +
                            std::to_string(a_.rows()));
  }
  Matrix x = llt_.solve(b);
  const Matrix r = b - a_ * x;
  x += llt_.solve(r);
  return x;
}

Vector spd_solve(const Matrix& a, const Vector& b) {
  require_square(a, "spd_solve");
  if (a.rows() != b.size()) {
    throw DimensionMismatch("spd_solve: matrix order " +
                            std::to_string(a.rows()) + " vs rhs length " +
                            std::to_string(b.size()));
  }
  return SpdFactor(a).solve(b);
}

EigenExtremes eig_extremes(const Matrix& a) {
  require_square(a, "eig_extremes");
  if (a.rows() == 0) {
    throw DimensionMismatch("eig_extremes: empty matrix");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();  // ascending
  return {ev(0), ev(ev.size() - 1)};
}

Vector finite_diff_grad(const ScalarField& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite_diff_grad: h must be > 0");
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe(j) = x(j) + h;
    const double up = f(probe);
    probe(j) = x(j) - h;
    const double down = f(probe);
    probe(j) = x(j);
    g(j) = (up - down) / (2.0 * h);
  }
  return g;
}

Matrix finite_diff_jacobian(const VectorField& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite_diff_jacobian: h must be > 0");
  Matrix jac;
  Vector probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe(j) = x(j) + h;
    const Vector up = f(probe);
    probe(j) = x(j) - h;
    const Vector down = f(probe);
    probe(j) = x(j);
    if (j == 0) jac.resize(up.size(), x.size());
    jac.col(j) = (up - down) / (2.0 * h);
  }
  return jac;
}

bool all_finite(const Vector& v) { return v.allFinite(); }

Vector stack(const Blocks& blocks) {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.size();
  Vector out(total);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.segment(at, b.size()) = b;
    at += b.size();
  }
  return out;
}

Blocks unstack(const Vector& v, std::size_t count, Eigen::Index dim) {
  if (v.size() != static_cast<Eigen::Index>(count) * dim) {
    throw DimensionMismatch("unstack: length " + std::to_string(v.size()) +
                            " is not " + std::to_string(count) + " x " +
                            std::to_string(dim));
  }
  Blocks out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = v.segment(static_cast<Eigen::Index>(i) * dim, dim);
  }
  return out;
}

Blocks zero_blocks(std::size_t count, Eigen::Index dim) {
  return Blocks(count, Vector::Zero(dim));
}

double squared_norm(const Blocks& blocks) {
  double s = 0.0;
  for (const auto& b : blocks) s += b.squaredNorm();
  return s;
}

double dot(const Blocks& lhs, const Blocks& rhs) {
  if (lhs.size() != rhs.size()) {
    throw DimensionMismatch("dot: block counts differ");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < lhs.size(); ++i) s += lhs[i].dot(rhs[i]);
  return s;
}

}  // namespace fedhybrid
