#pragma once

#include <functional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "fedhybrid/error.hpp"

namespace fedhybrid {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One length-d block per client (x_i or lambda_i stacked by client index).
using Blocks = std::vector<Vector>;

/// Default central-difference step.
inline constexpr double kFiniteDiffStep = 1e-5;

/// Solve A x = b for symmetric positive definite A.
///
/// Cholesky factorization followed by one step of iterative refinement.
/// Throws NotSPD when a pivot is non-positive and DimensionMismatch when
/// the shapes disagree.
Vector spd_solve(const Matrix& a, const Vector& b);

/// Reusable Cholesky factor for repeated solves with the same matrix.
class SpdFactor {
 public:
  SpdFactor() = default;
  explicit SpdFactor(const Matrix& a);

  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;
  Eigen::Index size() const { return llt_.rows(); }

 private:
  Matrix a_;
  Eigen::LLT<Matrix> llt_;
};

struct EigenExtremes {
  double min = 0.0;
  double max = 0.0;
};

/// Smallest and largest eigenvalue of a symmetric matrix.
EigenExtremes eig_extremes(const Matrix& a);

using ScalarField = std::function<double(const Vector&)>;
using VectorField = std::function<Vector(const Vector&)>;

/// Central differences (f(x + h e_j) - f(x - h e_j)) / 2h per coordinate.
Vector finite_diff_grad(const ScalarField& f, const Vector& x,
                        double h = kFiniteDiffStep);

/// Central-difference Jacobian of a vector field; column j is d F / d x_j.
Matrix finite_diff_jacobian(const VectorField& f, const Vector& x,
                            double h = kFiniteDiffStep);

/// True when every entry is finite.
bool all_finite(const Vector& v);

// Block helpers shared by the algorithm modules.
Vector stack(const Blocks& blocks);
Blocks unstack(const Vector& v, std::size_t count, Eigen::Index dim);
Blocks zero_blocks(std::size_t count, Eigen::Index dim);
double squared_norm(const Blocks& blocks);
double dot(const Blocks& lhs, const Blocks& rhs);

}  // namespace fedhybrid
