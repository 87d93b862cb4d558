#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "fedhybrid/numerics.hpp"

namespace fedhybrid {

/// Curvature bounds m I <= hessian(x) <= l I valid for every x.
struct Curvature {
  double m = 0.0;
  double l = 0.0;
};

/// Value, gradient and Hessian of one objective at one point.
struct Evaluation {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

/// A client's local, twice differentiable, strongly convex function.
///
/// Implementations are immutable after construction, so every member is
/// safe to call concurrently.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual Eigen::Index dimension() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  virtual Matrix hessian(const Vector& x) const = 0;

  /// Uniform bounds on the Hessian spectrum. Not checked for positivity;
  /// see convexity_constants().
  virtual Curvature curvature() const = 0;

  /// Number of local data rows (FedAvg weights).
  virtual std::size_t sample_count() const = 0;

  /// Constant Hessian; enables closed-form inner solves.
  virtual bool is_quadratic() const { return false; }
};

using ObjectivePtr = std::shared_ptr<const Objective>;

/// f(x) = 1/(2N) ||A x - b||^2 + (ridge/2) ||x||^2 with A of shape N x d.
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(Matrix design, Vector response, double ridge_share);

  Eigen::Index dimension() const override { return gram_.rows(); }
  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  Matrix hessian(const Vector& x) const override;
  Curvature curvature() const override { return curvature_; }
  std::size_t sample_count() const override { return rows_; }
  bool is_quadratic() const override { return true; }

  double ridge_share() const { return ridge_; }

 private:
  std::size_t rows_;
  double ridge_;
  Matrix gram_;     // A^T A / N
  Vector moment_;   // A^T b / N
  double offset_;   // b^T b / (2N)
  Curvature curvature_;
};

/// Regularized logistic loss over rows of `features` (N x d) with labels
/// in {0, 1}:
///   f(x) = 1/N sum_j [softplus(z_j) - y_j z_j] + (ridge/2) ||x||^2,
///   z_j = <x, features.row(j)>.
class LogisticObjective final : public Objective {
 public:
  LogisticObjective(Matrix features, Vector labels, double ridge_share);

  Eigen::Index dimension() const override { return features_.cols(); }
  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  Matrix hessian(const Vector& x) const override;
  Curvature curvature() const override { return curvature_; }
  std::size_t sample_count() const override {
    return static_cast<std::size_t>(features_.rows());
  }

  double ridge_share() const { return ridge_; }

 private:
  Matrix features_;
  Vector labels_;
  double ridge_;
  Curvature curvature_;
};

/// Curvature bounds, rejecting objectives that are not strongly convex.
Curvature convexity_constants(const Objective& objective);

/// Value, gradient and Hessian in one call. Throws DimensionMismatch.
Evaluation eval(const Objective& objective, const Vector& x);

/// n local objectives sharing dimension d plus the penalty mu > 0.
class ProblemInstance {
 public:
  ProblemInstance(std::vector<ObjectivePtr> objectives, double mu);

  std::size_t clients() const { return objectives_.size(); }
  Eigen::Index dimension() const { return dim_; }
  double mu() const { return mu_; }
  const Objective& objective(std::size_t i) const { return *objectives_[i]; }
  const ObjectivePtr& objective_ptr(std::size_t i) const {
    return objectives_[i];
  }
  const std::vector<ObjectivePtr>& objectives() const { return objectives_; }
  bool all_quadratic() const;

  /// Per-client (m_i, l_i).
  const std::vector<Curvature>& curvatures() const { return curvatures_; }
  /// m = min m_i, l = max l_i.
  Curvature global_curvature() const;

  ProblemInstance with_mu(double mu) const;

  /// sum_i f_i(x)
  double total_value(const Vector& x) const;
  Vector total_gradient(const Vector& x) const;
  Matrix total_hessian(const Vector& x) const;

 private:
  std::vector<ObjectivePtr> objectives_;
  std::vector<Curvature> curvatures_;
  Eigen::Index dim_ = 0;
  double mu_ = 0.0;
};

}  // namespace fedhybrid
