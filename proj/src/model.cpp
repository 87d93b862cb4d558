#include "fedhybrid/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fedhybrid {

namespace {

void require_dim(const Objective& obj, const Vector& x) {
  if (x.size() != obj.dimension()) {
    throw DimensionMismatch("objective has dimension " +
                            std::to_string(obj.dimension()) +
                            ", point has length " + std::to_string(x.size()));
  }
}

// log(1 + exp(z)) without overflow
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

QuadraticObjective::QuadraticObjective(Matrix design, Vector response,
                                       double ridge_share)
    : rows_(static_cast<std::size_t>(design.rows())), ridge_(ridge_share) {
  if (design.rows() == 0 || design.cols() == 0) {
    throw InvalidArgument("quadratic objective: empty design matrix");
  }
  if (design.rows() != response.size()) {
    throw DimensionMismatch("quadratic objective: design has " +
                            std::to_string(design.rows()) +
                            " rows, response has " +
                            std::to_string(response.size()));
  }
  if (ridge_share < 0.0) {
    throw InvalidArgument("quadratic objective: ridge share must be >= 0");
  }
  const double inv_n = 1.0 / static_cast<double>(rows_);
  gram_ = design.transpose() * design * inv_n;
  gram_ = 0.5 * (gram_ + gram_.transpose()).eval();
  moment_ = design.transpose() * response * inv_n;
  offset_ = 0.5 * response.squaredNorm() * inv_n;

  Matrix h = gram_;
  h.diagonal().array() += ridge_;
  const auto ext = eig_extremes(h);
  curvature_ = {ext.min, ext.max};
}

double QuadraticObjective::value(const Vector& x) const {
  require_dim(*this, x);
  return 0.5 * x.dot(gram_ * x) - x.dot(moment_) + offset_ +
         0.5 * ridge_ * x.squaredNorm();
}

Vector QuadraticObjective::gradient(const Vector& x) const {
  require_dim(*this, x);
  return gram_ * x - moment_ + ridge_ * x;
}

Matrix QuadraticObjective::hessian(const Vector& x) const {
  require_dim(*this, x);
  Matrix h = gram_;
  h.diagonal().array() += ridge_;
  return h;
}

LogisticObjective::LogisticObjective(Matrix features, Vector labels,
                                     double ridge_share)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      ridge_(ridge_share) {
  if (features_.rows() == 0 || features_.cols() == 0) {
    throw InvalidArgument("logistic objective: empty feature matrix");
  }
  if (features_.rows() != labels_.size()) {
    throw DimensionMismatch("logistic objective: " +
                            std::to_string(features_.rows()) +
                            " rows vs " + std::to_string(labels_.size()) +
                            " labels");
  }
  for (Eigen::Index j = 0; j < labels_.size(); ++j) {
    if (labels_(j) != 0.0 && labels_(j) != 1.0) {
      throw InvalidArgument("logistic objective: labels must be 0 or 1");
    }
  }
  // sigma_max(X)^2 / (4N) + ridge, using h(1-h) <= 1/4
  const Matrix gram = features_.transpose() * features_;
  const double smax2 = eig_extremes(gram).max;
  curvature_ = {ridge_,
                smax2 / (4.0 * static_cast<double>(features_.rows())) + ridge_};
}

double LogisticObjective::value(const Vector& x) const {
  require_dim(*this, x);
  const Vector z = features_ * x;
  double loss = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    loss += softplus(z(j)) - labels_(j) * z(j);
  }
  return loss / static_cast<double>(z.size()) + 0.5 * ridge_ * x.squaredNorm();
}

Vector LogisticObjective::gradient(const Vector& x) const {
  require_dim(*this, x);
  const Vector z = features_ * x;
  Vector r(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) r(j) = sigmoid(z(j)) - labels_(j);
  return features_.transpose() * r / static_cast<double>(z.size()) +
         ridge_ * x;
}

Matrix LogisticObjective::hessian(const Vector& x) const {
  require_dim(*this, x);
  const Vector z = features_ * x;
  Vector w(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double h = sigmoid(z(j));
    w(j) = h * (1.0 - h);
  }
  Matrix h = features_.transpose() * w.asDiagonal() * features_;
  h /= static_cast<double>(z.size());
  h = 0.5 * (h + h.transpose()).eval();
  h.diagonal().array() += ridge_;
  return h;
}

Curvature convexity_constants(const Objective& objective) {
  const Curvature c = objective.curvature();
  if (!(c.m > 0.0)) {
    throw NotStronglyConvex("objective is not strongly convex: m = " +
                            std::to_string(c.m));
  }
  return c;
}

Evaluation eval(const Objective& objective, const Vector& x) {
  require_dim(objective, x);
  return {objective.value(x), objective.gradient(x), objective.hessian(x)};
}

ProblemInstance::ProblemInstance(std::vector<ObjectivePtr> objectives,
                                 double mu)
    : objectives_(std::move(objectives)), mu_(mu) {
  if (objectives_.empty()) {
    throw InvalidArgument("problem instance needs at least one objective");
  }
  if (!(mu_ > 0.0)) {
    throw InvalidArgument("problem instance: mu must be > 0");
  }
  dim_ = objectives_.front()->dimension();
  curvatures_.reserve(objectives_.size());
  for (const auto& obj : objectives_) {
    if (!obj) throw InvalidArgument("problem instance: null objective");
    if (obj->dimension() != dim_) {
      throw DimensionMismatch("problem instance: objectives disagree on d");
    }
    curvatures_.push_back(obj->curvature());
  }
}

bool ProblemInstance::all_quadratic() const {
  return std::all_of(objectives_.begin(), objectives_.end(),
                     [](const ObjectivePtr& o) { return o->is_quadratic(); });
}

Curvature ProblemInstance::global_curvature() const {
  Curvature g{std::numeric_limits<double>::infinity(),
              -std::numeric_limits<double>::infinity()};
  for (const auto& c : curvatures_) {
    g.m = std::min(g.m, c.m);
    g.l = std::max(g.l, c.l);
  }
  return g;
}

ProblemInstance ProblemInstance::with_mu(double mu) const {
  return ProblemInstance(objectives_, mu);
}

double ProblemInstance::total_value(const Vector& x) const {
  double s = 0.0;
  for (const auto& o : objectives_) s += o->value(x);
  return s;
}

Vector ProblemInstance::total_gradient(const Vector& x) const {
  Vector g = Vector::Zero(dim_);
  for (const auto& o : objectives_) g += o->gradient(x);
  return g;
}

Matrix ProblemInstance::total_hessian(const Vector& x) const {
  Matrix h = Matrix::Zero(dim_, dim_);
  for (const auto& o : objectives_) h += o->hessian(x);
  return h;
}

}  // namespace fedhybrid
