#include "core/ukf.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

#include "core/errors.hpp"

namespace fblin {

namespace {
// Smallest eigenvalue tolerated in P; long closed-loop runs drift toward
// indefiniteness without this floor.
constexpr double kEigenFloor = 1e-18;
}  // namespace

Ukf::Ukf(const PolyNlssModel& model, UkfConfig config)
    : model_(model), config_(std::move(config)) {
  validate(model_);
  const Eigen::Index n = model_.order();
  if (config_.q_cov.rows() != n || config_.q_cov.cols() != n)
    throw ValidationError("ukf: q_cov must be n x n");
  if (!config_.q_cov.isApprox(config_.q_cov.transpose()))
    throw ValidationError("ukf: q_cov must be symmetric");
  if (!(config_.r_cov > 0.0)) throw ValidationError("ukf: r_cov must be positive");
  if (!(config_.alpha > 0.0) || config_.alpha > 1.0)
    throw ValidationError("ukf: alpha must lie in (0, 1]");

  const double nd = static_cast<double>(n);
  lambda_ = config_.alpha * config_.alpha * (nd + config_.kappa) - nd;
  const double denom = nd + lambda_;
  if (!(std::abs(denom) > 0.0)) throw ValidationError("ukf: degenerate sigma scaling");

  const Eigen::Index count = 2 * n + 1;
  weights_mean_.resize(count);
  weights_cov_.resize(count);
  weights_mean_(0) = lambda_ / denom;
  weights_cov_(0) = lambda_ / denom + (1.0 - config_.alpha * config_.alpha + config_.beta);
  for (Eigen::Index i = 1; i < count; ++i) {
    weights_mean_(i) = 0.5 / denom;
    weights_cov_(i) = 0.5 / denom;
  }
  reset();
}

void Ukf::reset() {
  x_hat_ = Eigen::VectorXd::Zero(model_.order());
  p_ = config_.q_cov;
  steps_ = 0;
  repairs_ = 0;
}

void Ukf::repair_covariance() {
  p_ = 0.5 * (p_ + p_.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p_);
  if (eig.eigenvalues().minCoeff() < kEigenFloor) {
    const Eigen::VectorXd floored = eig.eigenvalues().cwiseMax(kEigenFloor);
    p_ = eig.eigenvectors() * floored.asDiagonal() * eig.eigenvectors().transpose();
    p_ = 0.5 * (p_ + p_.transpose()).eval();
  }
}

Eigen::MatrixXd Ukf::sigma_points() {
  const Eigen::Index n = model_.order();
  const double scale = static_cast<double>(n) + lambda_;

  Eigen::LLT<Eigen::MatrixXd> llt((scale * p_).eval());
  if (llt.info() != Eigen::Success) {
    ++repairs_;
    repair_covariance();
    llt.compute((scale * p_).eval());
    if (llt.info() != Eigen::Success)
      throw DivergenceError("ukf: covariance not factorisable after repair", steps_);
  }
  const Eigen::MatrixXd root = llt.matrixL();

  Eigen::MatrixXd chi(n, 2 * n + 1);
  chi.col(0) = x_hat_;
  for (Eigen::Index i = 0; i < n; ++i) {
    chi.col(1 + i) = x_hat_ + root.col(i);
    chi.col(1 + n + i) = x_hat_ - root.col(i);
  }
  return chi;
}

void Ukf::predict(double u_applied) {
  const Eigen::Index n = model_.order();
  Eigen::MatrixXd chi = sigma_points();
  for (Eigen::Index i = 0; i < chi.cols(); ++i)
    chi.col(i) = step(model_, chi.col(i), u_applied).x_next;

  // Recombine about the centre point instead of summing weighted columns:
  // with a small alpha the weights are huge and of mixed sign, and the
  // centred form keeps cancellation harmless. Identical algebra since the
  // mean weights sum to one.
  Eigen::VectorXd mean = chi.col(0);
  for (Eigen::Index i = 1; i < chi.cols(); ++i)
    mean += weights_mean_(i) * (chi.col(i) - chi.col(0));

  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < chi.cols(); ++i) {
    const Eigen::VectorXd d = chi.col(i) - mean;
    p += weights_cov_(i) * (d * d.transpose());
  }
  x_hat_ = std::move(mean);
  p_ = p + config_.q_cov;
  ++steps_;
  if (!x_hat_.allFinite()) throw DivergenceError("ukf: predicted mean non-finite", steps_);
}

void Ukf::update(double y_meas) {
  const double y_pred = model_.C.dot(x_hat_);
  const double innovation = y_meas - y_pred;
  if (!std::isfinite(innovation))
    throw DivergenceError("ukf: non-finite innovation", steps_);

  const Eigen::VectorXd pc = p_ * model_.C.transpose();
  const double s = model_.C.dot(pc) + config_.r_cov;
  const Eigen::VectorXd k = pc / s;

  x_hat_ += k * innovation;
  // Joseph form keeps P symmetric PSD under roundoff.
  const Eigen::Index n = model_.order();
  const Eigen::MatrixXd ikc = Eigen::MatrixXd::Identity(n, n) - k * model_.C;
  p_ = ikc * p_ * ikc.transpose() + config_.r_cov * (k * k.transpose());
  repair_covariance();
}

double Ukf::filtered_output() const { return model_.C.dot(x_hat_); }

}  // namespace fblin
