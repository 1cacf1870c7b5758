// Independent reference implementations the tests compare the library
// against. Everything here is deliberately written the slow, obvious way.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "core/model.hpp"

namespace oracle {

// Predicted outputs by direct rollout of the velocity-form recursion:
// xbar(i+1) = Abar xbar(i) + Bbar du(i) + Ebar dg_block(i), output row i
// is Cbar xbar(i+1). dg stacks n_p blocks of s entries.
Eigen::VectorXd rollout_prediction(const fblin::AugmentedModel& aug,
                                   const Eigen::VectorXd& xbar, const Eigen::VectorXd& du,
                                   const Eigen::VectorXd& dg);

// Minimises a quadratic given only cost evaluations. Differences of a
// quadratic are exact, so the Hessian and gradient are reconstructed
// without truncation error and the minimiser is a dense solve.
Eigen::VectorXd minimise_quadratic(const std::function<double(const Eigen::VectorXd&)>& cost,
                                   int dim);

// Textbook linear Kalman filter, Joseph-form update.
struct LinearKf {
  Eigen::VectorXd x;
  Eigen::MatrixXd P;

  LinearKf(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0) : x(x0), P(p0) {}

  void predict(const Eigen::MatrixXd& A, const Eigen::VectorXd& B,
               const Eigen::MatrixXd& Q, double u);
  void update(const Eigen::RowVectorXd& C, double r, double y);
};

// Frequency response C (e^{jw} I - A)^{-1} B of a discrete LTI system.
std::complex<double> dlti_frf(const Eigen::MatrixXd& A, const Eigen::VectorXd& B,
                              const Eigen::RowVectorXd& C, double omega);

// System seen every n_steps samples under a zero-order-held input:
// A_lift = A^n, B_lift = sum_{j<n} A^j B.
void lift(const Eigen::MatrixXd& A, const Eigen::VectorXd& B, std::size_t n_steps,
          Eigen::MatrixXd& a_lift, Eigen::VectorXd& b_lift);

// Positive root of k_l y + k_q y^2 + k_c y^3 = u (u > 0), by bisection.
double duffing_static_deflection(double k_l, double k_q, double k_c, double u);

// Random model with spectral radius ~0.9, n states and s monomial terms
// (exponents 2, 3, 4, ... in order). Deterministic in the seed.
fblin::PolyNlssModel random_model(std::uint64_t seed, int n, int s);

}  // namespace oracle
