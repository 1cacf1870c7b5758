#include "support/oracles.hpp"

#include <cmath>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace oracle {

Eigen::VectorXd rollout_prediction(const fblin::AugmentedModel& aug,
                                   const Eigen::VectorXd& xbar, const Eigen::VectorXd& du,
                                   const Eigen::VectorXd& dg) {
  const Eigen::Index n_p = du.size();
  const Eigen::Index s = aug.E.cols();
  Eigen::VectorXd y(n_p);
  Eigen::VectorXd state = xbar;
  for (Eigen::Index i = 0; i < n_p; ++i) {
    Eigen::VectorXd next = aug.A * state + aug.B * du(i);
    if (s > 0) next += aug.E * dg.segment(i * s, s);
    y(i) = aug.C.dot(next);
    state = next;
  }
  return y;
}

Eigen::VectorXd minimise_quadratic(const std::function<double(const Eigen::VectorXd&)>& cost,
                                   int dim) {
  const double j0 = cost(Eigen::VectorXd::Zero(dim));
  Eigen::VectorXd g(dim);
  Eigen::MatrixXd h(dim, dim);
  std::vector<double> j_unit(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e(i) = 1.0;
    j_unit[static_cast<std::size_t>(i)] = cost(e);
    e(i) = 2.0;
    const double j2 = cost(e);
    h(i, i) = j2 - 2.0 * j_unit[static_cast<std::size_t>(i)] + j0;
    g(i) = j_unit[static_cast<std::size_t>(i)] - 0.5 * h(i, i) - j0;
  }
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
      e(i) = 1.0;
      e(j) = 1.0;
      h(i, j) = h(j, i) = cost(e) - j_unit[static_cast<std::size_t>(i)] -
                          j_unit[static_cast<std::size_t>(j)] + j0;
    }
  return h.ldlt().solve(-g);
}

void LinearKf::predict(const Eigen::MatrixXd& A, const Eigen::VectorXd& B,
                       const Eigen::MatrixXd& Q, double u) {
  x = A * x + B * u;
  P = A * P * A.transpose() + Q;
}

void LinearKf::update(const Eigen::RowVectorXd& C, double r, double y) {
  const Eigen::VectorXd ct = C.transpose();
  const double s = C.dot(P * ct) + r;
  const Eigen::VectorXd k = P * ct / s;
  x += k * (y - C.dot(x));
  const Eigen::MatrixXd ikc =
      Eigen::MatrixXd::Identity(P.rows(), P.cols()) - k * C;
  P = ikc * P * ikc.transpose() + k * r * k.transpose();
}

std::complex<double> dlti_frf(const Eigen::MatrixXd& A, const Eigen::VectorXd& B,
                              const Eigen::RowVectorXd& C, double omega) {
  const std::complex<double> z(std::cos(omega), std::sin(omega));
  const Eigen::Index n = A.rows();
  Eigen::MatrixXcd m = z * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>();
  const Eigen::VectorXcd sol = m.partialPivLu().solve(B.cast<std::complex<double>>());
  return (C.cast<std::complex<double>>() * sol)(0);
}

void lift(const Eigen::MatrixXd& A, const Eigen::VectorXd& B, std::size_t n_steps,
          Eigen::MatrixXd& a_lift, Eigen::VectorXd& b_lift) {
  const Eigen::Index n = A.rows();
  a_lift = Eigen::MatrixXd::Identity(n, n);
  b_lift = Eigen::VectorXd::Zero(n);
  for (std::size_t j = 0; j < n_steps; ++j) {
    b_lift = A * b_lift + B;
    a_lift = A * a_lift;
  }
}

double duffing_static_deflection(double k_l, double k_q, double k_c, double u) {
  auto f = [&](double y) { return k_l * y + k_q * y * y + k_c * y * y * y - u; };
  double lo = 0.0;
  double hi = u / k_l;  // stiffening only adds restoring force, so y* <= u/k_l
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0) hi = mid;
    else lo = mid;
  }
  return 0.5 * (lo + hi);
}

fblin::PolyNlssModel random_model(std::uint64_t seed, int n, int s) {
  fblin::rng::Stream rng(fblin::rng::derive_seed(seed, "oracle/random-model"));
  fblin::PolyNlssModel m;
  m.A.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m.A(i, j) = rng.uniform(-1.0, 1.0);
  const double radius = m.A.eigenvalues().cwiseAbs().maxCoeff();
  if (radius > 0.0) m.A *= 0.9 / radius;
  m.B.resize(n);
  m.C.resize(n);
  for (int i = 0; i < n; ++i) {
    m.B(i) = rng.uniform(-1.0, 1.0);
    m.C(i) = rng.uniform(-1.0, 1.0);
  }
  m.E.resize(n, s);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < s; ++p) m.E(i, p) = rng.uniform(-0.1, 0.1);
  m.exponents.resize(static_cast<std::size_t>(s));
  for (int p = 0; p < s; ++p) m.exponents[static_cast<std::size_t>(p)] = p + 2;
  m.ts = 1e-3;
  m.name = "random";
  fblin::validate(m);
  return m;
}

}  // namespace oracle
