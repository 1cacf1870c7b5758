#include "core/plant.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

#include "core/errors.hpp"
#include "core/rng.hpp"
#include "core/spectra.hpp"

namespace fblin {

DuffingPlant::DuffingPlant(const DuffingParams& params, double substep_s)
    : params_(params), substep_(substep_s) {
  if (params.m <= 0.0) throw ValidationError("duffing: mass must be positive");
  if (substep_s <= 0.0) throw ValidationError("duffing: substep must be positive");
}

void DuffingPlant::advance(double u, double dt) {
  if (dt <= 0.0) throw ValidationError("duffing: dt must be positive");
  const long n_sub = std::max(1L, std::lround(dt / substep_));
  const double h = dt / static_cast<double>(n_sub);

  const auto accel = [this, u](double y, double yd) {
    return (u - params_.c_l * yd - params_.k_l * y - params_.k_q * y * y -
            params_.k_c * y * y * y) /
           params_.m;
  };

  for (long i = 0; i < n_sub; ++i) {
    const double k1y = yd_;
    const double k1v = accel(y_, yd_);
    const double k2y = yd_ + 0.5 * h * k1v;
    const double k2v = accel(y_ + 0.5 * h * k1y, yd_ + 0.5 * h * k1v);
    const double k3y = yd_ + 0.5 * h * k2v;
    const double k3v = accel(y_ + 0.5 * h * k2y, yd_ + 0.5 * h * k2v);
    const double k4y = yd_ + h * k3v;
    const double k4v = accel(y_ + h * k3y, yd_ + h * k3v);
    y_ += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
    yd_ += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  }
  ++samples_advanced_;
  if (!std::isfinite(y_) || !std::isfinite(yd_))
    throw DivergenceError("duffing: state diverged", samples_advanced_);
}

void DuffingPlant::reset() {
  y_ = 0.0;
  yd_ = 0.0;
  samples_advanced_ = 0;
}

std::unique_ptr<Plant> DuffingPlant::clone() const {
  return std::make_unique<DuffingPlant>(*this);
}

LinearModes DuffingPlant::linear_modes() const {
  Eigen::Matrix2d a;
  a << 0.0, 1.0, -params_.k_l / params_.m, -params_.c_l / params_.m;
  const Eigen::EigenSolver<Eigen::Matrix2d> es(a);
  const std::complex<double> lambda = es.eigenvalues()(0);
  LinearModes m;
  const double mag = std::abs(lambda);
  m.f_n_hz = mag / (2.0 * std::numbers::pi);
  m.zeta = mag > 0.0 ? -lambda.real() / mag : 0.0;
  return m;
}

SurrogatePlant::SurrogatePlant(PolyNlssModel model, double feedback_gain)
    : model_(std::move(model)), k_fb_(feedback_gain) {
  validate(model_);
  x_ = Eigen::VectorXd::Zero(model_.order());
}

double SurrogatePlant::output() const { return model_.C.dot(x_); }

void SurrogatePlant::advance(double u, double dt) {
  const double steps_real = dt / model_.ts;
  const long steps = std::lround(steps_real);
  if (steps < 1 || std::abs(steps_real - static_cast<double>(steps)) > 1e-6)
    throw ValidationError("surrogate: dt is not a whole number of native samples");
  for (long i = 0; i < steps; ++i) {
    const double y_now = model_.C.dot(x_);
    const double u_plant = u - k_fb_ * y_prev_ * y_prev_ * y_prev_;
    x_ = model_.A * x_ + model_.B * u_plant + model_.E * eval_monomials(model_, y_now);
    y_prev_ = y_now;
    ++samples_advanced_;
    if (!x_.allFinite())
      throw DivergenceError("surrogate: state diverged", samples_advanced_);
  }
}

void SurrogatePlant::reset() {
  x_.setZero();
  y_prev_ = 0.0;
  samples_advanced_ = 0;
}

std::unique_ptr<Plant> SurrogatePlant::clone() const {
  return std::make_unique<SurrogatePlant>(*this);
}

double noise_sigma_for(const std::vector<double>& y_true, double snr_db) {
  return rms(y_true) * std::pow(10.0, -snr_db / 20.0);
}

std::vector<double> measure(const std::vector<double>& y_true, const NoiseConfig& noise) {
  std::vector<double> y = y_true;
  if (!noise.enabled()) return y;
  const double sigma =
      noise.sigma ? *noise.sigma : noise_sigma_for(y_true, *noise.snr_db);
  rng::Stream stream(rng::derive_seed(noise.seed, "measurement-noise"));
  for (double& v : y) v += sigma * stream.gaussian();
  return y;
}

OpenLoopRecord run_open_loop(Plant& plant, const std::vector<double>& u_seq, double fs,
                             const NoiseConfig& noise) {
  if (fs <= 0.0) throw ValidationError("open loop: fs must be positive");
  if (u_seq.empty()) throw ValidationError("open loop: empty input");
  const double dt = 1.0 / fs;

  OpenLoopRecord rec;
  rec.fs = fs;
  rec.t.reserve(u_seq.size());
  rec.u = u_seq;
  rec.y_true.reserve(u_seq.size());

  for (std::size_t k = 0; k < u_seq.size(); ++k) {
    rec.t.push_back(static_cast<double>(k) * dt);
    rec.y_true.push_back(plant.output());
    plant.advance(u_seq[k], dt);
  }
  rec.y_meas = measure(rec.y_true, noise);
  return rec;
}

}  // namespace fblin
