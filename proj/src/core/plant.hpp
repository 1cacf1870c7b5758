#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "core/model.hpp"

namespace fblin {

// Continuous- or discrete-time truth plant driven with a zero-order-held
// scalar input. advance() moves the plant forward by dt with u held.
class Plant {
 public:
  virtual ~Plant() = default;
  virtual double output() const = 0;
  virtual void advance(double u, double dt) = 0;
  virtual void reset() = 0;
  virtual std::unique_ptr<Plant> clone() const = 0;
};

struct DuffingParams {
  double m = 1.0;      // kg
  double c_l = 1.0;    // Ns/m
  double k_l = 5.0e2;  // N/m
  double k_q = 5.0e4;  // N/m^2
  double k_c = 1.0e8;  // N/m^3
};

struct LinearModes {
  double f_n_hz = 0.0;
  double zeta = 0.0;
};

// Single-mass oscillator with quadratic and cubic stiffness, integrated
// with classical RK4 at a fixed substep.
class DuffingPlant final : public Plant {
 public:
  DuffingPlant(const DuffingParams& params, double substep_s);

  double output() const override { return y_; }
  void advance(double u, double dt) override;
  void reset() override;
  std::unique_ptr<Plant> clone() const override;

  const DuffingParams& params() const { return params_; }
  double substep() const { return substep_; }
  double velocity() const { return yd_; }

  // Modes of the plant linearised about the origin (k_q, k_c ignored),
  // from the eigenvalues of the 2x2 continuous-time state matrix.
  LinearModes linear_modes() const;

 private:
  DuffingParams params_;
  double substep_;
  double y_ = 0.0;
  double yd_ = 0.0;
  long samples_advanced_ = 0;
};

// Discrete-time polynomial state-space model run at its native rate with an
// artificial cubic output feedback applied one native sample late:
//   u_plant(k) = u_cmd(k) - k_fb * y(k-1)^3.
// advance() accepts only whole multiples of the native sample time.
class SurrogatePlant final : public Plant {
 public:
  SurrogatePlant(PolyNlssModel model, double feedback_gain);

  double output() const override;
  void advance(double u, double dt) override;
  void reset() override;
  std::unique_ptr<Plant> clone() const override;

  const PolyNlssModel& model() const { return model_; }
  double feedback_gain() const { return k_fb_; }

 private:
  PolyNlssModel model_;
  double k_fb_;
  Eigen::VectorXd x_;
  double y_prev_ = 0.0;
  long samples_advanced_ = 0;
};

struct NoiseConfig {
  std::optional<double> snr_db;  // relative level; sigma from the clean RMS
  std::optional<double> sigma;   // absolute level; takes precedence over snr_db
  std::uint64_t seed = 0;

  bool enabled() const { return snr_db.has_value() || sigma.has_value(); }
};

// Additive white Gaussian noise; noise-free when neither level is set.
std::vector<double> measure(const std::vector<double>& y_true, const NoiseConfig& noise);

// Noise standard deviation that realises snr_db against the given clean record.
double noise_sigma_for(const std::vector<double>& y_true, double snr_db);

struct OpenLoopRecord {
  double fs = 0.0;
  std::vector<double> t;
  std::vector<double> u;
  std::vector<double> y_meas;
  std::vector<double> y_true;
};

// Drives the plant with u_seq held at 1/fs per sample; y_true[k] is the
// plant output at the instant u[k] is applied.
OpenLoopRecord run_open_loop(Plant& plant, const std::vector<double>& u_seq, double fs,
                             const NoiseConfig& noise);

}  // namespace fblin
