#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "core/model.hpp"

namespace fblin {

// Internal reference generator. generate() rolls the model's linear part
// (A, B, C only; the nonlinear term is treated as a disturbance and plays
// no role here) forward horizon_max steps under a constant outer input,
// keeping x_ref across outer samples. The cursor tracks how many of the
// current references have been consumed by inner control steps.
class ReferenceBuffer {
 public:
  ReferenceBuffer(const PolyNlssModel& model, std::size_t horizon_max);

  void generate(double v_outer);
  std::size_t remaining() const { return y_ref_.size() - cursor_; }
  std::size_t horizon_max() const { return horizon_max_; }
  // j-th still-unconsumed reference; j = 0 is the next output reference.
  double ref(std::size_t j) const;
  void advance();
  void reset();
  const Eigen::VectorXd& x_ref() const { return x_ref_; }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  Eigen::RowVectorXd c_;
  std::size_t horizon_max_;
  Eigen::VectorXd x_ref_;
  std::vector<double> y_ref_;
  std::size_t cursor_ = 0;
};

// Prediction matrices mapping (current augmented state, future input
// increments, future disturbance increments) to predicted outputs:
//   Y = S_x xbar + S_u dU + S_g dG.
struct PredictionMatrices {
  Eigen::MatrixXd s_x;  // N_p x (n+1)
  Eigen::MatrixXd s_u;  // N_p x N_p, lower-triangular Toeplitz
  Eigen::MatrixXd s_g;  // N_p x s*N_p, block lower-triangular
};

PredictionMatrices build_prediction(const AugmentedModel& aug, std::size_t n_p, std::size_t s);

struct HorizonGains {
  PredictionMatrices pred;
  Eigen::RowVectorXd gain;  // first row of W^-1 F; applies only du(0)
};

// Offline-precomputed gains for every horizon 1..horizon_max. Sub-horizon
// matrices are the leading blocks of the horizon_max ones.
struct MpcGainSet {
  PolyNlssModel model;
  AugmentedModel aug;
  double q_weight = 0.0;
  double r_delta = 0.0;
  std::size_t horizon_max = 0;
  std::vector<HorizonGains> horizons;  // index 0 holds N_p = 1

  const HorizonGains& at(std::size_t n_p) const;
};

MpcGainSet precompute_gains(const PolyNlssModel& model, double q_weight, double r_delta,
                            std::size_t horizon_max);

struct ControllerState {
  double u_prev = 0.0;
  double y_prev = 0.0;          // previous filtered output
  Eigen::VectorXd x_hat_prev;   // previous state estimate, for the Delta-x slot

  void reset(Eigen::Index n) {
    u_prev = 0.0;
    y_prev = 0.0;
    x_hat_prev = Eigen::VectorXd::Zero(n);
  }
};

// xbar = [x_hat - x_hat_prev; y_filtered], the velocity-form state.
Eigen::VectorXd assemble_state(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& x_hat_prev,
                               double y_filtered);

// Disturbance-increment estimate over the horizon: the first block is the
// measured monomial change, later blocks substitute references for future
// outputs. Needs n_p - 1 references from the buffer.
Eigen::VectorXd estimate_disturbance(const PolyNlssModel& model, const ControllerState& ctrl,
                                     const ReferenceBuffer& buffer, double y_now,
                                     std::size_t n_p);

// One inner-rate control move. Horizon = buffer.remaining(). Applies the
// first input increment only, updates ctrl (u_prev, y_prev) and consumes
// one reference. The caller updates ctrl.x_hat_prev.
double control_step(const MpcGainSet& gains, ControllerState& ctrl,
                    const Eigen::VectorXd& xbar_now, ReferenceBuffer& buffer, double y_now);

// Human-readable dump of all per-horizon matrices and gain rows.
std::string gains_to_text(const MpcGainSet& gains);

}  // namespace fblin
