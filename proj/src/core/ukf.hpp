#pragma once

#include "core/model.hpp"

namespace fblin {

struct UkfConfig {
  Eigen::MatrixXd q_cov;  // n x n process-noise covariance, additive
  double r_cov = 0.0;     // scalar measurement-noise variance
  double alpha = 1e-3;    // sigma-point spread
  double beta = 2.0;      // prior-distribution weighting (2 = Gaussian)
  double kappa = 0.0;
};

class Ukf {
 public:
  Ukf(const PolyNlssModel& model, UkfConfig config);

  // Time update: propagates the scaled sigma points through the model
  // dynamics with the applied input, then adds the process noise.
  void predict(double u_applied);

  // Measurement update. The output map is linear, so this is the exact
  // Kalman correction; no second sigma-point pass is needed.
  void update(double y_meas);

  double filtered_output() const;

  const Eigen::VectorXd& state() const { return x_hat_; }
  const Eigen::MatrixXd& covariance() const { return p_; }
  long repairs() const { return repairs_; }
  void reset();

 private:
  Eigen::MatrixXd sigma_points();
  void repair_covariance();

  PolyNlssModel model_;
  UkfConfig config_;
  Eigen::VectorXd x_hat_;
  Eigen::MatrixXd p_;
  double lambda_ = 0.0;
  Eigen::VectorXd weights_mean_;
  Eigen::VectorXd weights_cov_;
  long steps_ = 0;
  long repairs_ = 0;
};

}  // namespace fblin
