#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "core/model.hpp"
#include "core/mpc.hpp"
#include "core/plant.hpp"
#include "core/ukf.hpp"

namespace fblin {

struct ClosedLoopOptions {
  double ts_out = 0.0;
  double ts_in = 0.0;
  // Absolute measurement-noise standard deviation, frozen by the caller
  // (under feedback the output RMS depends on the controller, so an SNR
  // target cannot be applied in-loop). nullopt = noise-free.
  std::optional<double> noise_sigma;
  std::uint64_t noise_seed = 0;
};

// Inner-rate log of one linearised run. y_ref[g] is the reference the
// controller aimed sample g at; err_mpc = y_filt - y_ref; err_ukf =
// y_filt - y_true (available in simulation only).
struct ClosedLoopRecord {
  double ts_in = 0.0;
  std::size_t horizon_max = 0;
  std::vector<double> t;
  std::vector<double> v;       // outer input, zero-order-held to the inner rate
  std::vector<double> u;       // applied plant input
  std::vector<double> y_meas;
  std::vector<double> y_true;
  std::vector<double> y_ref;
  std::vector<double> y_filt;
  std::vector<double> err_mpc;
  std::vector<double> err_ukf;
  std::vector<int> horizon;    // prediction horizon used at each inner sample
  Eigen::MatrixXd x_hat;       // inner samples x model order

  // Channel values at the outer sampling instants (every horizon_max-th
  // inner sample), e.g. for spectra on the outer-rate grid.
  std::vector<double> decimate(const std::vector<double>& channel) const;
};

// Two-rate internal-reference-tracking loop: per outer sample the
// reference buffer is refilled from v, then horizon_max inner MPC/UKF
// iterations consume it with the prediction horizon shrinking to 1.
ClosedLoopRecord run_linearised(Plant& plant, const MpcGainSet& gains, Ukf& ukf,
                                const std::vector<double>& v_outer,
                                const ClosedLoopOptions& opts);

}  // namespace fblin
