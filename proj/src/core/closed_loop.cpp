#include "core/closed_loop.hpp"

#include <cmath>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace fblin {

std::vector<double> ClosedLoopRecord::decimate(const std::vector<double>& channel) const {
  if (channel.size() != t.size())
    throw ValidationError("decimate: channel length does not match the record");
  std::vector<double> out;
  out.reserve(channel.size() / horizon_max + 1);
  for (std::size_t g = 0; g < channel.size(); g += horizon_max) out.push_back(channel[g]);
  return out;
}

ClosedLoopRecord run_linearised(Plant& plant, const MpcGainSet& gains, Ukf& ukf,
                                const std::vector<double>& v_outer,
                                const ClosedLoopOptions& opts) {
  if (opts.ts_in <= 0.0 || opts.ts_out <= 0.0)
    throw ValidationError("closed loop: sample times must be positive");
  const double ratio = opts.ts_out / opts.ts_in;
  const auto n_max = static_cast<std::size_t>(std::lround(ratio));
  if (n_max < 1 || std::abs(ratio - static_cast<double>(n_max)) > 1e-9 * ratio)
    throw ValidationError("closed loop: ts_out must be an integer multiple of ts_in");
  if (n_max != gains.horizon_max)
    throw ValidationError("closed loop: gain set horizon does not match ts_out/ts_in");
  if (std::abs(gains.model.ts - opts.ts_in) > 1e-12 * opts.ts_in)
    throw ValidationError("closed loop: model sample time must equal ts_in");
  if (v_outer.empty()) throw ValidationError("closed loop: empty outer input");

  const std::size_t total = v_outer.size() * n_max;
  const Eigen::Index n = gains.model.order();

  ClosedLoopRecord rec;
  rec.ts_in = opts.ts_in;
  rec.horizon_max = n_max;
  rec.t.reserve(total);
  rec.v.reserve(total);
  rec.u.reserve(total);
  rec.y_meas.reserve(total);
  rec.y_true.reserve(total);
  rec.y_ref.reserve(total);
  rec.y_filt.reserve(total);
  rec.err_mpc.reserve(total);
  rec.err_ukf.reserve(total);
  rec.horizon.reserve(total);
  rec.x_hat.resize(static_cast<Eigen::Index>(total), n);

  ReferenceBuffer buffer(gains.model, n_max);
  ControllerState ctrl;
  ctrl.reset(n);

  rng::Stream noise(rng::derive_seed(opts.noise_seed, "measurement-noise"));
  const double sigma = opts.noise_sigma.value_or(0.0);

  double sumsq_y = 0.0;  // running divergence guard
  std::size_t g = 0;
  for (std::size_t k = 0; k < v_outer.size(); ++k) {
    buffer.generate(v_outer[k]);
    for (std::size_t i = 0; i < n_max; ++i, ++g) {
      const double y_true = plant.output();
      if (g > 0) {
        const double rms_prev = std::sqrt(sumsq_y / static_cast<double>(g));
        if (!std::isfinite(y_true) || (rms_prev > 0.0 && std::abs(y_true) > 1e6 * rms_prev))
          throw DivergenceError("closed loop: output diverged", static_cast<long>(g));
      }
      sumsq_y += y_true * y_true;
      const double y_meas = sigma > 0.0 ? y_true + sigma * noise.gaussian() : y_true;

      if (g > 0) ukf.predict(ctrl.u_prev);
      ukf.update(y_meas);
      const double y_filt = ukf.filtered_output();

      // The target the previous control step was steering this sample
      // toward; the first sample of a run has no such target.
      const double ref_for_now = g == 0 ? 0.0 : rec.y_ref[g - 1];

      const Eigen::VectorXd xbar = assemble_state(ukf.state(), ctrl.x_hat_prev, y_filt);
      rec.horizon.push_back(static_cast<int>(buffer.remaining()));
      const double next_target = buffer.ref(0);
      const double u = control_step(gains, ctrl, xbar, buffer, y_filt);
      ctrl.x_hat_prev = ukf.state();

      rec.t.push_back(static_cast<double>(g) * opts.ts_in);
      rec.v.push_back(v_outer[k]);
      rec.u.push_back(u);
      rec.y_meas.push_back(y_meas);
      rec.y_true.push_back(y_true);
      rec.y_filt.push_back(y_filt);
      rec.err_mpc.push_back(y_filt - ref_for_now);
      rec.err_ukf.push_back(y_filt - y_true);
      rec.x_hat.row(static_cast<Eigen::Index>(g)) = ukf.state().transpose();
      // Stash the upcoming target so the next iteration can pair it with
      // the output it shaped.
      rec.y_ref.push_back(next_target);

      plant.advance(u, opts.ts_in);
    }
  }

  // Shift: y_ref[g] stored above is the target for sample g+1. Realign so
  // y_ref[g] is the reference for sample g itself.
  for (std::size_t idx = rec.y_ref.size(); idx-- > 1;) rec.y_ref[idx] = rec.y_ref[idx - 1];
  rec.y_ref[0] = 0.0;
  return rec;
}

}  // namespace fblin
