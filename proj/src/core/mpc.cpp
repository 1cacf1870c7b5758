#include "core/mpc.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>

#include "core/errors.hpp"

namespace fblin {

ReferenceBuffer::ReferenceBuffer(const PolyNlssModel& model, std::size_t horizon_max)
    : a_(model.A), b_(model.B), c_(model.C), horizon_max_(horizon_max) {
  if (horizon_max_ == 0) throw ValidationError("reference buffer: horizon must be >= 1");
  x_ref_ = Eigen::VectorXd::Zero(model.order());
}

void ReferenceBuffer::generate(double v_outer) {
  y_ref_.clear();
  y_ref_.reserve(horizon_max_);
  for (std::size_t j = 0; j < horizon_max_; ++j) {
    x_ref_ = a_ * x_ref_ + b_ * v_outer;
    y_ref_.push_back(c_.dot(x_ref_));
  }
  cursor_ = 0;
}

double ReferenceBuffer::ref(std::size_t j) const {
  if (cursor_ + j >= y_ref_.size())
    throw ValidationError("reference buffer: reference index out of range");
  return y_ref_[cursor_ + j];
}

void ReferenceBuffer::advance() {
  if (remaining() == 0) throw ValidationError("reference buffer: nothing to consume");
  ++cursor_;
}

void ReferenceBuffer::reset() {
  x_ref_.setZero();
  y_ref_.clear();
  cursor_ = 0;
}

PredictionMatrices build_prediction(const AugmentedModel& aug, std::size_t n_p, std::size_t s) {
  if (n_p == 0) throw ValidationError("prediction: horizon must be >= 1");
  const Eigen::Index na = aug.A.rows();

  // Powers of the augmented A up to n_p; power[j] = A^j.
  std::vector<Eigen::MatrixXd> power(n_p + 1);
  power[0] = Eigen::MatrixXd::Identity(na, na);
  for (std::size_t j = 1; j <= n_p; ++j) power[j] = power[j - 1] * aug.A;

  PredictionMatrices p;
  p.s_x.resize(static_cast<Eigen::Index>(n_p), na);
  p.s_u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_p), static_cast<Eigen::Index>(n_p));
  p.s_g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_p),
                                static_cast<Eigen::Index>(s * n_p));

  // Row i predicts output i+1 steps ahead:
  //   y(i+1) = C A^{i+1} xbar + sum_j C A^{i-j} B du(j) + sum_j C A^{i-j} E dg(j).
  for (std::size_t i = 0; i < n_p; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    p.s_x.row(row) = aug.C * power[i + 1];
    for (std::size_t j = 0; j <= i; ++j) {
      const Eigen::RowVectorXd ca = aug.C * power[i - j];
      p.s_u(row, static_cast<Eigen::Index>(j)) = ca.dot(aug.B);
      p.s_g.block(row, static_cast<Eigen::Index>(j * s), 1, static_cast<Eigen::Index>(s)) =
          ca * aug.E;
    }
  }
  return p;
}

MpcGainSet precompute_gains(const PolyNlssModel& model, double q_weight, double r_delta,
                            std::size_t horizon_max) {
  if (q_weight <= 0.0 || r_delta <= 0.0)
    throw ValidationError("mpc gains: weights must be positive");
  if (horizon_max == 0) throw ValidationError("mpc gains: horizon must be >= 1");
  validate(model);

  MpcGainSet set;
  set.model = model;
  set.aug = augment(model);
  set.q_weight = q_weight;
  set.r_delta = r_delta;
  set.horizon_max = horizon_max;

  const std::size_t s = model.num_terms();
  const PredictionMatrices full = build_prediction(set.aug, horizon_max, s);

  for (std::size_t n_p = 1; n_p <= horizon_max; ++n_p) {
    const auto rows = static_cast<Eigen::Index>(n_p);
    HorizonGains hg;
    // Leading blocks of the full-horizon matrices.
    hg.pred.s_x = full.s_x.topRows(rows);
    hg.pred.s_u = full.s_u.topLeftCorner(rows, rows);
    hg.pred.s_g = full.s_g.topLeftCorner(rows, static_cast<Eigen::Index>(s * n_p));

    // W = 2(R_delta I + Q S_u' S_u), F = 2 Q S_u'.
    const Eigen::MatrixXd w =
        2.0 * (r_delta * Eigen::MatrixXd::Identity(rows, rows) +
               q_weight * hg.pred.s_u.transpose() * hg.pred.s_u);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12)
      throw ValidationError("mpc gains: ill-conditioned cost Hessian at horizon " +
                            std::to_string(n_p));
    const Eigen::MatrixXd f = 2.0 * q_weight * hg.pred.s_u.transpose();
    // Only the first input increment is ever applied, so only the first
    // row of W^-1 F is kept.
    hg.gain = Eigen::RowVectorXd(w.ldlt().solve(f).row(0));
    set.horizons.push_back(std::move(hg));
  }
  return set;
}

const HorizonGains& MpcGainSet::at(std::size_t n_p) const {
  if (n_p == 0 || n_p > horizons.size())
    throw ValidationError("mpc gains: horizon " + std::to_string(n_p) + " out of range");
  return horizons[n_p - 1];
}

Eigen::VectorXd assemble_state(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& x_hat_prev,
                               double y_filtered) {
  if (x_hat.size() != x_hat_prev.size())
    throw ValidationError("assemble_state: estimate size mismatch");
  Eigen::VectorXd xbar(x_hat.size() + 1);
  xbar.head(x_hat.size()) = x_hat - x_hat_prev;
  xbar(x_hat.size()) = y_filtered;
  return xbar;
}

Eigen::VectorXd estimate_disturbance(const PolyNlssModel& model, const ControllerState& ctrl,
                                     const ReferenceBuffer& buffer, double y_now,
                                     std::size_t n_p) {
  if (n_p == 0) throw ValidationError("disturbance estimate: horizon must be >= 1");
  if (n_p > 1 && buffer.remaining() < n_p - 1)
    throw ValidationError("disturbance estimate: not enough references");

  const auto s = static_cast<Eigen::Index>(model.num_terms());
  Eigen::VectorXd dg(static_cast<Eigen::Index>(n_p) * s);

  Eigen::VectorXd prev = eval_monomials(model, ctrl.y_prev);
  Eigen::VectorXd cur = eval_monomials(model, y_now);
  dg.segment(0, s) = cur - prev;
  for (std::size_t j = 1; j < n_p; ++j) {
    prev = std::move(cur);
    cur = eval_monomials(model, buffer.ref(j - 1));
    dg.segment(static_cast<Eigen::Index>(j) * s, s) = cur - prev;
  }
  return dg;
}

double control_step(const MpcGainSet& gains, ControllerState& ctrl,
                    const Eigen::VectorXd& xbar_now, ReferenceBuffer& buffer, double y_now) {
  const std::size_t n_p = buffer.remaining();
  if (n_p == 0) throw ValidationError("control step: no references left in buffer");
  if (n_p > gains.horizon_max)
    throw ValidationError("control step: buffer horizon exceeds precomputed gains");
  if (xbar_now.size() != gains.aug.A.rows())
    throw ValidationError("control step: augmented state size mismatch");

  const HorizonGains& hg = gains.at(n_p);
  const Eigen::VectorXd dg = estimate_disturbance(gains.model, ctrl, buffer, y_now, n_p);

  Eigen::VectorXd y_ref(static_cast<Eigen::Index>(n_p));
  for (std::size_t j = 0; j < n_p; ++j) y_ref(static_cast<Eigen::Index>(j)) = buffer.ref(j);

  const Eigen::VectorXd residual = hg.pred.s_x * xbar_now + hg.pred.s_g * dg - y_ref;
  const double du0 = -hg.gain.dot(residual);
  const double u = ctrl.u_prev + du0;

  ctrl.u_prev = u;
  ctrl.y_prev = y_now;
  buffer.advance();
  return u;
}

namespace {

void append_matrix(std::string& out, const char* label, const Eigen::MatrixXd& m) {
  char buf[64];
  out += label;
  out += " (";
  std::snprintf(buf, sizeof(buf), "%td x %td", static_cast<std::ptrdiff_t>(m.rows()),
                static_cast<std::ptrdiff_t>(m.cols()));
  out += buf;
  out += ")\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%c%.17g", c == 0 ? ' ' : '\t', m(r, c));
      out += buf;
    }
    out += '\n';
  }
}

}  // namespace

std::string gains_to_text(const MpcGainSet& gains) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "mpc gains: q=%.17g r_delta=%.17g horizon_max=%zu ts=%.17g\n",
                gains.q_weight, gains.r_delta, gains.horizon_max, gains.model.ts);
  out += buf;
  for (std::size_t n_p = 1; n_p <= gains.horizon_max; ++n_p) {
    const HorizonGains& hg = gains.at(n_p);
    std::snprintf(buf, sizeof(buf), "\nhorizon %zu\n", n_p);
    out += buf;
    append_matrix(out, "S_x", hg.pred.s_x);
    append_matrix(out, "S_u", hg.pred.s_u);
    append_matrix(out, "S_g", hg.pred.s_g);
    append_matrix(out, "gain", hg.gain);
  }
  return out;
}

}  // namespace fblin
