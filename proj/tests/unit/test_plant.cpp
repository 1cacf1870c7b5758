#include "core/plant.hpp"

#include <cmath>

#include "core/errors.hpp"
#include "core/spectra.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace fblin;

TEST_CASE("constant force settles onto the static stiffness curve") {
  DuffingPlant plant(DuffingParams{}, 1e-4);
  const double u = 1.0;
  for (int k = 0; k < 3000; ++k) plant.advance(u, 1e-2);  // 30 s, well past settling

  const double y_star = oracle::duffing_static_deflection(5.0e2, 5.0e4, 1.0e8, u);
  CHECK(std::abs(plant.output() - y_star) < 5e-9);
  CHECK(std::abs(plant.velocity()) < 1e-6);
}

TEST_CASE("linearised oscillator modes") {
  DuffingPlant plant(DuffingParams{}, 1e-4);
  const LinearModes m = plant.linear_modes();
  // sqrt(k_l/m)/2pi and c_l/(2 sqrt(k_l m)) for the default parameters.
  CHECK(m.f_n_hz == doctest::Approx(std::sqrt(5.0e2) / (2.0 * M_PI)).epsilon(1e-12));
  CHECK(m.zeta == doctest::Approx(1.0 / (2.0 * std::sqrt(5.0e2))).epsilon(1e-12));
}

TEST_CASE("integrator covers dt regardless of substep alignment") {
  // 1.5 substeps per sample: the step is subdivided evenly, so two half
  // advances land very close to one full advance.
  DuffingPlant a(DuffingParams{}, 1e-3);
  DuffingPlant b(DuffingParams{}, 1e-3);
  for (int k = 0; k < 100; ++k) {
    a.advance(0.5, 3e-3);
    b.advance(0.5, 1.5e-3);
    b.advance(0.5, 1.5e-3);
  }
  CHECK(std::abs(a.output() - b.output()) < 1e-9);
  CHECK_THROWS_AS(a.advance(0.0, 0.0), ValidationError);
}

TEST_CASE("duffing plant clone and reset are independent") {
  DuffingPlant plant(DuffingParams{}, 1e-4);
  plant.advance(1.0, 0.1);
  auto copy = plant.clone();
  CHECK(copy->output() == plant.output());
  copy->advance(1.0, 0.1);
  CHECK(copy->output() != plant.output());
  plant.reset();
  CHECK(plant.output() == 0.0);
}

TEST_CASE("surrogate plant applies the cubic feedback one sample late") {
  const auto m = oracle::random_model(31, 3, 2);
  const double k_fb = 0.8;
  SurrogatePlant plant(m, k_fb);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  double y_prev = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double u = std::sin(0.17 * static_cast<double>(k));
    CHECK(plant.output() == doctest::Approx(m.C.dot(x)).epsilon(1e-12));
    plant.advance(u, m.ts);

    const double y_now = m.C.dot(x);
    const double u_eff = u - k_fb * y_prev * y_prev * y_prev;
    x = m.A * x + m.B * u_eff + m.E * eval_monomials(m, y_now);
    y_prev = y_now;
  }
  CHECK(plant.output() == doctest::Approx(m.C.dot(x)).epsilon(1e-12));
}

TEST_CASE("surrogate advance accepts only whole native samples") {
  const auto m = oracle::random_model(31, 2, 1);
  SurrogatePlant plant(m, 0.0);
  CHECK_NOTHROW(plant.advance(0.1, 3.0 * m.ts));
  CHECK_THROWS_AS(plant.advance(0.1, 1.5 * m.ts), ValidationError);
  CHECK_THROWS_AS(plant.advance(0.1, 0.0), ValidationError);

  plant.reset();
  CHECK(plant.output() == 0.0);
}

TEST_CASE("surrogate divergence carries the native sample index") {
  PolyNlssModel m;
  m.A = Eigen::MatrixXd::Constant(1, 1, 1.5);  // unstable shell
  m.B = Eigen::VectorXd::Constant(1, 1.0);
  m.C = Eigen::RowVectorXd::Constant(1, 1.0);
  m.E = Eigen::MatrixXd::Zero(1, 0);
  m.ts = 1e-3;
  SurrogatePlant plant(m, 0.0);
  long sample = 0;
  try {
    for (int k = 0; k < 10000; ++k) plant.advance(1e300, m.ts);
  } catch (const DivergenceError& e) {
    sample = e.sample();
  }
  CHECK(sample > 0);
  CHECK(sample < 100);
}

TEST_CASE("measurement noise levels") {
  std::vector<double> y(5000);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = std::sin(0.01 * static_cast<double>(k));

  NoiseConfig quiet;
  CHECK(measure(y, quiet) == y);

  // snr_db fixes sigma against the clean RMS.
  const double sigma = noise_sigma_for(y, 40.0);
  CHECK(sigma == doctest::Approx(fblin::rms(y) * 1e-2).epsilon(1e-12));

  NoiseConfig snr;
  snr.snr_db = 40.0;
  snr.seed = 7;
  const auto noisy = measure(y, snr);
  std::vector<double> err(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) err[k] = noisy[k] - y[k];
  CHECK(fblin::rms(err) == doctest::Approx(sigma).epsilon(0.05));

  // Absolute sigma takes precedence and the draw is seed-deterministic.
  NoiseConfig abs_cfg;
  abs_cfg.snr_db = 0.0;
  abs_cfg.sigma = 1e-3;
  abs_cfg.seed = 7;
  const auto a = measure(y, abs_cfg);
  const auto b = measure(y, abs_cfg);
  CHECK(a == b);
  for (std::size_t k = 0; k < y.size(); ++k) err[k] = a[k] - y[k];
  CHECK(fblin::rms(err) == doctest::Approx(1e-3).epsilon(0.05));

  abs_cfg.seed = 8;
  CHECK(measure(y, abs_cfg) != a);
}

TEST_CASE("open-loop record is the strictly proper response") {
  auto m = oracle::random_model(17, 3, 1);
  m.E.setZero();
  SurrogatePlant plant(m, 0.0);

  std::vector<double> u(64);
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = std::cos(0.2 * static_cast<double>(k));
  const double fs = 1.0 / m.ts;

  const OpenLoopRecord rec = run_open_loop(plant, u, fs, NoiseConfig{});
  REQUIRE(rec.t.size() == u.size());
  CHECK(rec.fs == fs);
  CHECK(rec.t[5] == doctest::Approx(5.0 * m.ts));
  CHECK(rec.y_meas == rec.y_true);

  const SimResult sim = simulate(m, Eigen::VectorXd::Zero(3), u);
  for (std::size_t k = 0; k < u.size(); ++k)
    CHECK(rec.y_true[k] == doctest::Approx(sim.y[k]).epsilon(1e-12));

  CHECK_THROWS_AS(run_open_loop(plant, {}, fs, NoiseConfig{}), ValidationError);
  CHECK_THROWS_AS(run_open_loop(plant, u, 0.0, NoiseConfig{}), ValidationError);
}
