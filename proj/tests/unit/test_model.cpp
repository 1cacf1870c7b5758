#include "core/model.hpp"

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "core/errors.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace fblin;

namespace {

PolyNlssModel tiny_model() {
  PolyNlssModel m;
  m.A = Eigen::MatrixXd::Constant(1, 1, 0.5);
  m.B = Eigen::VectorXd::Constant(1, 1.0);
  m.C = Eigen::RowVectorXd::Constant(1, 2.0);
  m.E = Eigen::MatrixXd::Constant(1, 1, 0.25);
  m.exponents = {2};
  m.ts = 1e-3;
  m.name = "tiny";
  return m;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("validate accepts a well-formed model") {
  CHECK_NOTHROW(validate(tiny_model()));
  CHECK_NOTHROW(validate(oracle::random_model(7, 3, 2)));
}

TEST_CASE("validate rejects every dimension or ordering violation") {
  auto m = tiny_model();
  m.A.resize(1, 2);
  m.A << 0.5, 0.0;
  CHECK_THROWS_AS(validate(m), ValidationError);

  m = tiny_model();
  m.B.resize(2);
  CHECK_THROWS_AS(validate(m), ValidationError);

  m = tiny_model();
  m.C.resize(2);
  CHECK_THROWS_AS(validate(m), ValidationError);

  m = tiny_model();
  m.E.resize(2, 1);
  CHECK_THROWS_AS(validate(m), ValidationError);

  m = tiny_model();
  m.exponents = {2, 3};  // E has one column
  CHECK_THROWS_AS(validate(m), ValidationError);

  m = tiny_model();
  m.exponents = {0};
  CHECK_THROWS_AS(validate(m), ValidationError);

  m = tiny_model();
  m.E.resize(1, 2);
  m.E << 0.1, 0.2;
  m.exponents = {3, 2};
  CHECK_THROWS_AS(validate(m), ValidationError);

  m = tiny_model();
  m.ts = 0.0;
  CHECK_THROWS_AS(validate(m), ValidationError);

  m = tiny_model();
  m.A(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate(m), ValidationError);
}

TEST_CASE("eval_monomials stacks the requested output powers") {
  auto m = tiny_model();
  m.E.resize(1, 3);
  m.E << 1.0, 1.0, 1.0;
  m.exponents = {1, 2, 4};
  const Eigen::VectorXd z = eval_monomials(m, -2.0);
  REQUIRE(z.size() == 3);
  CHECK(z(0) == -2.0);
  CHECK(z(1) == 4.0);
  CHECK(z(2) == 16.0);
}

TEST_CASE("step reads the output before updating the state") {
  const auto m = tiny_model();
  Eigen::VectorXd x(1);
  x << 3.0;
  const StepResult r = step(m, x, 0.5);
  CHECK(r.y == doctest::Approx(6.0));  // C x, pre-update
  // x+ = 0.5*3 + 1*0.5 + 0.25*(6)^2
  CHECK(r.x_next(0) == doctest::Approx(0.5 * 3.0 + 0.5 + 0.25 * 36.0));
}

TEST_CASE("simulate matches a hand-rolled recursion and logs states") {
  const auto m = oracle::random_model(11, 3, 2);
  std::vector<double> u(40);
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = std::sin(0.3 * static_cast<double>(k));

  const SimResult sim = simulate(m, Eigen::VectorXd::Zero(3), u);
  REQUIRE(sim.y.size() == u.size());
  REQUIRE(sim.states.rows() == static_cast<Eigen::Index>(u.size()));

  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  for (std::size_t k = 0; k < u.size(); ++k) {
    CHECK(sim.states.row(static_cast<Eigen::Index>(k)).transpose().isApprox(x, 1e-14));
    const double y = m.C.dot(x);
    CHECK(sim.y[k] == doctest::Approx(y).epsilon(1e-12));
    x = m.A * x + m.B * u[k] + m.E * eval_monomials(m, y);
  }
}

TEST_CASE("simulate reports the sample where the trajectory explodes") {
  auto m = tiny_model();
  m.E(0, 0) = 5.0;  // strong positive feedback on y^2
  std::vector<double> u(200, 1.0);
  CHECK_THROWS_AS(simulate(m, Eigen::VectorXd::Zero(1), u), DivergenceError);
  try {
    simulate(m, Eigen::VectorXd::Zero(1), u);
  } catch (const DivergenceError& e) {
    CHECK(e.sample() > 0);
    CHECK(e.sample() < 50);
  }
  CHECK_THROWS_AS(simulate(m, Eigen::VectorXd::Zero(1), {}), ValidationError);
  CHECK_THROWS_AS(simulate(m, Eigen::VectorXd::Zero(2), u), ValidationError);
}

TEST_CASE("augment builds the velocity-form block structure") {
  const auto m = oracle::random_model(3, 4, 2);
  const AugmentedModel aug = augment(m);
  const int n = m.order();
  REQUIRE(aug.A.rows() == n + 1);
  CHECK(aug.A.topLeftCorner(n, n).isApprox(m.A));
  CHECK(aug.A.topRightCorner(n, 1).isZero(0.0));
  CHECK(aug.A.bottomLeftCorner(1, n).isApprox(m.C * m.A));
  CHECK(aug.A(n, n) == 1.0);
  CHECK(aug.B.head(n).isApprox(m.B));
  CHECK(aug.B(n) == doctest::Approx(m.C.dot(m.B)));
  CHECK(aug.E.topRows(n).isApprox(m.E));
  CHECK(aug.E.bottomRows(1).isApprox(m.C * m.E));
  CHECK(aug.C.head(n).isZero(0.0));
  CHECK(aug.C(n) == 1.0);
}

TEST_CASE("zero_quadratic clears exactly the exponent-2 column") {
  auto m = tiny_model();
  m.E.resize(1, 2);
  m.E << 0.3, 0.7;
  m.exponents = {2, 3};

  const PolyNlssModel z = zero_quadratic(m);
  CHECK(z.E(0, 0) == 0.0);
  CHECK(z.E(0, 1) == 0.7);
  CHECK(z.A.isApprox(m.A));

  const PolyNlssModel zz = zero_quadratic(z);
  CHECK(zz.E.isApprox(z.E));  // idempotent

  auto cubic = tiny_model();
  cubic.exponents = {3};
  CHECK_THROWS_AS(zero_quadratic(cubic), ValidationError);
}

TEST_CASE("coarsen_model lifts the linear part exactly") {
  const auto m = oracle::random_model(23, 4, 2);
  const int k = 5;
  const PolyNlssModel c = coarsen_model(m, k);

  Eigen::MatrixXd a_lift;
  Eigen::VectorXd b_lift;
  oracle::lift(m.A, m.B, k, a_lift, b_lift);
  CHECK(c.A.isApprox(a_lift, 1e-13));
  CHECK(c.B.isApprox(b_lift, 1e-13));
  CHECK(c.C.isApprox(m.C));
  CHECK(c.ts == doctest::Approx(m.ts * k));
  for (int p = 0; p < m.num_terms(); ++p) {
    Eigen::VectorXd e_lift;
    oracle::lift(m.A, m.E.col(p), k, a_lift, e_lift);
    CHECK(c.E.col(p).isApprox(e_lift, 1e-13));
  }
  CHECK_THROWS_AS(coarsen_model(m, 0), ValidationError);
}

TEST_CASE("coarsened linear model reproduces held-input responses") {
  auto m = oracle::random_model(29, 3, 1);
  m.E.setZero();
  const int k = 4;
  const PolyNlssModel c = coarsen_model(m, k);

  std::vector<double> u_coarse(30);
  for (std::size_t i = 0; i < u_coarse.size(); ++i)
    u_coarse[i] = std::cos(0.2 * static_cast<double>(i));
  std::vector<double> u_fine;
  for (double v : u_coarse) u_fine.insert(u_fine.end(), k, v);

  const SimResult fine = simulate(m, Eigen::VectorXd::Zero(3), u_fine);
  const SimResult coarse = simulate(c, Eigen::VectorXd::Zero(3), u_coarse);
  for (std::size_t i = 0; i < u_coarse.size(); ++i)
    CHECK(coarse.y[i] == doctest::Approx(fine.y[i * k]).epsilon(1e-12));
}

TEST_CASE("refine_model inverts coarsening") {
  const PolyNlssModel native = load_model("models/beam_nlss.json");
  const PolyNlssModel fine = refine_model(native, 4);
  CHECK(fine.ts == doctest::Approx(native.ts / 4.0));

  const PolyNlssModel back = coarsen_model(fine, 4);
  CHECK(back.A.isApprox(native.A, 1e-10));
  CHECK(back.B.isApprox(native.B, 1e-10));
  CHECK(back.E.isApprox(native.E, 1e-10));
  CHECK(back.ts == doctest::Approx(native.ts));

  CHECK_THROWS_AS(refine_model(native, 0), ValidationError);

  auto flip = tiny_model();
  flip.A(0, 0) = -0.5;  // no real square root
  CHECK_THROWS_AS(refine_model(flip, 2), ValidationError);
}

TEST_CASE("model documents round-trip bit-exactly") {
  auto m = oracle::random_model(3, 2, 3);
  m.name = "roundtrip";
  m.A(0, 0) = 0.1;          // not representable exactly; stresses formatting
  m.E(1, 2) = -3.25e-300;

  const nlohmann::json doc = model_to_json(m);
  const PolyNlssModel r = model_from_json(doc);
  CHECK(r.A == m.A);
  CHECK(r.B == m.B);
  CHECK(r.C == m.C);
  CHECK(r.E == m.E);
  CHECK(r.ts == m.ts);
  CHECK(r.exponents == m.exponents);
  CHECK(r.name == m.name);

  const auto path = temp_file("fblin_model_roundtrip.json");
  save_model(m, path);
  const PolyNlssModel s = load_model(path);
  CHECK(s.A == m.A);
  CHECK(s.E == m.E);
  std::filesystem::remove(path);
}

TEST_CASE("model loading canonicalises monomial order and rejects bad documents") {
  nlohmann::json doc = model_to_json(tiny_model());
  doc["exponents"] = {3, 2};
  doc["E"] = {0.7, 0.3};  // columns follow the stated exponent order
  const PolyNlssModel m = model_from_json(doc);
  REQUIRE(m.exponents == std::vector<int>{2, 3});
  CHECK(m.E(0, 0) == 0.3);
  CHECK(m.E(0, 1) == 0.7);

  CHECK_THROWS_AS(load_model("models/no_such_model.json"), IoError);

  nlohmann::json bad = model_to_json(tiny_model());
  bad["schema"] = "something-else";
  CHECK_THROWS_AS(model_from_json(bad), ValidationError);

  nlohmann::json missing = model_to_json(tiny_model());
  missing.erase("A");
  CHECK_THROWS_AS(model_from_json(missing), ValidationError);

  CHECK_THROWS_AS(model_from_json(nlohmann::json::array()), ValidationError);
}

TEST_CASE("identified-model simulation matches the frozen fixture") {
  const PolyNlssModel m = load_model("models/duffing_nlss.json");

  std::ifstream in("tests/data/duffing_sim.csv");
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "k,u,y");
  std::vector<double> u, y_expect;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string field;
    std::getline(row, field, ',');
    std::getline(row, field, ',');
    u.push_back(std::stod(field));
    std::getline(row, field, ',');
    y_expect.push_back(std::stod(field));
  }
  REQUIRE(u.size() == 512);

  const SimResult sim = simulate(m, Eigen::VectorXd::Zero(m.order()), u);
  double worst = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k)
    worst = std::max(worst, std::abs(sim.y[k] - y_expect[k]));
  CHECK(worst < 1e-12);
}
