#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fblin {

// Discrete-time SISO polynomial nonlinear state-space model:
//
//   x(k+1) = A x(k) + B u(k) + E z(y(k))
//   y(k)   = C x(k)
//
// where z(y) stacks the output monomials y^p for the stored exponents.
// Strictly proper: the output is read before the state update.
struct PolyNlssModel {
  Eigen::MatrixXd A;           // n x n
  Eigen::VectorXd B;           // n
  Eigen::RowVectorXd C;        // 1 x n
  Eigen::MatrixXd E;           // n x s
  std::vector<int> exponents;  // s entries, positive, strictly increasing
  double ts = 0.0;             // sample time [s]
  std::string name;

  int order() const { return static_cast<int>(A.rows()); }
  int num_terms() const { return static_cast<int>(E.cols()); }
};

// Velocity-form augmentation: state [dx; y] with input du and
// disturbance dz.  Confers integral action on the controller.
struct AugmentedModel {
  Eigen::MatrixXd A;     // (n+1) x (n+1) = [[A, 0], [C A, 1]]
  Eigen::VectorXd B;     // (n+1)         = [B; C B]
  Eigen::MatrixXd E;     // (n+1) x s     = [E; C E]
  Eigen::RowVectorXd C;  // 1 x (n+1)     = [0 ... 0 1]
};

struct StepResult {
  Eigen::VectorXd x_next;
  double y = 0.0;
};

struct SimResult {
  std::vector<double> y;   // y(k), k = 0..N-1
  Eigen::MatrixXd states;  // N x n, row k = x(k)
};

// Throws ValidationError on any dimension or ordering violation.
void validate(const PolyNlssModel& model);

// z(y): component p equals y^exponents[p].
Eigen::VectorXd eval_monomials(const PolyNlssModel& model, double y);

// One recursion of the model.  y is the pre-update output.
StepResult step(const PolyNlssModel& model, const Eigen::VectorXd& x, double u);

// Iterates `step` over the input sequence.  Throws DivergenceError with
// the offending sample index when the trajectory explodes (non-finite
// value, or |y| exceeding 1e6 times the running RMS of the past output).
SimResult simulate(const PolyNlssModel& model, const Eigen::VectorXd& x0,
                   const std::vector<double>& u_seq);

AugmentedModel augment(const PolyNlssModel& model);

// Copy with the quadratic column of E zeroed; idempotent.  Throws
// ValidationError if the model has no exponent-2 monomial.
PolyNlssModel zero_quadratic(const PolyNlssModel& model);

// Rate conversion under a zero-order-held input.  Coarsening by an integer
// factor is exact for the linear part (A^m, hold-summed B and E); refining
// inverts that map through the real m-th root of A and fails when A has no
// real root (negative real eigenvalues).  factor == 1 returns a copy.
PolyNlssModel coarsen_model(const PolyNlssModel& model, int factor);
PolyNlssModel refine_model(const PolyNlssModel& model, int factor);

// Model document I/O (schema "pnlss-v1", JSON).  Loading canonicalises
// the monomial ordering; saving preserves doubles bit-exactly.
PolyNlssModel model_from_json(const nlohmann::json& doc);
nlohmann::json model_to_json(const PolyNlssModel& model);
PolyNlssModel load_model(const std::filesystem::path& path);
void save_model(const PolyNlssModel& model, const std::filesystem::path& path);

}  // namespace fblin
