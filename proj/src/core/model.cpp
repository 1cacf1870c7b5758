#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "errors.hpp"

namespace fblin {

namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace

void validate(const PolyNlssModel& model) {
  const int n = static_cast<int>(model.A.rows());
  const int s = static_cast<int>(model.E.cols());
  if (n < 1) throw ValidationError("model: state dimension must be >= 1");
  if (model.A.cols() != n) throw ValidationError("model: A must be square");
  if (model.B.size() != n)
    throw ValidationError("model: B must have length n=" + std::to_string(n) +
                          ", got " + std::to_string(model.B.size()));
  if (model.C.size() != n)
    throw ValidationError("model: C must have length n=" + std::to_string(n) +
                          ", got " + std::to_string(model.C.size()));
  if (model.E.rows() != n && s > 0)
    throw ValidationError("model: E must have n rows");
  if (static_cast<int>(model.exponents.size()) != s)
    throw ValidationError("model: exponents size must match E columns");
  for (std::size_t i = 0; i < model.exponents.size(); ++i) {
    if (model.exponents[i] < 1)
      throw ValidationError("model: exponents must be positive");
    if (i > 0 && model.exponents[i] <= model.exponents[i - 1])
      throw ValidationError("model: exponents must be strictly increasing");
  }
  if (!(model.ts > 0.0))
    throw ValidationError("model: sample time must be positive");
  if (!all_finite(model.A) || !all_finite(model.B) || !all_finite(model.C) ||
      (s > 0 && !all_finite(model.E)))
    throw ValidationError("model: non-finite entry");
}

Eigen::VectorXd eval_monomials(const PolyNlssModel& model, double y) {
  Eigen::VectorXd z(model.num_terms());
  for (int p = 0; p < model.num_terms(); ++p)
    z(p) = std::pow(y, model.exponents[p]);
  return z;
}

StepResult step(const PolyNlssModel& model, const Eigen::VectorXd& x,
                double u) {
  StepResult r;
  r.y = model.C.dot(x);
  r.x_next = model.A * x + model.B * u;
  if (model.num_terms() > 0) r.x_next += model.E * eval_monomials(model, r.y);
  if (!std::isfinite(r.y) || !r.x_next.allFinite())
    throw DivergenceError("model step produced a non-finite value", 0);
  return r;
}

SimResult simulate(const PolyNlssModel& model, const Eigen::VectorXd& x0,
                   const std::vector<double>& u_seq) {
  if (u_seq.empty()) throw ValidationError("simulate: empty input sequence");
  if (x0.size() != model.order())
    throw ValidationError("simulate: initial state has wrong dimension");

  const long n_samples = static_cast<long>(u_seq.size());
  SimResult out;
  out.y.resize(n_samples);
  out.states.resize(n_samples, model.order());

  Eigen::VectorXd x = x0;
  double sumsq = 0.0;  // running sum of y^2 over past samples
  for (long k = 0; k < n_samples; ++k) {
    out.states.row(k) = x.transpose();
    const double y = model.C.dot(x);
    if (!std::isfinite(y))
      throw DivergenceError("simulate: non-finite output", k);
    if (k > 0) {
      const double rms_prev = std::sqrt(sumsq / static_cast<double>(k));
      if (rms_prev > 0.0 && std::abs(y) > 1e6 * rms_prev)
        throw DivergenceError("simulate: output exploded past 1e6 x running RMS", k);
    }
    out.y[k] = y;
    sumsq += y * y;

    x = model.A * x + model.B * u_seq[static_cast<std::size_t>(k)];
    if (model.num_terms() > 0) x += model.E * eval_monomials(model, y);
    if (!x.allFinite())
      throw DivergenceError("simulate: non-finite state", k);
  }
  return out;
}

AugmentedModel augment(const PolyNlssModel& model) {
  const int n = model.order();
  const int s = model.num_terms();
  AugmentedModel a;
  a.A = Eigen::MatrixXd::Zero(n + 1, n + 1);
  a.A.topLeftCorner(n, n) = model.A;
  a.A.bottomLeftCorner(1, n) = model.C * model.A;
  a.A(n, n) = 1.0;
  a.B.resize(n + 1);
  a.B.head(n) = model.B;
  a.B(n) = model.C.dot(model.B);
  a.E.resize(n + 1, s);
  if (s > 0) {
    a.E.topRows(n) = model.E;
    a.E.bottomRows(1) = model.C * model.E;
  }
  a.C = Eigen::RowVectorXd::Zero(n + 1);
  a.C(n) = 1.0;
  return a;
}

PolyNlssModel zero_quadratic(const PolyNlssModel& model) {
  auto it = std::find(model.exponents.begin(), model.exponents.end(), 2);
  if (it == model.exponents.end())
    throw ValidationError("zero_quadratic: model has no quadratic monomial");
  PolyNlssModel out = model;
  out.E.col(it - model.exponents.begin()).setZero();
  return out;
}

namespace {

// I + A + ... + A^(m-1), the ZOH accumulation over m sub-steps.
Eigen::MatrixXd hold_sum(const Eigen::MatrixXd& a, int m) {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::MatrixXd sum = acc;
  for (int i = 1; i < m; ++i) {
    acc = a * acc;
    sum += acc;
  }
  return sum;
}

}  // namespace

PolyNlssModel coarsen_model(const PolyNlssModel& model, int factor) {
  validate(model);
  if (factor < 1) throw ValidationError("coarsen_model: factor must be >= 1");
  if (factor == 1) return model;
  PolyNlssModel out = model;
  const Eigen::MatrixXd hold = hold_sum(model.A, factor);
  Eigen::MatrixXd a = model.A;
  for (int i = 1; i < factor; ++i) a = model.A * a;
  out.A = a;
  out.B = hold * model.B;
  out.E = hold * model.E;
  out.ts = model.ts * static_cast<double>(factor);
  return out;
}

PolyNlssModel refine_model(const PolyNlssModel& model, int factor) {
  validate(model);
  if (factor < 1) throw ValidationError("refine_model: factor must be >= 1");
  if (factor == 1) return model;
  PolyNlssModel out = model;
  const Eigen::MatrixXd root =
      model.A.pow(1.0 / static_cast<double>(factor));
  if (!root.allFinite())
    throw ValidationError("refine_model: no real matrix root at this factor");
  const Eigen::MatrixXd hold = hold_sum(root, factor);
  const auto lu = hold.partialPivLu();
  out.A = root;
  out.B = lu.solve(model.B);
  out.E = lu.solve(model.E);
  out.ts = model.ts / static_cast<double>(factor);
  return out;
}

namespace {

constexpr const char* kSchema = "pnlss-v1";

Eigen::MatrixXd matrix_from_field(const nlohmann::json& doc, const char* key,
                                  int rows, int cols) {
  if (!doc.contains(key))
    throw ValidationError(std::string("model document: missing field '") +
                          key + "'");
  const auto& arr = doc.at(key);
  if (!arr.is_array() || static_cast<int>(arr.size()) != rows * cols)
    throw ValidationError(std::string("model document: field '") + key +
                          "' must be a row-major array of " +
                          std::to_string(rows * cols) + " numbers");
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const auto& v = arr.at(static_cast<std::size_t>(i * cols + j));
      if (!v.is_number())
        throw ValidationError(std::string("model document: field '") + key +
                              "' has a non-numeric entry");
      m(i, j) = v.get<double>();
      if (!std::isfinite(m(i, j)))
        throw ValidationError(std::string("model document: field '") + key +
                              "' has a non-finite entry");
    }
  return m;
}

}  // namespace

PolyNlssModel model_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("model document: not an object");
  if (doc.value("schema", "") != kSchema)
    throw ValidationError("model document: unknown schema, expected '" +
                          std::string(kSchema) + "'");
  for (const char* key : {"n", "s", "ts"})
    if (!doc.contains(key))
      throw ValidationError(std::string("model document: missing field '") +
                            key + "'");
  const int n = doc.at("n").get<int>();
  const int s = doc.at("s").get<int>();
  if (n < 1 || s < 0) throw ValidationError("model document: bad dimensions");

  PolyNlssModel m;
  m.name = doc.value("name", "");
  m.ts = doc.at("ts").get<double>();
  m.A = matrix_from_field(doc, "A", n, n);
  m.B = matrix_from_field(doc, "B", n, 1);
  m.C = matrix_from_field(doc, "C", 1, n);
  if (s > 0) {
    m.E = matrix_from_field(doc, "E", n, s);
    if (!doc.contains("exponents"))
      throw ValidationError("model document: missing field 'exponents'");
    const auto& exps = doc.at("exponents");
    if (!exps.is_array() || static_cast<int>(exps.size()) != s)
      throw ValidationError("model document: exponents must list s integers");
    m.exponents.resize(static_cast<std::size_t>(s));
    for (int p = 0; p < s; ++p)
      m.exponents[static_cast<std::size_t>(p)] = exps.at(p).get<int>();

    // canonical monomial ordering: ascending exponent, E columns permuted
    // along so document order never affects the simulation
    std::vector<int> perm(static_cast<std::size_t>(s));
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](int a, int b) {
      return m.exponents[static_cast<std::size_t>(a)] <
             m.exponents[static_cast<std::size_t>(b)];
    });
    Eigen::MatrixXd e_sorted(n, s);
    std::vector<int> exps_sorted(static_cast<std::size_t>(s));
    for (int p = 0; p < s; ++p) {
      e_sorted.col(p) = m.E.col(perm[static_cast<std::size_t>(p)]);
      exps_sorted[static_cast<std::size_t>(p)] =
          m.exponents[static_cast<std::size_t>(perm[static_cast<std::size_t>(p)])];
    }
    m.E = e_sorted;
    m.exponents = exps_sorted;
  } else {
    m.E.resize(n, 0);
  }
  validate(m);
  return m;
}

nlohmann::json model_to_json(const PolyNlssModel& model) {
  validate(model);
  nlohmann::ordered_json doc;
  doc["schema"] = kSchema;
  if (!model.name.empty()) doc["name"] = model.name;
  doc["n"] = model.order();
  doc["s"] = model.num_terms();
  doc["ts"] = model.ts;
  doc["exponents"] = model.exponents;
  auto flat = [](const Eigen::MatrixXd& m) {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(m.size()));
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) v.push_back(m(i, j));
    return v;
  };
  doc["A"] = flat(model.A);
  doc["B"] = flat(model.B);
  doc["C"] = flat(model.C);
  doc["E"] = flat(model.E);
  return doc;
}

PolyNlssModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file " + path.string() +
                          ": JSON parse error: " + e.what());
  }
  auto m = model_from_json(doc);
  if (m.name.empty()) m.name = path.stem().string();
  return m;
}

void save_model(const PolyNlssModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file: " + path.string());
  out << model_to_json(model).dump(2) << "\n";
}

}  // namespace fblin
