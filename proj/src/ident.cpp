#include "gridsleuth/ident.hpp"

#include <json.hpp>

#include <algorithm>
#include <utility>

#include "gridsleuth/errors.hpp"

namespace gridsleuth::ident {

using json = nlohmann::json;

RowPartition select_basis(const ComplexMatrix& V, double tau) {
  if (V.rows() == 0 || V.cols() == 0)
    throw InvalidArgumentError("voltage window is empty");
  if (!(tau > 0.0))
    throw InvalidArgumentError("rank tolerance must be positive");
  numerics::ensure_finite(V, "voltage window");

  numerics::PivotedQR qr = numerics::qr_pivoted(V.transpose());
  if (qr.diag_magnitudes(0) == 0.0)
    throw InvalidArgumentError("voltage window is identically zero");
  const int R = qr.rank(tau);

  RowPartition part;
  part.independent.assign(qr.perm.data(), qr.perm.data() + R);
  std::sort(part.independent.begin(), part.independent.end());
  std::vector<bool> kept(static_cast<size_t>(V.rows()), false);
  for (int r : part.independent) kept[static_cast<size_t>(r)] = true;
  for (int r = 0; r < V.rows(); ++r)
    if (!kept[static_cast<size_t>(r)]) part.dependent.push_back(r);
  return part;
}

namespace {

ComplexMatrix gather_rows(const ComplexMatrix& M, const std::vector<int>& rows) {
  ComplexMatrix out(static_cast<Eigen::Index>(rows.size()), M.cols());
  for (size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = M.row(rows[r]);
  return out;
}

ComplexMatrix symmetrized(const ComplexMatrix& M) {
  return 0.5 * (M + M.transpose());
}

// Duplicated window rows (a constant source phase, a bus tied through a
// closed switch) let the coupling shuttle mass between the two blocks at
// identical l1 cost, leaving a whole face of minimizers. Pricing the
// dependent block a few percent above the independent one resolves every
// such tie toward the reduced form, the only representative the window can
// distinguish; the bias is far below any real sparsity signal.
constexpr double kDependentBlockWeight = 1.05;

// min w*||vec(Y11)||_1 + ||vec(Y22)||_1  subject to the data coupling
// vec(Y22) - (X^T (x) X^T) vec(Y11) = vec(C) and symmetry of both blocks.
void recover_free_blocks(const ComplexMatrix& X, const ComplexMatrix& C,
                         IdentifiedModel& m) {
  const Eigen::Index n1 = X.rows();
  const Eigen::Index R = X.cols();
  const ComplexMatrix Xt = X.transpose();
  const double w = kDependentBlockWeight;

  numerics::BasisPursuitProblem prob;
  prob.A.resize(R * R, n1 * n1 + R * R);
  prob.A.rightCols(R * R) = ComplexMatrix::Identity(R * R, R * R);
  for (Eigen::Index j1 = 0; j1 < n1; ++j1)
    for (Eigen::Index j2 = 0; j2 < n1; ++j2)
      for (Eigen::Index i1 = 0; i1 < R; ++i1)
        for (Eigen::Index i2 = 0; i2 < R; ++i2)
          prob.A(i1 * R + i2, j1 * n1 + j2) = -Xt(i1, j1) * Xt(i2, j2) / w;
  prob.b = Eigen::Map<const ComplexVector>(C.data(), R * R);
  for (Eigen::Index a = 0; a < n1; ++a)
    for (Eigen::Index b = a + 1; b < n1; ++b)
      prob.symmetry_map.emplace_back(a + b * n1, b + a * n1);
  for (Eigen::Index a = 0; a < R; ++a)
    for (Eigen::Index b = a + 1; b < R; ++b)
      prob.symmetry_map.emplace_back(n1 * n1 + a + b * R, n1 * n1 + b + a * R);

  numerics::BasisPursuitInfo info;
  ComplexVector x;
  try {
    x = numerics::basis_pursuit(prob, &info);
  } catch (const numerics::ConvergenceError& e) {
    throw SolverError(std::string("sparse admittance completion: ") + e.what(),
                      e.primal_residual());
  }

  m.Y11 = symmetrized(
      Eigen::Map<const ComplexMatrix>(x.data(), n1, n1) / w);
  m.Y22 = symmetrized(
      Eigen::Map<const ComplexMatrix>(x.data() + n1 * n1, R, R));
  m.diagnostics.constraint_violation = info.constraint_violation;
  m.diagnostics.objective = info.objective;
  m.diagnostics.recovery_iterations = info.iterations;
}

}  // namespace

IdentifiedModel identify(const ComplexMatrix& V, const ComplexMatrix& I,
                         double tau) {
  if (V.rows() != I.rows() || V.cols() != I.cols())
    throw InvalidArgumentError(
        "voltage and current windows disagree in shape");
  numerics::ensure_finite(I, "current window");

  IdentifiedModel m;
  m.tau = tau;
  m.partition = select_basis(V, tau);
  const Eigen::Index D = V.rows();
  const Eigen::Index K = V.cols();
  const Eigen::Index R = m.partition.rank();

  if (R < D && R == K)
    throw InsufficientDataError(
        "a window of " + std::to_string(K) + " slots saturates at rank " +
        std::to_string(R) +
        "; the basis is limited by the sample count, add slots");

  if (R == D) {
    ComplexMatrix Y =
        symmetrized(numerics::lstsq(V.transpose(), I.transpose()).transpose());
    m.X.resize(0, D);
    m.YX = Y;
    m.Y11.resize(0, 0);
    m.Y12.resize(0, D);
    m.Y22 = std::move(Y);
    m.diagnostics.fit_residual = (I - m.Y22 * V).cwiseAbs().maxCoeff();
    return m;
  }

  const ComplexMatrix V1 = gather_rows(V, m.partition.dependent);
  const ComplexMatrix V2 = gather_rows(V, m.partition.independent);
  const ComplexMatrix V2t = V2.transpose();

  m.X = numerics::lstsq(V2t, V1.transpose()).transpose();
  m.YX = numerics::lstsq(V2t, I.transpose()).transpose();
  m.diagnostics.dependency_residual = (V1 - m.X * V2).cwiseAbs().maxCoeff();

  const ComplexMatrix YX1 = gather_rows(m.YX, m.partition.dependent);
  const ComplexMatrix YX2 = gather_rows(m.YX, m.partition.independent);
  const ComplexMatrix C = symmetrized(YX2 - YX1.transpose() * m.X);

  recover_free_blocks(m.X, C, m);
  m.Y12 = YX1 - m.Y11 * m.X;
  m.diagnostics.fit_residual =
      (I - reconstruct_full(m) * V).cwiseAbs().maxCoeff();
  return m;
}

ComplexMatrix reconstruct_full(const IdentifiedModel& m) {
  const int D = m.partition.dimension();
  const auto& dep = m.partition.dependent;
  const auto& ind = m.partition.independent;
  ComplexMatrix Y = ComplexMatrix::Zero(D, D);
  for (size_t a = 0; a < dep.size(); ++a)
    for (size_t b = 0; b < dep.size(); ++b)
      Y(dep[a], dep[b]) = m.Y11(static_cast<Eigen::Index>(a),
                                static_cast<Eigen::Index>(b));
  for (size_t a = 0; a < dep.size(); ++a)
    for (size_t b = 0; b < ind.size(); ++b) {
      const Complex y = m.Y12(static_cast<Eigen::Index>(a),
                              static_cast<Eigen::Index>(b));
      Y(dep[a], ind[b]) = y;
      Y(ind[b], dep[a]) = y;
    }
  for (size_t a = 0; a < ind.size(); ++a)
    for (size_t b = 0; b < ind.size(); ++b)
      Y(ind[a], ind[b]) = m.Y22(static_cast<Eigen::Index>(a),
                                static_cast<Eigen::Index>(b));
  return Y;
}

namespace {

json matrix_to_json(const ComplexMatrix& M) {
  json data = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c)
      row.push_back(json::array({M(r, c).real(), M(r, c).imag()}));
    data.push_back(std::move(row));
  }
  return json{{"rows", M.rows()}, {"cols", M.cols()}, {"data", std::move(data)}};
}

ComplexMatrix matrix_from_json(const json& j, const char* name) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") ||
      !j.contains("data"))
    throw ModelError(std::string("model JSON: matrix '") + name +
                     "' must carry rows, cols, data");
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (rows < 0 || cols < 0 || !data.is_array() ||
      data.size() != static_cast<size_t>(rows))
    throw ModelError(std::string("model JSON: matrix '") + name +
                     "' has inconsistent dimensions");
  ComplexMatrix M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = data[static_cast<size_t>(r)];
    if (!row.is_array() || row.size() != static_cast<size_t>(cols))
      throw ModelError(std::string("model JSON: matrix '") + name +
                       "' has a ragged row");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& e = row[static_cast<size_t>(c)];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() ||
          !e[1].is_number())
        throw ModelError(std::string("model JSON: matrix '") + name +
                         "' entries must be [re, im] pairs");
      M(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
    }
  }
  return M;
}

}  // namespace

std::string model_to_json(const IdentifiedModel& m) {
  json j;
  j["format"] = "gridsleuth-model";
  j["version"] = 1;
  j["tau"] = m.tau;
  j["dependent"] = m.partition.dependent;
  j["independent"] = m.partition.independent;
  j["X"] = matrix_to_json(m.X);
  j["YX"] = matrix_to_json(m.YX);
  j["Y11"] = matrix_to_json(m.Y11);
  j["Y12"] = matrix_to_json(m.Y12);
  j["Y22"] = matrix_to_json(m.Y22);
  j["diagnostics"] = {
      {"dependency_residual", m.diagnostics.dependency_residual},
      {"fit_residual", m.diagnostics.fit_residual},
      {"constraint_violation", m.diagnostics.constraint_violation},
      {"objective", m.diagnostics.objective},
      {"recovery_iterations", m.diagnostics.recovery_iterations}};
  return j.dump(2) + "\n";
}

IdentifiedModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model JSON: ") + e.what(),
                     static_cast<unsigned long long>(e.byte));
  }
  if (!j.is_object() || j.value("format", "") != "gridsleuth-model")
    throw ModelError("model JSON: missing format marker 'gridsleuth-model'");
  if (j.value("version", 0) != 1)
    throw ModelError("model JSON: unsupported version");
  for (const char* key :
       {"tau", "dependent", "independent", "X", "YX", "Y11", "Y12", "Y22"})
    if (!j.contains(key))
      throw ModelError(std::string("model JSON: field '") + key +
                       "' is missing");

  IdentifiedModel m;
  m.tau = j.at("tau").get<double>();
  m.partition.dependent = j.at("dependent").get<std::vector<int>>();
  m.partition.independent = j.at("independent").get<std::vector<int>>();
  m.X = matrix_from_json(j.at("X"), "X");
  m.YX = matrix_from_json(j.at("YX"), "YX");
  m.Y11 = matrix_from_json(j.at("Y11"), "Y11");
  m.Y12 = matrix_from_json(j.at("Y12"), "Y12");
  m.Y22 = matrix_from_json(j.at("Y22"), "Y22");
  if (j.contains("diagnostics")) {
    const json& d = j.at("diagnostics");
    m.diagnostics.dependency_residual = d.value("dependency_residual", 0.0);
    m.diagnostics.fit_residual = d.value("fit_residual", 0.0);
    m.diagnostics.constraint_violation = d.value("constraint_violation", 0.0);
    m.diagnostics.objective = d.value("objective", 0.0);
    m.diagnostics.recovery_iterations = d.value("recovery_iterations", 0);
  }

  const auto n1 = static_cast<Eigen::Index>(m.partition.dependent.size());
  const auto R = static_cast<Eigen::Index>(m.partition.independent.size());
  if (m.X.rows() != n1 || m.X.cols() != R || m.Y11.rows() != n1 ||
      m.Y11.cols() != n1 || m.Y12.rows() != n1 || m.Y12.cols() != R ||
      m.Y22.rows() != R || m.Y22.cols() != R || m.YX.rows() != n1 + R ||
      m.YX.cols() != R)
    throw ModelError("model JSON: block shapes disagree with the partition");
  return m;
}

}  // namespace gridsleuth::ident
