#pragma once

// JSON and file I/O for plants, weights, tolerances, network specs and
// controllers. Malformed input always surfaces as kInvalidInput.

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "retrofit/network.hpp"

namespace retrofit::io {

using json = nlohmann::ordered_json;

[[noreturn]] inline void malformed(const std::string& what) {
  throw RetrofitError(RetrofitError::Kind::kInvalidInput, what);
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) malformed("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    malformed(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) malformed("cannot write " + path);
  out << text;
  if (!out) malformed("failed writing " + path);
}

// ---------------------------------------------------------------------------
// Matrices
// ---------------------------------------------------------------------------

inline double number(const json& j, const std::string& what) {
  if (!j.is_number()) malformed(what + " must be a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) malformed(what + " must be finite");
  return x;
}

/// Row-major array of arrays. Rows may be empty for zero-column matrices.
inline MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) malformed(what + " must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  MatrixXd M;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[r];
    if (!row.is_array()) malformed(what + " row " + std::to_string(r) + " is not an array");
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      M.resize(rows, cols);
    }
    if (static_cast<Eigen::Index>(row.size()) != cols) malformed(what + " has ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = number(row[c], what);
  }
  return rows == 0 ? MatrixXd(0, 0) : M;
}

inline json matrix_to_json(const MatrixXd& M) {
  json j = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    j.push_back(row);
  }
  return j;
}

// A zero-row matrix loses its column count in JSON; restore it from context.
inline MatrixXd shaped(MatrixXd M, Eigen::Index rows, Eigen::Index cols) {
  if (M.size() == 0) return MatrixXd::Zero(rows, cols);
  return M;
}

// ---------------------------------------------------------------------------
// Plant
// ---------------------------------------------------------------------------

inline PartitionedPlant plant_from_json(const json& j) {
  if (!j.is_object()) malformed("plant must be a JSON object");
  for (const char* key : {"A", "L", "B", "Gamma", "C"}) {
    if (!j.contains(key)) malformed(std::string("plant is missing \"") + key + "\"");
  }
  const MatrixXd A = matrix_from_json(j["A"], "A");
  const Eigen::Index n = A.rows();
  MatrixXd L = matrix_from_json(j["L"], "L");
  MatrixXd B = matrix_from_json(j["B"], "B");
  MatrixXd Gamma = matrix_from_json(j["Gamma"], "Gamma");
  MatrixXd C = matrix_from_json(j["C"], "C");
  if (Gamma.rows() == 0) Gamma = MatrixXd::Zero(0, n);
  if (C.rows() == 0) C = MatrixXd::Zero(0, n);
  if (L.rows() == 0 && n > 0) malformed("L must have as many rows as A");
  if (B.rows() == 0 && n > 0) malformed("B must have as many rows as A");
  return {A, L, B, Gamma, C};
}

inline json plant_to_json(const PartitionedPlant& G) {
  return {{"A", matrix_to_json(G.A())},
          {"L", matrix_to_json(G.L())},
          {"B", matrix_to_json(G.B())},
          {"Gamma", matrix_to_json(G.Gamma())},
          {"C", matrix_to_json(G.C())}};
}

// ---------------------------------------------------------------------------
// Tolerances and weights
// ---------------------------------------------------------------------------

inline ToleranceConfig tolerances_from_json(const json& j, ToleranceConfig tol = {}) {
  if (!j.is_object()) malformed("tolerances must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "eps_cancel") tol.eps_cancel = number(value, key);
    else if (key == "eps_stab") tol.eps_stab = number(value, key);
    else if (key == "eps_rank") tol.eps_rank = number(value, key);
    else if (key == "residual_tol") tol.residual_tol = number(value, key);
    else if (key == "eps_trim") tol.eps_trim = number(value, key);
    else malformed("unknown tolerance \"" + key + "\"");
  }
  try {
    tol.validate();
  } catch (const std::invalid_argument& e) {
    malformed(e.what());
  }
  return tol;
}

inline json tolerances_to_json(const ToleranceConfig& tol) {
  return {{"eps_cancel", tol.eps_cancel},
          {"eps_stab", tol.eps_stab},
          {"eps_rank", tol.eps_rank},
          {"residual_tol", tol.residual_tol},
          {"eps_trim", tol.eps_trim}};
}

/// {"state": 1, "input": 1, "process_noise": 1, "measurement_noise": 1};
/// each value is a scalar multiple of the identity or an explicit matrix.
inline SynthesisWeights weights_from_json(const json& j) {
  if (!j.is_object()) malformed("weights must be a JSON object");
  SynthesisWeights w;
  auto read = [&](const std::string& key, double& scale, std::optional<MatrixXd>& M) {
    if (!j.contains(key)) return;
    const json& v = j[key];
    if (v.is_number()) {
      scale = number(v, key);
      if (!(scale > 0.0)) malformed("weight \"" + key + "\" must be positive");
    } else {
      M = matrix_from_json(v, key);
    }
  };
  for (const auto& [key, value] : j.items()) {
    if (key != "state" && key != "input" && key != "process_noise" && key != "measurement_noise") {
      malformed("unknown weight \"" + key + "\"");
    }
  }
  read("state", w.state, w.state_matrix);
  read("input", w.input, w.input_matrix);
  read("process_noise", w.process_noise, w.process_noise_matrix);
  read("measurement_noise", w.measurement_noise, w.measurement_noise_matrix);
  return w;
}

// ---------------------------------------------------------------------------
// Rational entries and realizations
// ---------------------------------------------------------------------------

/// {"num": [c0, c1, ...], "den": [...]}, coefficients in ascending powers.
inline json rational_to_json(const RationalFunction& r) {
  if (r.is_zero()) return {{"num", json::array({0.0})}, {"den", json::array({1.0})}};
  return {{"num", r.num().coeffs()}, {"den", r.den().coeffs()}};
}

inline RationalFunction rational_from_json(const json& j, const ToleranceConfig& tol) {
  if (j.is_number()) return RationalFunction(number(j, "constant entry"));
  if (!j.is_object() || !j.contains("num") || !j.contains("den")) {
    malformed("rational entry must be {\"num\": [...], \"den\": [...]}");
  }
  auto coeffs = [&](const json& a, const char* what) {
    if (!a.is_array()) malformed(std::string(what) + " must be an array of coefficients");
    std::vector<double> c;
    for (const json& x : a) c.push_back(number(x, what));
    return c;
  };
  const Polynomial num(coeffs(j["num"], "num"), tol.eps_trim);
  const Polynomial den(coeffs(j["den"], "den"), tol.eps_trim);
  if (den.is_zero()) malformed("rational entry has a zero denominator");
  if (num.is_zero()) return RationalFunction();
  return RationalFunction(num, den, tol);
}

inline json transfer_matrix_to_json(const TransferMatrix& T) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < T.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < T.cols(); ++k) row.push_back(rational_to_json(T(i, k)));
    rows.push_back(row);
  }
  return rows;
}

inline TransferMatrix transfer_matrix_from_json(const json& j, const ToleranceConfig& tol) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) malformed("entries must be a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  std::vector<RationalFunction> entries;
  for (const json& row : j) {
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) malformed("entries have ragged rows");
    for (const json& e : row) entries.push_back(rational_from_json(e, tol));
  }
  return TransferMatrix(rows, cols, std::move(entries));
}

inline json state_space_to_json(const StateSpace& s) {
  return {{"A", matrix_to_json(s.A)}, {"B", matrix_to_json(s.B)}, {"C", matrix_to_json(s.C)}, {"D", matrix_to_json(s.D)}};
}

inline StateSpace state_space_from_json(const json& j) {
  if (!j.is_object()) malformed("realization must be a JSON object");
  for (const char* key : {"A", "B", "C", "D"}) {
    if (!j.contains(key)) malformed(std::string("realization is missing \"") + key + "\"");
  }
  const MatrixXd D = matrix_from_json(j["D"], "D");
  if (D.size() == 0) malformed("realization D must be nonempty (it fixes the input/output sizes)");
  const MatrixXd A = matrix_from_json(j["A"], "A");
  const Eigen::Index n = A.rows();
  StateSpace s(A, shaped(matrix_from_json(j["B"], "B"), n, D.cols()), shaped(matrix_from_json(j["C"], "C"), D.rows(), n),
               D);
  s.validate();
  return s;
}

/// {"realization": {...}, "entries": [[...]]}; entries only when known.
inline json system_to_json(const StateSpace& s, const std::optional<TransferMatrix>& tf) {
  json j = {{"inputs", s.inputs()}, {"outputs", s.outputs()}, {"realization", state_space_to_json(s)}};
  if (tf) j["entries"] = transfer_matrix_to_json(*tf);
  return j;
}

/// Prefers the realization; falls back to a realization of the entries.
inline StateSpace system_from_json(const json& j, const ToleranceConfig& tol) {
  if (!j.is_object()) malformed("system must be a JSON object");
  if (j.contains("realization")) return state_space_from_json(j["realization"]);
  if (j.contains("entries")) return tf_to_ss(transfer_matrix_from_json(j["entries"], tol), tol);
  malformed("system needs \"realization\" or \"entries\"");
}

// ---------------------------------------------------------------------------
// Reports and controllers
// ---------------------------------------------------------------------------

inline json report_to_json(const VerificationReport& v) {
  json j = {{"retrofit", v.retrofit.pass},
            {"output_rectifying", v.output_rectifying.pass},
            {"Q_stable", v.output_rectifying.Q_stable},
            {"residuals",
             {{"QGyv", v.output_rectifying.QGyv_residual},
              {"GwuQGyv", v.retrofit.GwuQGyv_residual},
              {"invariance", v.invariance_residual}}},
            {"lemma3",
             {{"pass", v.lemma3.pass},
              {"Qhat_stable", v.lemma3.Qhat_stable},
              {"QhatGGinv_stable", v.lemma3.QhatGGinv_stable},
              {"theorem1_applies", v.lemma3.theorem1_applies}}}};
  if (v.lemma3.theorem2_holds) j["lemma3"]["theorem2_holds"] = *v.lemma3.theorem2_holds;
  return j;
}

inline json controller_to_json(const RetrofitController& c) {
  json j;
  j["mode"] = to_string(c.mode);
  j["input"] = c.mode == RetrofitMode::kMeasured ? "y,v" : "y";
  if (c.rect.partition) {
    j["index_set"] = c.rect.partition->index_set;  // 0-based output rows
  } else {
    j["index_set"] = json::array();
  }
  j["rectified_outputs"] = c.rect.outputs();
  j["Khat"] = system_to_json(c.Khat, c.Khat_tf);
  j["R"] = system_to_json(c.rect.realization, c.rect.R);
  j["K"] = system_to_json(c.K, c.K_tf);
  j["verification"] = report_to_json(c.verification);
  return j;
}

// ---------------------------------------------------------------------------
// Network specs
// ---------------------------------------------------------------------------

/// {"N": 50, "m": 1.0 | [...], "d": 0.5 | [...], "alpha": 1.0,
///  "interest": [1, ...], "edges": [[k, l], [k, l, alpha], ...], "graphs": 15}
/// Node numbers are 1-based in JSON.
struct NetworkFile {
  NetworkSpec spec;
  std::optional<int> graphs;
};

inline NetworkFile network_from_json(const json& j) {
  if (!j.is_object()) malformed("network spec must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    static const std::set<std::string> known = {"N", "m", "d", "alpha", "interest", "edges", "graphs"};
    if (!known.count(key)) malformed("unknown network key \"" + key + "\"");
  }
  for (const char* key : {"N", "interest", "edges"}) {
    if (!j.contains(key)) malformed(std::string("network spec is missing \"") + key + "\"");
  }
  if (!j["N"].is_number_integer() || j["N"].get<long long>() < 1) malformed("N must be a positive integer");
  NetworkFile f;
  NetworkSpec& s = f.spec;
  s.N = j["N"].get<int>();
  auto per_node = [&](const char* key, double fallback) {
    std::vector<double> out(static_cast<std::size_t>(s.N), fallback);
    if (!j.contains(key)) return out;
    const json& v = j[key];
    if (v.is_number()) {
      std::fill(out.begin(), out.end(), number(v, key));
    } else if (v.is_array() && static_cast<int>(v.size()) == s.N) {
      for (int k = 0; k < s.N; ++k) out[k] = number(v[k], key);
    } else {
      malformed(std::string(key) + " must be a number or one number per node");
    }
    return out;
  };
  s.m = per_node("m", 1.0);
  s.d = per_node("d", 0.5);
  const double alpha = j.contains("alpha") ? number(j["alpha"], "alpha") : 1.0;
  auto node = [&](const json& v) {
    if (!v.is_number_integer()) malformed("node numbers must be integers");
    return v.get<int>() - 1;
  };
  if (!j["interest"].is_array()) malformed("interest must be an array of node numbers");
  for (const json& v : j["interest"]) s.interest.push_back(node(v));
  if (!j["edges"].is_array()) malformed("edges must be an array");
  for (const json& e : j["edges"]) {
    if (!e.is_array() || (e.size() != 2 && e.size() != 3)) malformed("each edge is [k, l] or [k, l, alpha]");
    s.edges.push_back({node(e[0]), node(e[1]), e.size() == 3 ? number(e[2], "edge alpha") : alpha});
  }
  if (j.contains("graphs")) {
    if (!j["graphs"].is_number_integer()) malformed("graphs must be an integer");
    f.graphs = j["graphs"].get<int>();
  }
  s.validate();
  return f;
}

inline json network_to_json(const NetworkSpec& s) {
  json edges = json::array();
  for (const NetworkEdge& e : s.edges) edges.push_back({e.k + 1, e.l + 1, e.alpha});
  json interest = json::array();
  for (int k : s.interest_nodes()) interest.push_back(k + 1);
  return {{"N", s.N}, {"m", s.m}, {"d", s.d}, {"interest", interest}, {"edges", edges}};
}

}  // namespace retrofit::io
