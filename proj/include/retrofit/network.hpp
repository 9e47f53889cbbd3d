#pragma once

// Second-order network benchmark: a swing-like network split into a
// subsystem of interest and its environment, the cut-edge sweep, and L2
// performance of the uncontrolled and retrofit-controlled closed loops.

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <ostream>
#include <set>
#include <thread>

#include "retrofit/synthesis.hpp"

namespace retrofit {

struct NetworkEdge {
  int k = 0;  // 0-based node ids
  int l = 0;
  double alpha = 1.0;
};

/// m_k th_k'' + d_k th_k' + sum_l alpha_kl (th_k - th_l) + u_k = 0.
struct NetworkSpec {
  int N = 0;
  std::vector<double> m;
  std::vector<double> d;
  std::vector<NetworkEdge> edges;
  std::vector<int> interest;  // 0-based, any order

  static NetworkSpec uniform(int N, double m, double d, std::vector<NetworkEdge> edges, std::vector<int> interest) {
    NetworkSpec s;
    s.N = N;
    s.m.assign(static_cast<std::size_t>(std::max(N, 0)), m);
    s.d.assign(static_cast<std::size_t>(std::max(N, 0)), d);
    s.edges = std::move(edges);
    s.interest = std::move(interest);
    return s;
  }

  /// Node parameters and edge list only.
  void validate_graph() const {
    auto fail = [](const std::string& what) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput, "invalid network: " + what);
    };
    if (N < 1) fail("N must be positive");
    if (m.size() != static_cast<std::size_t>(N) || d.size() != static_cast<std::size_t>(N)) {
      fail("m and d need one entry per node");
    }
    for (int k = 0; k < N; ++k) {
      if (!(m[k] > 0.0) || !std::isfinite(m[k])) fail("inertia m_" + std::to_string(k + 1) + " must be positive");
      if (!(d[k] > 0.0) || !std::isfinite(d[k])) fail("damping d_" + std::to_string(k + 1) + " must be positive");
    }
    std::set<std::pair<int, int>> seen;
    for (const NetworkEdge& e : edges) {
      if (e.k < 0 || e.k >= N || e.l < 0 || e.l >= N) fail("edge endpoint out of range");
      if (e.k == e.l) fail("self loop on node " + std::to_string(e.k + 1));
      if (!(e.alpha > 0.0) || !std::isfinite(e.alpha)) fail("edge weights must be positive");
      if (!seen.insert({std::min(e.k, e.l), std::max(e.k, e.l)}).second) {
        fail("duplicate edge " + std::to_string(e.k + 1) + "-" + std::to_string(e.l + 1));
      }
    }
  }

  void validate() const {
    validate_graph();
    std::set<int> s;
    for (int k : interest) {
      if (k < 0 || k >= N) {
        throw RetrofitError(RetrofitError::Kind::kInvalidInput, "invalid network: interest node out of range");
      }
      if (!s.insert(k).second) {
        throw RetrofitError(RetrofitError::Kind::kInvalidInput, "invalid network: repeated interest node");
      }
    }
    if (s.empty() || static_cast<int>(s.size()) == N) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput,
                          "invalid network: interest set must be a nonempty proper subset of the nodes");
    }
  }

  std::vector<int> interest_nodes() const {
    std::vector<int> out = interest;
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<int> environment_nodes() const {
    const std::vector<int> in = interest_nodes();
    std::vector<int> out;
    for (int k = 0; k < N; ++k) {
      if (!std::binary_search(in.begin(), in.end(), k)) out.push_back(k);
    }
    return out;
  }

  /// Edges with exactly one endpoint in the interest set, oriented so that
  /// k is the interest endpoint.
  std::vector<NetworkEdge> cut_edges() const {
    const std::vector<int> in = interest_nodes();
    auto inside = [&](int k) { return std::binary_search(in.begin(), in.end(), k); };
    std::vector<NetworkEdge> out;
    for (const NetworkEdge& e : edges) {
      if (inside(e.k) && !inside(e.l)) out.push_back(e);
      if (!inside(e.k) && inside(e.l)) out.push_back({e.l, e.k, e.alpha});
    }
    return out;
  }
};

/// Node-set model with states (th_k, w_k) interleaved in the order of
/// `nodes`. Couplings to nodes outside the set enter through `ext` inputs
/// carrying the outside angles; `boundary` lists the inside nodes whose
/// angles are exported.
struct NodeSetModel {
  MatrixXd A, L, B, Gamma, C;
};

namespace detail {

inline int index_in(const std::vector<int>& sorted, int k) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), k);
  return (it != sorted.end() && *it == k) ? static_cast<int>(it - sorted.begin()) : -1;
}

inline NodeSetModel node_set_model(const NetworkSpec& spec, const std::vector<int>& nodes,
                                   const std::vector<int>& ext, const std::vector<int>& boundary) {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  NodeSetModel M;
  M.A = MatrixXd::Zero(2 * n, 2 * n);
  M.L = MatrixXd::Zero(2 * n, static_cast<Eigen::Index>(ext.size()));
  M.B = MatrixXd::Zero(2 * n, n);
  M.Gamma = MatrixXd::Zero(static_cast<Eigen::Index>(boundary.size()), 2 * n);
  M.C = MatrixXd::Zero(n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mk = spec.m[nodes[i]];
    M.A(2 * i, 2 * i + 1) = 1.0;
    M.A(2 * i + 1, 2 * i + 1) = -spec.d[nodes[i]] / mk;
    M.B(2 * i + 1, i) = -1.0 / mk;
    M.C(i, 2 * i + 1) = 1.0;
  }
  auto couple = [&](int k, int l, double alpha) {
    const int i = index_in(nodes, k);
    if (i < 0) return;
    const double a = alpha / spec.m[k];
    M.A(2 * i + 1, 2 * i) -= a;
    if (const int j = index_in(nodes, l); j >= 0) {
      M.A(2 * i + 1, 2 * j) += a;
    } else {
      M.L(2 * i + 1, index_in(ext, l)) += a;
    }
  };
  for (const NetworkEdge& e : spec.edges) {
    couple(e.k, e.l, e.alpha);
    couple(e.l, e.k, e.alpha);
  }
  for (std::size_t b = 0; b < boundary.size(); ++b) {
    M.Gamma(static_cast<Eigen::Index>(b), 2 * index_in(nodes, boundary[b])) = 1.0;
  }
  return M;
}

}  // namespace detail

/// Subsystem of interest, environment, and the bookkeeping that maps their
/// states and signals back to network nodes.
struct NetworkPartition {
  PartitionedPlant plant;
  Environment env;
  std::vector<int> interest;  // sorted; plant states 2i, 2i+1
  std::vector<int> env_nodes; // sorted; environment states 2e, 2e+1
  std::vector<int> v_nodes;   // environment endpoints of cut edges, one per v channel
  std::vector<int> w_nodes;   // interest endpoints of cut edges, one per w channel
  int N = 0;

  /// Selects all node frequencies from the state (x, x_env, x_K).
  MatrixXd frequency_output(Eigen::Index controller_states) const {
    const Eigen::Index n = plant.n();
    const Eigen::Index ne = env.realization.states();
    MatrixXd C = MatrixXd::Zero(N, n + ne + controller_states);
    for (std::size_t i = 0; i < interest.size(); ++i) C(interest[i], 2 * static_cast<Eigen::Index>(i) + 1) = 1.0;
    for (std::size_t e = 0; e < env_nodes.size(); ++e) {
      C(env_nodes[e], n + 2 * static_cast<Eigen::Index>(e) + 1) = 1.0;
    }
    return C;
  }

  /// Unit frequency offset on `node` (default: last interest node). A
  /// disturbance on a cut-edge endpoint lies in range(L), looks exactly like
  /// an interaction impulse, and is therefore invisible to an
  /// output-rectifying controller.
  VectorXd initial_state(Eigen::Index controller_states, int node = -1) const {
    const Eigen::Index n = plant.n();
    const Eigen::Index ne = env.realization.states();
    VectorXd x0 = VectorXd::Zero(n + ne + controller_states);
    if (node < 0) node = interest.back();
    if (const int i = detail::index_in(interest, node); i >= 0) {
      x0(2 * i + 1) = 1.0;
    } else if (const int e = detail::index_in(env_nodes, node); e >= 0) {
      x0(n + 2 * e + 1) = 1.0;
    } else {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput, "disturbed node out of range");
    }
    return x0;
  }
};

/// Model of an arbitrary node set, ignoring couplings to the rest (no
/// interaction channels). Useful for isolated nodes and small checks.
inline PartitionedPlant build_subsystem(const NetworkSpec& spec, std::vector<int> nodes) {
  spec.validate_graph();
  std::sort(nodes.begin(), nodes.end());
  NetworkSpec inner = spec;
  inner.edges.clear();
  for (const NetworkEdge& e : spec.edges) {
    if (detail::index_in(nodes, e.k) >= 0 && detail::index_in(nodes, e.l) >= 0) inner.edges.push_back(e);
  }
  const NodeSetModel M = detail::node_set_model(inner, nodes, {}, {});
  return {M.A, M.L, M.B, M.Gamma, M.C};
}

inline NetworkPartition build_partitioned_plant(const NetworkSpec& spec, const ToleranceConfig& tol = {}) {
  spec.validate();
  const std::vector<NetworkEdge> cut = spec.cut_edges();
  if (cut.empty()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput,
                        "interest set has no edge to the environment (no interaction, retrofit is trivial)");
  }
  NetworkPartition P;
  P.N = spec.N;
  P.interest = spec.interest_nodes();
  P.env_nodes = spec.environment_nodes();
  std::set<int> vs;
  std::set<int> ws;
  for (const NetworkEdge& e : cut) {
    ws.insert(e.k);
    vs.insert(e.l);
  }
  P.v_nodes.assign(vs.begin(), vs.end());
  P.w_nodes.assign(ws.begin(), ws.end());

  const NodeSetModel G = detail::node_set_model(spec, P.interest, P.v_nodes, P.w_nodes);
  P.plant = PartitionedPlant(G.A, G.L, G.B, G.Gamma, G.C);
  // The environment sees the interest angles it couples to (w) and exports
  // the angles of its cut-edge endpoints (v).
  const NodeSetModel E = detail::node_set_model(spec, P.env_nodes, P.w_nodes, P.v_nodes);
  P.env = {StateSpace(E.A, E.L, E.Gamma, MatrixXd::Zero(E.Gamma.rows(), E.L.cols()))};

  if (!P.plant.is_stable(tol.eps_stab)) {
    std::ostringstream os;
    os << "subsystem of interest is not stable (spectral abscissa " << linalg::spectral_abscissa(P.plant.A())
       << "); every interest component needs a cut edge";
    throw RetrofitError(RetrofitError::Kind::kAssumption1, os.str());
  }
  return P;
}

/// Whole network in natural node order (th_1, w_1, ..., th_N, w_N), no control.
inline MatrixXd monolithic_state_matrix(const NetworkSpec& spec) {
  spec.validate_graph();
  std::vector<int> all(static_cast<std::size_t>(spec.N));
  for (int k = 0; k < spec.N; ++k) all[k] = k;
  return detail::node_set_model(spec, all, {}, {}).A;
}

/// Graph j (1-based) keeps the edges of `base` that do not cross the cut and
/// adds cut edges pairing the j lowest-numbered interest nodes with the j
/// lowest-numbered environment nodes.
inline std::vector<NetworkSpec> graph_sweep(const NetworkSpec& base, int num_graphs) {
  base.validate();
  const std::vector<NetworkEdge> cut = base.cut_edges();
  if (cut.empty()) throw RetrofitError(RetrofitError::Kind::kInvalidInput, "base network has no cut edge");
  const std::vector<int> in = base.interest_nodes();
  const std::vector<int> out = base.environment_nodes();
  if (num_graphs < 1 || static_cast<std::size_t>(num_graphs) > std::min(in.size(), out.size())) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput,
                        "requested " + std::to_string(num_graphs) + " graphs but only " +
                            std::to_string(std::min(in.size(), out.size())) + " node pairs are available");
  }
  std::vector<NetworkEdge> internal;
  for (const NetworkEdge& e : base.edges) {
    const bool a = std::binary_search(in.begin(), in.end(), e.k);
    const bool b = std::binary_search(in.begin(), in.end(), e.l);
    if (a == b) internal.push_back(e);
  }
  const double alpha = cut.front().alpha;
  std::vector<NetworkSpec> sweep;
  for (int j = 1; j <= num_graphs; ++j) {
    NetworkSpec s = base;
    s.edges = internal;
    for (int i = 0; i < j; ++i) s.edges.push_back({in[i], out[i], alpha});
    sweep.push_back(std::move(s));
  }
  return sweep;
}

/// N nodes with unit inertia and damping 0.5, the first half as the
/// subsystem of interest, a path inside each half and one edge between the
/// first nodes of the halves.
inline NetworkSpec default_paper_network(int N = 50, double m = 1.0, double d = 0.5, double alpha = 1.0) {
  if (N < 4 || N % 2 != 0) throw RetrofitError(RetrofitError::Kind::kInvalidInput, "N must be even and >= 4");
  const int h = N / 2;
  std::vector<NetworkEdge> edges;
  for (int k = 0; k + 1 < h; ++k) {
    edges.push_back({k, k + 1, alpha});
    edges.push_back({h + k, h + k + 1, alpha});
  }
  edges.push_back({0, h, alpha});
  std::vector<int> interest(static_cast<std::size_t>(h));
  for (int k = 0; k < h; ++k) interest[k] = k;
  return NetworkSpec::uniform(N, m, d, std::move(edges), std::move(interest));
}

// ---------------------------------------------------------------------------
// L2 performance
// ---------------------------------------------------------------------------

struct L2Options {
  // Remove eigenvalues within rigid_tol (1 + ||A||) of zero, provided they
  // are unobservable from the output. A network with no grounding has such
  // a mode: all angles shifting together.
  bool deflate_rigid = false;
  double rigid_tol = 1e-8;
};

namespace detail {

struct Deflated {
  MatrixXcd T;   // triangular dynamics of the retained part
  MatrixXcd U;   // its Schur basis
  MatrixXcd CU;  // output restricted to it
};

inline Deflated deflate(const MatrixXd& A, const MatrixXd& C, const L2Options& opt) {
  if (A.rows() != A.cols() || C.cols() != A.rows()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "L2 norm: inconsistent dimensions");
  }
  const double thresh = opt.deflate_rigid ? opt.rigid_tol * (1.0 + A.norm()) : -1.0;
  const linalg::OrderedSchur s = linalg::ordered_schur(A, [&](cplx z) { return std::abs(z) <= thresh; });
  const Eigen::Index k = s.selected;
  const Eigen::Index n = A.rows();
  if (k > 0) {
    const double leak = (C.cast<cplx>() * s.U.leftCols(k)).norm();
    if (leak > 1e-6 * (1.0 + C.norm())) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput,
                          "marginal mode is observable from the output (infinite L2 norm)");
    }
  }
  return {s.T.bottomRightCorner(n - k, n - k), s.U.rightCols(n - k), C.cast<cplx>() * s.U.rightCols(n - k)};
}

}  // namespace detail

/// Spectral abscissa, ignoring unobservable rigid modes when requested.
inline double l2_abscissa(const MatrixXd& A, const MatrixXd& C, const L2Options& opt = {}) {
  const detail::Deflated d = detail::deflate(A, C, opt);
  double a = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < d.T.rows(); ++i) a = std::max(a, d.T(i, i).real());
  return a;
}

/// ||C e^{At} x0||_2 over [0, inf) through A^T P + P A + C^T C = 0.
inline double l2_norm_response(const MatrixXd& A, const MatrixXd& C, const VectorXd& x0, const L2Options& opt = {}) {
  if (x0.size() != A.rows()) throw RetrofitError(RetrofitError::Kind::kInvalidInput, "L2 norm: x0 size mismatch");
  const detail::Deflated d = detail::deflate(A, C, opt);
  for (Eigen::Index i = 0; i < d.T.rows(); ++i) {
    if (d.T(i, i).real() >= 0.0) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput, "L2 norm: state matrix is not stable (infinite norm)");
    }
  }
  if (x0.isZero(0.0) || d.T.rows() == 0) return 0.0;
  const MatrixXcd Q = d.CU.adjoint() * d.CU;
  const MatrixXcd P = linalg::lyapunov_triangular(d.T, Q);
  const double res = (d.T.adjoint() * P + P * d.T + Q).norm();
  if (res > 1e-8 * std::max(P.norm(), std::numeric_limits<double>::min())) {
    throw RetrofitError(RetrofitError::Kind::kNumerical, "Lyapunov residual too large for the L2 norm");
  }
  const VectorXcd z = d.U.adjoint() * x0.cast<cplx>();
  return std::sqrt(std::max(0.0, (z.adjoint() * P * z)(0, 0).real()));
}

/// Time-domain oracle: exact per-step energy from the Van Loan exponential,
/// stepped until the slowest retained mode has decayed by 1e-6 (twice over,
/// to cover transient growth).
inline double l2_norm_simulated(const MatrixXd& A, const MatrixXd& C, const VectorXd& x0, const L2Options& opt = {}) {
  const double a = l2_abscissa(A, C, opt);
  if (!(a < 0.0)) throw RetrofitError(RetrofitError::Kind::kInvalidInput, "L2 norm: state matrix is not stable");
  const Eigen::Index n = A.rows();
  const double horizon = 2.0 * std::log(1e6) / -a;
  const int steps = 400;
  const double h = horizon / steps;
  MatrixXd M = MatrixXd::Zero(2 * n, 2 * n);
  M.topLeftCorner(n, n) = -A.transpose();
  M.topRightCorner(n, n) = C.transpose() * C;
  M.bottomRightCorner(n, n) = A;
  const MatrixXd F = (M * h).exp();
  const MatrixXd Phi = F.bottomRightCorner(n, n);
  MatrixXd W = Phi.transpose() * F.topRightCorner(n, n);
  W = 0.5 * (W + W.transpose());
  double J = 0.0;
  VectorXd x = x0;
  for (int k = 0; k < steps; ++k) {
    J += x.dot(W * x);
    x = Phi * x;
  }
  return std::sqrt(std::max(0.0, J));
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

struct BenchmarkOptions {
  SynthesisOptions synth{.tol = {}, .seed = 0x5eed, .route = SynthesisRoute::kStateSpace};
  int num_graphs = 15;
  int disturbed_node = -1;  // 0-based; default: last interest node
  double stability_margin = 1e-6;
  bool check_simulation = false;
  unsigned threads = 1;  // 0: hardware concurrency
};

struct BenchmarkRow {
  int graph = 0;
  Eigen::Index dim_v = 0;
  Eigen::Index rectified_dim = 0;
  double l2_nocontrol = std::numeric_limits<double>::quiet_NaN();
  double l2_general = std::numeric_limits<double>::quiet_NaN();
  double l2_measured = std::numeric_limits<double>::quiet_NaN();
  // Abscissae with the rigid mode removed.
  double abscissa_nocontrol = std::numeric_limits<double>::quiet_NaN();
  double abscissa_general = std::numeric_limits<double>::quiet_NaN();
  double abscissa_measured = std::numeric_limits<double>::quiet_NaN();
  // Worst relative gap between the Lyapunov and simulated norms.
  double simulation_gap = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  std::string error;
};

struct OrderingSummary {
  bool general_beats_nocontrol = true;  // l2_general <= l2_nocontrol
  bool measured_beats_general = true;   // l2_measured <= l2_general + 1e-9
  bool gap_grows = false;               // general/measured larger at the last graph than the first
  double first_ratio = std::numeric_limits<double>::quiet_NaN();
  double last_ratio = std::numeric_limits<double>::quiet_NaN();

  bool all() const { return general_beats_nocontrol && measured_beats_general && gap_grows; }
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;

  bool complete() const {
    return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const BenchmarkRow& r) { return r.ok; });
  }

  OrderingSummary orderings() const {
    OrderingSummary s;
    if (!complete()) {
      s.general_beats_nocontrol = s.measured_beats_general = false;
      return s;
    }
    for (const BenchmarkRow& r : rows) {
      s.general_beats_nocontrol = s.general_beats_nocontrol && r.l2_general <= r.l2_nocontrol;
      s.measured_beats_general = s.measured_beats_general && r.l2_measured <= r.l2_general + 1e-9;
    }
    s.first_ratio = rows.front().l2_general / rows.front().l2_measured;
    s.last_ratio = rows.back().l2_general / rows.back().l2_measured;
    s.gap_grows = s.last_ratio > s.first_ratio;
    return s;
  }
};

/// One graph: the three closed loops and their L2 norms.
inline BenchmarkRow evaluate_graph(const NetworkSpec& spec, int graph, const SynthesisWeights& w,
                                   const BenchmarkOptions& opt) {
  BenchmarkRow row;
  row.graph = graph;
  try {
    const NetworkPartition P = build_partitioned_plant(spec, opt.synth.tol);
    row.dim_v = P.plant.m();
    const L2Options l2{.deflate_rigid = true};
    auto evaluate = [&](const StateSpace* K, ControllerInput input, double& abscissa, const char* what) {
      const Eigen::Index nk = K ? K->states() : 0;
      const MatrixXd Acl = closed_loop_matrix(P.plant, P.env, K, input);
      const MatrixXd C = P.frequency_output(nk);
      abscissa = l2_abscissa(Acl, C, l2);
      if (!(abscissa < -opt.stability_margin)) {
        std::ostringstream os;
        os << what << " closed loop not stable (abscissa " << abscissa << ")";
        throw RetrofitError(RetrofitError::Kind::kVerification, os.str());
      }
      const VectorXd x0 = P.initial_state(nk, opt.disturbed_node);
      const double J = l2_norm_response(Acl, C, x0, l2);
      if (opt.check_simulation) {
        const double sim = l2_norm_simulated(Acl, C, x0, l2);
        const double gap = std::abs(sim - J) / std::max(J, std::numeric_limits<double>::min());
        row.simulation_gap = std::isnan(row.simulation_gap) ? gap : std::max(row.simulation_gap, gap);
      }
      return J;
    };
    row.l2_nocontrol = evaluate(nullptr, ControllerInput::kOutput, row.abscissa_nocontrol, "uncontrolled");
    const RetrofitController general = synthesize_retrofit(P.plant, w, RetrofitMode::kGeneral, opt.synth);
    row.rectified_dim = general.rect.realization.outputs();
    row.l2_general = evaluate(&general.K, general.input(), row.abscissa_general, "general-mode");
    const RetrofitController measured = synthesize_retrofit(P.plant, w, RetrofitMode::kMeasured, opt.synth);
    row.l2_measured = evaluate(&measured.K, measured.input(), row.abscissa_measured, "measured-mode");
    row.ok = true;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

/// Runs the cut-edge sweep from `base`. Rows are independent and may be
/// evaluated concurrently; the result is ordered by graph index.
inline BenchmarkResult run_benchmark(const NetworkSpec& base, const SynthesisWeights& w,
                                     const BenchmarkOptions& opt = {}) {
  const std::vector<NetworkSpec> sweep = graph_sweep(base, opt.num_graphs);
  BenchmarkResult out;
  out.rows.resize(sweep.size());
  unsigned threads = opt.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opt.threads;
  threads = std::min<unsigned>(threads, static_cast<unsigned>(sweep.size()));
  if (threads <= 1) {
    for (std::size_t j = 0; j < sweep.size(); ++j) out.rows[j] = evaluate_graph(sweep[j], static_cast<int>(j + 1), w, opt);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> workers;
  for (unsigned t = 0; t < threads; ++t) {
    workers.push_back(std::async(std::launch::async, [&] {
      for (std::size_t j = next++; j < sweep.size(); j = next++) {
        out.rows[j] = evaluate_graph(sweep[j], static_cast<int>(j + 1), w, opt);
      }
    }));
  }
  for (auto& f : workers) f.get();
  return out;
}

inline std::string format_sig9(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

inline void write_benchmark_csv(const BenchmarkResult& r, std::ostream& os) {
  os << "graph,dim_v,l2_nocontrol,l2_retrofit_general,l2_retrofit_measured\n";
  for (const BenchmarkRow& row : r.rows) {
    os << row.graph << ',' << row.dim_v << ',' << format_sig9(row.l2_nocontrol) << ','
       << format_sig9(row.l2_general) << ',' << format_sig9(row.l2_measured) << '\n';
  }
}

}  // namespace retrofit
