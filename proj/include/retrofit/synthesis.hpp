#pragma once

// Internal-controller design (Riccati-based LQG), assembly of the retrofit
// controller K = Khat R, and the verification suite for the retrofit and
// output-rectifying conditions.

#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "retrofit/lti.hpp"
#include "retrofit/rectifier.hpp"

namespace retrofit {

// ---------------------------------------------------------------------------
// Riccati equations and LQG
// ---------------------------------------------------------------------------

namespace detail {

inline MatrixXd care_residual(const MatrixXd& A, const MatrixXd& S, const MatrixXd& Q, const MatrixXd& X) {
  return A.transpose() * X + X * A - X * S * X + Q;
}

inline void require_spd(const MatrixXd& M, const char* what) {
  if (M.rows() != M.cols() || (M - M.transpose()).norm() > 1e-10 * (1.0 + M.norm())) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, std::string(what) + " must be symmetric");
  }
  Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, std::string(what) + " must be positive definite");
  }
}

inline void require_psd(const MatrixXd& M, const char* what) {
  if (M.rows() != M.cols() || (M - M.transpose()).norm() > 1e-10 * (1.0 + M.norm())) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, std::string(what) + " must be symmetric");
  }
  if (M.rows() == 0) return;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
  if (es.eigenvalues().minCoeff() < -1e-10 * (1.0 + M.norm())) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, std::string(what) + " must be positive semidefinite");
  }
}

}  // namespace detail

/// Stabilizing solution of A^T X + X A - X B Rw^{-1} B^T X + Q = 0 from the
/// stable invariant subspace of the Hamiltonian, polished by Newton steps.
inline MatrixXd care_solve(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& Rw,
                           const ToleranceConfig& tol = {}) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Rw.rows() != B.cols()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "care_solve: dimension mismatch");
  }
  detail::require_psd(Q, "state weight");
  detail::require_spd(Rw, "input weight");
  if (n == 0) return MatrixXd(0, 0);
  const MatrixXd S = B * Rw.llt().solve(B.transpose());
  MatrixXd H(2 * n, 2 * n);
  H << A, -S, -Q, -A.transpose();
  const double hscale = std::max(1.0, H.norm());
  const auto sch = linalg::ordered_schur(H, [](cplx l) { return l.real() < 0.0; });
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    if (std::abs(sch.T(i, i).real()) <= 1e-10 * hscale) {
      std::ostringstream os;
      os << "no stabilizing Riccati solution: Hamiltonian eigenvalue " << sch.T(i, i)
         << " on the imaginary axis";
      throw RetrofitError(RetrofitError::Kind::kRiccati, os.str());
    }
  }
  if (sch.selected != n) {
    throw RetrofitError(RetrofitError::Kind::kRiccati, "no stabilizing Riccati solution: stable subspace has wrong dimension");
  }
  const MatrixXcd U11 = sch.U.topLeftCorner(n, n);
  const MatrixXcd U21 = sch.U.bottomLeftCorner(n, n);
  Eigen::PartialPivLU<MatrixXcd> lu(U11);
  const Eigen::JacobiSVD<MatrixXcd> svd(U11);
  if (svd.singularValues()(n - 1) <= 1e-12 * svd.singularValues()(0)) {
    throw RetrofitError(RetrofitError::Kind::kRiccati, "no stabilizing Riccati solution: U11 is singular");
  }
  MatrixXd X = (U21 * lu.inverse()).real();
  X = 0.5 * (X + X.transpose());

  double res = detail::care_residual(A, S, Q, X).norm();
  // Newton on the residual: Ac^T N + N Ac + Res(X) = 0, X <- X + N.
  for (int it = 0; it < 10 && res > 1e-12 * (1.0 + X.norm()); ++it) {
    const MatrixXd Ac = A - S * X;
    MatrixXd Xn;
    try {
      Xn = X + linalg::lyapunov(Ac, detail::care_residual(A, S, Q, X));
    } catch (const RetrofitError&) {
      break;
    }
    Xn = 0.5 * (Xn + Xn.transpose());
    const double rn = detail::care_residual(A, S, Q, Xn).norm();
    if (!(rn < res)) break;
    X = Xn;
    res = rn;
  }
  if (res > 1e-8 * (1.0 + X.norm())) {
    std::ostringstream os;
    os << "Riccati residual " << res << " exceeds 1e-8 (1 + ||X||)";
    throw RetrofitError(RetrofitError::Kind::kRiccati, os.str());
  }
  if (!linalg::is_hurwitz(A - S * X, 0.0)) {
    throw RetrofitError(RetrofitError::Kind::kRiccati, "Riccati solution is not stabilizing");
  }
  return X;
}

/// LQG weights. Each entry is a multiple of the identity unless an explicit
/// matrix is given; explicit matrices must match the design model.
struct SynthesisWeights {
  double state = 1.0;
  double input = 1.0;
  double process_noise = 1.0;
  double measurement_noise = 1.0;
  std::optional<MatrixXd> state_matrix;
  std::optional<MatrixXd> input_matrix;
  std::optional<MatrixXd> process_noise_matrix;
  std::optional<MatrixXd> measurement_noise_matrix;

  static MatrixXd pick(const std::optional<MatrixXd>& M, double scale, Eigen::Index n, const char* what) {
    if (!M) return scale * MatrixXd::Identity(n, n);
    if (M->rows() != n || M->cols() != n) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput,
                          std::string(what) + " weight must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    return *M;
  }
};

namespace detail {

inline std::string mode_message(const char* what, cplx lambda) {
  std::ostringstream os;
  os << what << " at eigenvalue " << lambda;
  return os.str();
}

}  // namespace detail

/// Observer-based controller for y = sys u in the positive-feedback
/// convention u = Khat y: u = -Kc xhat with a Kalman-type observer.
inline StateSpace lqg_controller_ss(const StateSpace& sys, const SynthesisWeights& w,
                                    const ToleranceConfig& tol = {}) {
  sys.validate();
  const Eigen::Index n = sys.states();
  const Eigen::Index q = sys.inputs();
  const Eigen::Index p = sys.outputs();
  if (const ModeDefect d = stabilizable(sys.A, sys.B, tol.eps_stab); !d.ok) {
    throw RetrofitError(RetrofitError::Kind::kStabilizability,
                        detail::mode_message("design model not stabilizable: uncontrollable mode", d.eigenvalue));
  }
  if (const ModeDefect d = detectable(sys.A, sys.C, tol.eps_stab); !d.ok) {
    throw RetrofitError(RetrofitError::Kind::kStabilizability,
                        detail::mode_message("design model not detectable: unobservable mode", d.eigenvalue));
  }
  if (n == 0) return StateSpace::gain(MatrixXd::Zero(q, p));
  const MatrixXd Qx = SynthesisWeights::pick(w.state_matrix, w.state, n, "state");
  const MatrixXd Ru = SynthesisWeights::pick(w.input_matrix, w.input, q, "input");
  const MatrixXd W = SynthesisWeights::pick(w.process_noise_matrix, w.process_noise, n, "process noise");
  const MatrixXd V = SynthesisWeights::pick(w.measurement_noise_matrix, w.measurement_noise, p, "measurement noise");
  const MatrixXd X = care_solve(sys.A, sys.B, Qx, Ru, tol);
  const MatrixXd Y = care_solve(sys.A.transpose(), sys.C.transpose(), W, V, tol);
  const MatrixXd Kc = Ru.llt().solve(sys.B.transpose() * X);
  const MatrixXd Lo = V.llt().solve(sys.C * Y).transpose();
  const MatrixXd Ak = sys.A - sys.B * Kc - Lo * sys.C + Lo * sys.D * Kc;
  return {Ak, Lo, -Kc, MatrixXd::Zero(q, p)};
}

inline TransferMatrix lqg_controller(const StateSpace& sys, const SynthesisWeights& w,
                                     const ToleranceConfig& tol = {}) {
  return ss_to_tf(minimal_realization(lqg_controller_ss(sys, w, tol)), tol);
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

struct OutputRectifyingReport {
  bool Q_stable = false;
  double QGyv_residual = 0.0;
  bool pass = false;
};

struct RetrofitReport {
  bool Q_stable = false;
  double GwuQGyv_residual = 0.0;
  bool pass = false;
};

struct Lemma3Report {
  bool Qhat_stable = false;
  bool QhatGGinv_stable = false;
  bool pass = false;
  bool theorem1_applies = false;       // Gybar minimum phase
  std::optional<bool> theorem2_holds;  // Khat stabilizes the normal-form realization
};

struct VerificationReport {
  OutputRectifyingReport output_rectifying;
  RetrofitReport retrofit;
  Lemma3Report lemma3;
  double invariance_residual = 0.0;  // sampled ||M_wv - G_wv|| relative
};

namespace detail {

// Blocks of the plant as seen by the controller: y alone, or (y, v).
struct ControllerView {
  StateSpace yu;
  StateSpace yv;
};

inline ControllerView controller_view(const PartitionedPlant& G, ControllerInput input) {
  if (input == ControllerInput::kOutput) return {G.gyu_ss(), G.gyv_ss()};
  const Eigen::Index m = G.m();
  const MatrixXd C = linalg::vstack(G.C(), MatrixXd::Zero(m, G.n()));
  MatrixXd Dv = MatrixXd::Zero(G.p() + m, m);
  Dv.bottomRows(m) = MatrixXd::Identity(m, m);
  return {{G.A(), G.B(), C, MatrixXd::Zero(G.p() + m, G.q())}, {G.A(), G.L(), C, Dv}};
}

inline double rel_product_residual(const MatrixXcd& prod, const MatrixXcd& a, const MatrixXcd& b) {
  const double scale = a.norm() * b.norm();
  return scale > 0.0 ? prod.norm() / scale : 0.0;
}

}  // namespace detail

/// Output-rectifying check: Q = (I - K Gyu)^{-1} K stable and Q Gyv = 0 at
/// sampled frequencies (relative to ||Q|| ||Gyv||).
inline OutputRectifyingReport verify_output_rectifying(const PartitionedPlant& G, const StateSpace& K,
                                                       ControllerInput input = ControllerInput::kOutput,
                                                       const ToleranceConfig& tol = {}, std::uint64_t seed = 1) {
  const detail::ControllerView view = detail::controller_view(G, input);
  const StateSpace Q = youla_loop(view.yu, K);
  OutputRectifyingReport r;
  r.Q_stable = tf_is_stable(Q, tol.eps_stab);
  for (const cplx s : imag_axis_points(20, seed)) {
    const MatrixXcd q = Q.eval(s);
    const MatrixXcd g = view.yv.eval(s);
    r.QGyv_residual = std::max(r.QGyv_residual, detail::rel_product_residual(q * g, q, g));
  }
  r.pass = r.Q_stable && r.QGyv_residual <= tol.residual_tol;
  return r;
}

/// Rational counterpart for controllers acting on y.
inline OutputRectifyingReport verify_output_rectifying(const PartitionedPlant& G, const TransferMatrix& K,
                                                       const ToleranceConfig& tol = {}, std::uint64_t seed = 1) {
  const TransferMatrix Gyv = G.Gyv(tol);
  OutputRectifyingReport r;
  if (K.is_zero()) {
    r.Q_stable = true;
    r.pass = true;
    return r;
  }
  const TransferMatrix Q = youla_parameter(K, G.Gyu(tol), tol);
  r.Q_stable = Q.is_stable(tol.eps_stab);
  for (const cplx s : imag_axis_points(20, seed)) {
    const MatrixXcd q = Q.eval(s);
    const MatrixXcd g = Gyv.eval(s);
    r.QGyv_residual = std::max(r.QGyv_residual, detail::rel_product_residual(q * g, q, g));
  }
  r.pass = r.Q_stable && r.QGyv_residual <= tol.residual_tol;
  return r;
}

/// Retrofit condition: Q stable and Gwu Q Gyv = 0.
inline RetrofitReport verify_retrofit_general(const PartitionedPlant& G, const StateSpace& K,
                                              ControllerInput input = ControllerInput::kOutput,
                                              const ToleranceConfig& tol = {}, std::uint64_t seed = 1) {
  const detail::ControllerView view = detail::controller_view(G, input);
  const StateSpace Q = youla_loop(view.yu, K);
  const StateSpace gwu = G.gwu_ss();
  RetrofitReport r;
  r.Q_stable = tf_is_stable(Q, tol.eps_stab);
  for (const cplx s : imag_axis_points(20, seed)) {
    const MatrixXcd a = gwu.eval(s);
    const MatrixXcd q = Q.eval(s);
    const MatrixXcd g = view.yv.eval(s);
    const double scale = a.norm() * q.norm() * g.norm();
    if (scale > 0.0) r.GwuQGyv_residual = std::max(r.GwuQGyv_residual, (a * q * g).norm() / scale);
  }
  r.pass = r.Q_stable && r.GwuQGyv_residual <= tol.residual_tol;
  return r;
}

inline RetrofitReport verify_retrofit_general(const PartitionedPlant& G, const TransferMatrix& K,
                                              const ToleranceConfig& tol = {}, std::uint64_t seed = 1) {
  RetrofitReport r;
  if (K.is_zero()) {
    r.Q_stable = true;
    r.pass = true;
    return r;
  }
  const TransferMatrix Q = youla_parameter(K, G.Gyu(tol), tol);
  const TransferMatrix Gwu = G.Gwu(tol);
  const TransferMatrix Gyv = G.Gyv(tol);
  r.Q_stable = Q.is_stable(tol.eps_stab);
  for (const cplx s : imag_axis_points(20, seed)) {
    const MatrixXcd a = Gwu.eval(s);
    const MatrixXcd q = Q.eval(s);
    const MatrixXcd g = Gyv.eval(s);
    const double scale = a.norm() * q.norm() * g.norm();
    if (scale > 0.0) r.GwuQGyv_residual = std::max(r.GwuQGyv_residual, (a * q * g).norm() / scale);
  }
  r.pass = r.Q_stable && r.GwuQGyv_residual <= tol.residual_tol;
  return r;
}

/// Conditions on Khat alone: Qhat = (I - Khat R Gyu)^{-1} Khat stable and,
/// in the general case, Qhat G_sel Gybar^{-1} stable. `design` is the
/// normal-form realization Khat was designed on, if any.
inline Lemma3Report verify_lemma3(const PartitionedPlant& G, const StateSpace& Khat, const Rectifier& rect,
                                  const StateSpace* design = nullptr, const ToleranceConfig& tol = {}) {
  Lemma3Report r;
  const StateSpace Qhat = youla_loop(rectified_plant_ss(G, rect), Khat);
  r.Qhat_stable = tf_is_stable(Qhat, tol.eps_stab);
  if (rect.measured) {
    // Gyv is stable, so the second condition holds automatically.
    r.QhatGGinv_stable = true;
    r.theorem1_applies = true;
  } else {
    if (!rect.h_realization) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput, "rectifier has no realization of H");
    }
    r.QhatGGinv_stable = tf_is_stable(series(*rect.h_realization, Qhat), tol.eps_stab);
    if (rect.gybar_v) {
      r.theorem1_applies = is_minimum_phase(*rect.gybar_v, tol);
    } else if (rect.normal_form) {
      // Zeros of Gybar are eigenvalues of A_zz.
      r.theorem1_applies = linalg::is_hurwitz(rect.normal_form->A_zz, tol.eps_stab);
    }
  }
  if (design) r.theorem2_holds = linalg::is_hurwitz(youla_loop(*design, Khat).A, tol.eps_stab);
  r.pass = r.Qhat_stable && r.QhatGGinv_stable;
  return r;
}

/// Sampled ||M_wv(s) - G_wv(s)|| relative to the size of the terms involved.
inline double invariance_residual(const PartitionedPlant& G, const StateSpace& K, ControllerInput input,
                                  std::uint64_t seed = 1) {
  const detail::ControllerView view = detail::controller_view(G, input);
  const StateSpace Q = youla_loop(view.yu, K);
  const StateSpace gwv = G.gwv_ss();
  const StateSpace gwu = G.gwu_ss();
  // M_wv = G_wv + G_wu Q G_yv, assembled in state space.
  const StateSpace mwv = parallel(gwv, series(series(view.yv, Q), gwu));
  double worst = 0.0;
  for (const cplx s : imag_axis_points(20, seed)) {
    const MatrixXcd g = gwv.eval(s);
    const double scale = g.norm() + gwu.eval(s).norm() * Q.eval(s).norm() * view.yv.eval(s).norm();
    if (scale > 0.0) worst = std::max(worst, (mwv.eval(s) - g).norm() / scale);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Algorithm assembly
// ---------------------------------------------------------------------------

enum class RetrofitMode { kMeasured, kGeneral };

inline const char* to_string(RetrofitMode mode) {
  return mode == RetrofitMode::kMeasured ? "measured" : "general";
}

enum class SynthesisRoute {
  kAuto,      // rational forms only for small plants
  kRational,  // always compute rational forms
  kStateSpace,
};

struct SynthesisOptions {
  ToleranceConfig tol;
  std::uint64_t seed = 0x5eed;
  SynthesisRoute route = SynthesisRoute::kAuto;
  bool exhaustive_partitions = false;
  int rational_state_limit = 12;  // kAuto: rational forms when the controller is this small
};

struct RetrofitController {
  RetrofitMode mode = RetrofitMode::kGeneral;
  Rectifier rect;
  std::optional<PartitionResult> partition;
  StateSpace design_model;  // what Khat was designed on
  bool design_is_normal_form = false;
  StateSpace Khat;          // input yhat, output u
  StateSpace K;             // input y (or (y, v) when measured), output u
  VerificationReport verification;

  // Rational forms, when requested and small enough.
  std::optional<TransferMatrix> Khat_tf;
  std::optional<TransferMatrix> K_tf;

  ControllerInput input() const {
    return mode == RetrofitMode::kMeasured ? ControllerInput::kOutputAndInteraction : ControllerInput::kOutput;
  }
};

namespace detail {

// Designs Khat on `model`; if the model carries uncontrollable or
// unobservable unstable modes, retries on its minimal realization.
inline StateSpace design_internal(StateSpace& model, const SynthesisWeights& w, const ToleranceConfig& tol,
                                  bool& reduced) {
  reduced = false;
  try {
    return lqg_controller_ss(model, w, tol);
  } catch (const RetrofitError& e) {
    if (e.kind() != RetrofitError::Kind::kStabilizability) throw;
    const bool custom = w.state_matrix || w.process_noise_matrix;
    if (custom) throw;
    model = minimal_realization(model);
    reduced = true;
    return lqg_controller_ss(model, w, tol);
  }
}

}  // namespace detail

inline VerificationReport verify_controller(const PartitionedPlant& G, const RetrofitController& c,
                                            const ToleranceConfig& tol, std::uint64_t seed = 1) {
  VerificationReport v;
  v.output_rectifying = verify_output_rectifying(G, c.K, c.input(), tol, seed);
  v.retrofit = verify_retrofit_general(G, c.K, c.input(), tol, seed);
  v.lemma3 = verify_lemma3(G, c.Khat, c.rect, c.design_is_normal_form ? &c.design_model : nullptr, tol);
  v.invariance_residual = invariance_residual(G, c.K, c.input(), seed);
  return v;
}

/// Retrofit controller synthesis: partition, rectifier, LQG design of Khat on
/// the rectified plant, K = Khat R, then post-verification.
inline RetrofitController synthesize_retrofit(const PartitionedPlant& G, const SynthesisWeights& w,
                                              RetrofitMode mode, const SynthesisOptions& opt = {}) {
  const ToleranceConfig& tol = opt.tol;
  try {
    tol.validate();
  } catch (const std::invalid_argument& e) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, e.what());
  }
  if (!G.is_stable(tol.eps_stab)) {
    std::ostringstream os;
    os << "Assumption 1 violated: G is not stable (spectral abscissa " << linalg::spectral_abscissa(G.A())
       << ")";
    throw RetrofitError(RetrofitError::Kind::kAssumption1, os.str());
  }
  const bool rational = opt.route == SynthesisRoute::kRational ||
                        (opt.route == SynthesisRoute::kAuto && 2 * G.n() <= opt.rational_state_limit);

  RetrofitController c;
  c.mode = mode;
  if (mode == RetrofitMode::kMeasured) {
    c.rect = build_rectifier_measured(G, tol, rational);
    c.design_model = G.gyu_ss();
  } else {
    const Assumption2Report a2 = check_assumption2(G, opt.seed, tol.eps_rank);
    if (!a2.ok) throw RetrofitError(RetrofitError::Kind::kAssumption2, "Assumption 2 violated: " + a2.reason);
    PartitionOptions popt;
    popt.seed = opt.seed;
    popt.exhaustive = opt.exhaustive_partitions;
    popt.tol = tol;
    c.partition = select_partition(G, popt);
    const OutputPartition& part = c.partition->partition;
    c.rect = rational ? build_rectifier(G, part, tol) : build_rectifier_ss(G, part, tol);
    if (c.rect.normal_form) {
      try {
        c.design_model = realize_rectified_plant_nf_ss(*c.rect.normal_form, tol);
        c.design_is_normal_form = true;
      } catch (const RetrofitError& e) {
        if (e.kind() != RetrofitError::Kind::kNumerical) throw;
      }
    }
    if (!c.design_is_normal_form) c.design_model = minimal_realization(rectified_plant_ss(G, c.rect));
  }

  bool reduced = false;
  c.Khat = detail::design_internal(c.design_model, w, tol, reduced);
  if (reduced) c.design_is_normal_form = false;
  c.K = series(c.rect.realization, c.Khat);

  c.verification = verify_controller(G, c, tol, opt.seed);
  if (!c.verification.output_rectifying.pass) {
    std::ostringstream os;
    os << "synthesis produced non-retrofit controller: Q stable = " << std::boolalpha
       << c.verification.output_rectifying.Q_stable
       << ", max ||Q Gyv|| residual = " << c.verification.output_rectifying.QGyv_residual;
    throw RetrofitError(RetrofitError::Kind::kVerification, os.str());
  }

  if (rational && c.rect.R) {
    c.Khat_tf = ss_to_tf(minimal_realization(c.Khat), tol);
    c.K_tf = TransferMatrix::mul(*c.Khat_tf, *c.rect.R, tol);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Environments
// ---------------------------------------------------------------------------

struct EnvironmentSample {
  Environment env;
  int draws = 0;  // attempts including the accepted one
};

/// Draws random stable environments w -> v (state dimension <= max_states,
/// eigenvalues left of -0.1, gain scaled by 1/(1 + ||L|| ||Gamma||)) until one
/// leaves the interconnection with G internally stable.
inline EnvironmentSample random_admissible_environment(const PartitionedPlant& G, std::mt19937_64& rng,
                                                       int max_states = 4, double eps_stab = 1e-9) {
  if (!G.is_stable(eps_stab)) {
    throw RetrofitError(RetrofitError::Kind::kAssumption1, "Assumption 1 violated: G is not stable");
  }
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto gaussian = [&](Eigen::Index r, Eigen::Index c) { return MatrixXd(MatrixXd::NullaryExpr(r, c, [&] { return g(rng); })); };
  const Eigen::Index m = G.m();
  const Eigen::Index wd = G.w_dim();
  const double scale = 1.0 / (1.0 + G.L().norm() * G.Gamma().norm());
  for (int draw = 1; draw <= 1000; ++draw) {
    const auto ne = std::uniform_int_distribution<Eigen::Index>(0, max_states)(rng);
    MatrixXd A = gaussian(ne, ne) / std::sqrt(static_cast<double>(std::max<Eigen::Index>(ne, 1)));
    if (ne > 0) A -= (linalg::spectral_abscissa(A) + 0.1 + u(rng)) * MatrixXd::Identity(ne, ne);
    const StateSpace E(A, gaussian(ne, wd), scale * gaussian(m, ne), scale * gaussian(m, wd));
    Environment env{E};
    if (preexisting_internally_stable(G, env, eps_stab)) return {env, draw};
  }
  throw RetrofitError(RetrofitError::Kind::kNumerical,
                      "no admissible environment after 1000 draws (plant pathologically sensitive)");
}

inline EnvironmentSample random_admissible_environment(const PartitionedPlant& G, std::uint64_t seed,
                                                       int max_states = 4, double eps_stab = 1e-9) {
  std::mt19937_64 rng(seed);
  return random_admissible_environment(G, rng, max_states, eps_stab);
}

/// Max real part of the plant + environment + controller closed loop.
inline double retrofit_closed_loop_abscissa(const PartitionedPlant& G, const Environment& env,
                                            const RetrofitController& c) {
  return linalg::spectral_abscissa(closed_loop_matrix(G, env, &c.K, c.input()));
}

}  // namespace retrofit
