#pragma once

#include <string>

#include "retrofit/linalg.hpp"
#include "retrofit/state_space.hpp"
#include "retrofit/transfer_matrix.hpp"

namespace retrofit {

/// Subsystem of interest
///   x' = A x + L v + B u,   w = Gamma x,   y = C x
/// with interaction input v (m), interaction output w, control input u (q)
/// and measurement y (p).
class PartitionedPlant {
 public:
  PartitionedPlant() = default;

  PartitionedPlant(MatrixXd A, MatrixXd L, MatrixXd B, MatrixXd Gamma, MatrixXd C)
      : A_(std::move(A)), L_(std::move(L)), B_(std::move(B)), Gamma_(std::move(Gamma)),
        C_(std::move(C)) {
    const Eigen::Index n = A_.rows();
    auto fail = [](const std::string& what) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput, "inconsistent plant: " + what);
    };
    if (A_.cols() != n) fail("A must be square");
    if (L_.rows() != n) fail("L must have as many rows as A");
    if (B_.rows() != n) fail("B must have as many rows as A");
    if (Gamma_.cols() != n) fail("Gamma must have as many columns as A");
    if (C_.cols() != n) fail("C must have as many columns as A");
  }

  const MatrixXd& A() const { return A_; }
  const MatrixXd& L() const { return L_; }
  const MatrixXd& B() const { return B_; }
  const MatrixXd& Gamma() const { return Gamma_; }
  const MatrixXd& C() const { return C_; }

  Eigen::Index n() const { return A_.rows(); }
  Eigen::Index m() const { return L_.cols(); }
  Eigen::Index q() const { return B_.cols(); }
  Eigen::Index p() const { return C_.rows(); }
  Eigen::Index w_dim() const { return Gamma_.rows(); }

  StateSpace gwv_ss() const { return {A_, L_, Gamma_, MatrixXd::Zero(w_dim(), m())}; }
  StateSpace gwu_ss() const { return {A_, B_, Gamma_, MatrixXd::Zero(w_dim(), q())}; }
  StateSpace gyv_ss() const { return {A_, L_, C_, MatrixXd::Zero(p(), m())}; }
  StateSpace gyu_ss() const { return {A_, B_, C_, MatrixXd::Zero(p(), q())}; }

  TransferMatrix Gwv(const ToleranceConfig& tol = {}) const { return ss_to_tf(gwv_ss(), tol); }
  TransferMatrix Gwu(const ToleranceConfig& tol = {}) const { return ss_to_tf(gwu_ss(), tol); }
  TransferMatrix Gyv(const ToleranceConfig& tol = {}) const { return ss_to_tf(gyv_ss(), tol); }
  TransferMatrix Gyu(const ToleranceConfig& tol = {}) const { return ss_to_tf(gyu_ss(), tol); }

  /// Assumption 1: every eigenvalue of A in the open left half plane.
  bool is_stable(double eps_stab = 1e-9) const { return linalg::is_hurwitz(A_, eps_stab); }

 private:
  MatrixXd A_{0, 0};
  MatrixXd L_{0, 0};
  MatrixXd B_{0, 0};
  MatrixXd Gamma_{0, 0};
  MatrixXd C_{0, 0};
};

/// Environment v = Gbar w, given by a proper realization.
struct Environment {
  StateSpace realization;

  static Environment zero(Eigen::Index w_dim, Eigen::Index m) {
    return {StateSpace::gain(MatrixXd::Zero(m, w_dim))};
  }
};

// ---------------------------------------------------------------------------
// Frequency-domain (rational) operations
// ---------------------------------------------------------------------------

/// Q = (I - K Gyu)^{-1} K.
inline TransferMatrix youla_parameter(const TransferMatrix& K, const TransferMatrix& Gyu,
                                      const ToleranceConfig& tol = {}) {
  if (K.cols() != Gyu.rows() || K.rows() != Gyu.cols()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "youla_parameter: dimension mismatch");
  }
  const TransferMatrix IminusKG =
      TransferMatrix::add(TransferMatrix::identity(K.rows()),
                          -TransferMatrix::mul(K, Gyu, tol), tol);
  TransferMatrix inv;
  try {
    inv = IminusKG.inverse(tol);
  } catch (const RetrofitError&) {
    throw RetrofitError(RetrofitError::Kind::kIllPosed, "ill-posed loop: I - K Gyu is singular");
  }
  return TransferMatrix::mul(inv, K, tol);
}

/// Inverse map K = Q (I + Gyu Q)^{-1}.
inline TransferMatrix controller_from_youla(const TransferMatrix& Q, const TransferMatrix& Gyu,
                                            const ToleranceConfig& tol = {}) {
  const TransferMatrix IplusGQ =
      TransferMatrix::add(TransferMatrix::identity(Gyu.rows()), TransferMatrix::mul(Gyu, Q, tol), tol);
  TransferMatrix inv;
  try {
    inv = IplusGQ.inverse(tol);
  } catch (const RetrofitError&) {
    throw RetrofitError(RetrofitError::Kind::kIllPosed, "ill-posed loop: I + Gyu Q is singular");
  }
  return TransferMatrix::mul(Q, inv, tol);
}

/// The four closed-loop maps of the loop u = K y, y = G u.
struct GangOfFour {
  TransferMatrix inv_KG_K;   // (I - KG)^{-1} K
  TransferMatrix inv_KG;     // (I - KG)^{-1}
  TransferMatrix G_inv_KG;   // G (I - KG)^{-1}
  TransferMatrix inv_GK;     // (I - GK)^{-1}
};

inline GangOfFour gang_of_four(const TransferMatrix& G, const TransferMatrix& K,
                               const ToleranceConfig& tol = {}) {
  GangOfFour g;
  try {
    g.inv_KG = TransferMatrix::add(TransferMatrix::identity(K.rows()),
                                   -TransferMatrix::mul(K, G, tol), tol)
                   .inverse(tol);
    g.inv_GK = TransferMatrix::add(TransferMatrix::identity(G.rows()),
                                   -TransferMatrix::mul(G, K, tol), tol)
                   .inverse(tol);
  } catch (const RetrofitError&) {
    throw RetrofitError(RetrofitError::Kind::kIllPosed, "ill-posed loop");
  }
  g.inv_KG_K = TransferMatrix::mul(g.inv_KG, K, tol);
  g.G_inv_KG = TransferMatrix::mul(G, g.inv_KG, tol);
  return g;
}

inline bool internal_stability(const TransferMatrix& G, const TransferMatrix& K,
                               const ToleranceConfig& tol = {}) {
  const GangOfFour g = gang_of_four(G, K, tol);
  return g.inv_KG_K.is_stable(tol.eps_stab) && g.inv_KG.is_stable(tol.eps_stab) &&
         g.G_inv_KG.is_stable(tol.eps_stab) && g.inv_GK.is_stable(tol.eps_stab);
}

/// M_wv = G_wv + G_wu (I - K G_yu)^{-1} K G_yv.
inline TransferMatrix closed_loop_Mwv(const PartitionedPlant& G, const TransferMatrix& K,
                                      const ToleranceConfig& tol = {}) {
  const TransferMatrix Gwv = G.Gwv(tol);
  if (K.is_zero()) return Gwv;
  const TransferMatrix Q = youla_parameter(K, G.Gyu(tol), tol);
  return TransferMatrix::add(
      Gwv, TransferMatrix::mul(TransferMatrix::mul(G.Gwu(tol), Q, tol), G.Gyv(tol), tol), tol);
}

// ---------------------------------------------------------------------------
// State-space interconnections
// ---------------------------------------------------------------------------

/// Closed-loop map v -> w with u = K y (state order: plant, controller).
inline StateSpace closed_loop_Mwv_ss(const PartitionedPlant& G, const StateSpace& K) {
  if (K.inputs() != G.p() || K.outputs() != G.q()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "controller dimensions do not match plant");
  }
  const Eigen::Index n = G.n();
  const Eigen::Index nk = K.states();
  MatrixXd A(n + nk, n + nk);
  A.topLeftCorner(n, n) = G.A() + G.B() * K.D * G.C();
  A.topRightCorner(n, nk) = G.B() * K.C;
  A.bottomLeftCorner(nk, n) = K.B * G.C();
  A.bottomRightCorner(nk, nk) = K.A;
  MatrixXd B = MatrixXd::Zero(n + nk, G.m());
  B.topRows(n) = G.L();
  MatrixXd C = MatrixXd::Zero(G.w_dim(), n + nk);
  C.leftCols(n) = G.Gamma();
  return {A, B, C, MatrixXd::Zero(G.w_dim(), G.m())};
}

/// What the controller measures: y only, or the stacked (y, v).
enum class ControllerInput { kOutput, kOutputAndInteraction };

/// State matrix of plant + environment + controller, state order
/// (x, x_env, x_K). `K` may be empty (no controller).
inline MatrixXd closed_loop_matrix(const PartitionedPlant& G, const Environment& env,
                                   const StateSpace* K, ControllerInput input) {
  const StateSpace& E = env.realization;
  if (E.inputs() != G.w_dim() || E.outputs() != G.m()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "environment dimensions do not match plant");
  }
  const Eigen::Index n = G.n();
  const Eigen::Index ne = E.states();
  const Eigen::Index nk = K ? K->states() : 0;
  MatrixXd Acl = MatrixXd::Zero(n + ne + nk, n + ne + nk);
  // v = Ce xe + De Gamma x
  const MatrixXd v_x = E.D * G.Gamma();
  const MatrixXd& v_e = E.C;
  Acl.block(0, 0, n, n) = G.A() + G.L() * v_x;
  Acl.block(0, n, n, ne) = G.L() * v_e;
  Acl.block(n, 0, ne, n) = E.B * G.Gamma();
  Acl.block(n, n, ne, ne) = E.A;
  if (K) {
    MatrixXd in_x;
    MatrixXd in_e;
    if (input == ControllerInput::kOutput) {
      in_x = G.C();
      in_e = MatrixXd::Zero(G.p(), ne);
    } else {
      in_x = linalg::vstack(G.C(), v_x);
      in_e = linalg::vstack(MatrixXd::Zero(G.p(), ne), v_e);
    }
    if (K->inputs() != in_x.rows() || K->outputs() != G.q()) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput, "controller dimensions do not match plant");
    }
    Acl.block(0, 0, n, n) += G.B() * K->D * in_x;
    Acl.block(0, n, n, ne) += G.B() * K->D * in_e;
    Acl.block(0, n + ne, n, nk) = G.B() * K->C;
    Acl.block(n + ne, 0, nk, n) = K->B * in_x;
    Acl.block(n + ne, n, nk, ne) = K->B * in_e;
    Acl.block(n + ne, n + ne, nk, nk) = K->A;
  }
  return Acl;
}

/// Internal stability of the interconnection of G with the environment; this
/// decides membership of the environment in the admissible set.
inline bool preexisting_internally_stable(const PartitionedPlant& G, const Environment& env,
                                          double eps_stab = 1e-9) {
  return linalg::is_hurwitz(closed_loop_matrix(G, env, nullptr, ControllerInput::kOutput), eps_stab);
}

}  // namespace retrofit
