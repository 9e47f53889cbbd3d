#pragma once

#include <string>
#include <vector>

#include "retrofit/linalg.hpp"
#include "retrofit/ratpoly.hpp"
#include "retrofit/transfer_matrix.hpp"

namespace retrofit {

/// Continuous-time realization x' = Ax + Bu, y = Cx + Du. n = 0 encodes a
/// static gain D.
struct StateSpace {
  MatrixXd A;
  MatrixXd B;
  MatrixXd C;
  MatrixXd D;

  StateSpace() : A(0, 0), B(0, 0), C(0, 0), D(0, 0) {}

  StateSpace(MatrixXd a, MatrixXd b, MatrixXd c, MatrixXd d)
      : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
    validate();
  }

  static StateSpace gain(const MatrixXd& d) {
    return {MatrixXd(0, 0), MatrixXd(0, d.cols()), MatrixXd(d.rows(), 0), d};
  }

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return D.cols(); }
  Eigen::Index outputs() const { return D.rows(); }

  void validate() const {
    const Eigen::Index n = A.rows();
    if (A.cols() != n || B.rows() != n || C.cols() != n || D.rows() != C.rows() ||
        D.cols() != B.cols()) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput,
                          "state-space dimensions are inconsistent: A " + dims(A) + ", B " +
                              dims(B) + ", C " + dims(C) + ", D " + dims(D));
    }
  }

  MatrixXcd eval(cplx s) const {
    MatrixXcd out = D.cast<cplx>();
    if (states() == 0) return out;
    MatrixXcd M = -A.cast<cplx>();
    M.diagonal().array() += s;
    Eigen::PartialPivLU<MatrixXcd> lu(M);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14)) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput, "evaluation at a pole");
    }
    out += C.cast<cplx>() * lu.solve(B.cast<cplx>());
    return out;
  }

 private:
  static std::string dims(const MatrixXd& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
  }
};

// ---------------------------------------------------------------------------
// Interconnections
// ---------------------------------------------------------------------------

/// second * first: u -> first -> second -> y.
inline StateSpace series(const StateSpace& first, const StateSpace& second) {
  if (first.outputs() != second.inputs()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "series: dimension mismatch");
  }
  const Eigen::Index n1 = first.states();
  const Eigen::Index n2 = second.states();
  MatrixXd A = MatrixXd::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = first.A;
  A.bottomLeftCorner(n2, n1) = second.B * first.C;
  A.bottomRightCorner(n2, n2) = second.A;
  MatrixXd B(n1 + n2, first.inputs());
  B.topRows(n1) = first.B;
  B.bottomRows(n2) = second.B * first.D;
  MatrixXd C(second.outputs(), n1 + n2);
  C.leftCols(n1) = second.D * first.C;
  C.rightCols(n2) = second.C;
  return {A, B, C, second.D * first.D};
}

/// a + b (same input and output dimensions).
inline StateSpace parallel(const StateSpace& a, const StateSpace& b) {
  if (a.inputs() != b.inputs() || a.outputs() != b.outputs()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "parallel: dimension mismatch");
  }
  return {linalg::block_diag(a.A, b.A), linalg::vstack(a.B, b.B), linalg::hstack(a.C, b.C),
          a.D + b.D};
}

inline StateSpace scaled_output(const StateSpace& sys, const MatrixXd& M) {
  return {sys.A, sys.B, M * sys.C, M * sys.D};
}

inline StateSpace scaled_input(const StateSpace& sys, const MatrixXd& M) {
  return {sys.A, sys.B * M, sys.C, sys.D * M};
}

/// [a b]: y = a u1 + b u2.
inline StateSpace hconcat(const StateSpace& a, const StateSpace& b) {
  if (a.outputs() != b.outputs()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "hconcat: output dimension mismatch");
  }
  return {linalg::block_diag(a.A, b.A), linalg::block_diag(a.B, b.B), linalg::hstack(a.C, b.C),
          linalg::hstack(a.D, b.D)};
}

/// [a; b]: shared input.
inline StateSpace vconcat(const StateSpace& a, const StateSpace& b) {
  if (a.inputs() != b.inputs()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "vconcat: input dimension mismatch");
  }
  return {linalg::block_diag(a.A, b.A), linalg::vstack(a.B, b.B), linalg::block_diag(a.C, b.C),
          linalg::vstack(a.D, b.D)};
}

/// Realization of Q = (I - K P)^{-1} K for the positive-feedback loop u = K y,
/// y = P u. Input: signal added to the measurement; output: u.
inline StateSpace youla_loop(const StateSpace& P, const StateSpace& K) {
  if (K.inputs() != P.outputs() || K.outputs() != P.inputs()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "youla_loop: dimension mismatch");
  }
  const Eigen::Index q = P.inputs();
  const MatrixXd IminusDkDp = MatrixXd::Identity(q, q) - K.D * P.D;
  Eigen::FullPivLU<MatrixXd> lu(IminusDkDp);
  if (!lu.isInvertible()) {
    throw RetrofitError(RetrofitError::Kind::kIllPosed, "ill-posed loop: I - Dk Dp is singular");
  }
  const MatrixXd E = lu.inverse();
  const Eigen::Index np = P.states();
  const Eigen::Index nk = K.states();
  const Eigen::Index p = P.outputs();
  const MatrixXd Cu_p = E * K.D * P.C;
  const MatrixXd Cu_k = E * K.C;
  const MatrixXd Du = E * K.D;
  const MatrixXd Cy_p = P.C + P.D * Cu_p;
  const MatrixXd Cy_k = P.D * Cu_k;
  const MatrixXd Dy = MatrixXd::Identity(p, p) + P.D * Du;
  MatrixXd A(np + nk, np + nk);
  A.topLeftCorner(np, np) = P.A + P.B * Cu_p;
  A.topRightCorner(np, nk) = P.B * Cu_k;
  A.bottomLeftCorner(nk, np) = K.B * Cy_p;
  A.bottomRightCorner(nk, nk) = K.A + K.B * Cy_k;
  MatrixXd B(np + nk, p);
  B.topRows(np) = P.B * Du;
  B.bottomRows(nk) = K.B * Dy;
  MatrixXd C(q, np + nk);
  C.leftCols(np) = Cu_p;
  C.rightCols(nk) = Cu_k;
  return {A, B, C, Du};
}

// ---------------------------------------------------------------------------
// Conversions
// ---------------------------------------------------------------------------

/// C (sI - A)^{-1} B + D entrywise. Numerators come from the
/// Leverrier-Faddeev adjugate recursion; the common denominator's roots are
/// the eigenvalues of A.
inline TransferMatrix ss_to_tf(const StateSpace& sys, const ToleranceConfig& tol = {}) {
  const Eigen::Index n = sys.states();
  const Eigen::Index p = sys.outputs();
  const Eigen::Index q = sys.inputs();
  TransferMatrix T(p, q);
  if (n == 0) return TransferMatrix::constant(sys.D);

  // adj(sI - A) = sum_{k=1}^{n} M_k s^{n-k}; charpoly = sum c_i s^i.
  std::vector<MatrixXd> M(static_cast<std::size_t>(n + 1));
  std::vector<double> c(static_cast<std::size_t>(n + 1), 0.0);
  c[static_cast<std::size_t>(n)] = 1.0;
  MatrixXd prev = MatrixXd::Zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    MatrixXd Mk = sys.A * prev;
    Mk.diagonal().array() += c[static_cast<std::size_t>(n - k + 1)];
    c[static_cast<std::size_t>(n - k)] = -(sys.A * Mk).trace() / static_cast<double>(k);
    M[static_cast<std::size_t>(k)] = Mk;
    prev = Mk;
  }
  const VectorXcd ev = linalg::eigenvalues(sys.A);
  const RootList poles(ev.data(), ev.data() + ev.size());
  double cmax = 0.0;
  for (double v : c) cmax = std::max(cmax, std::abs(v));

  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) {
      std::vector<double> num(static_cast<std::size_t>(n + 1), 0.0);
      double scale = std::abs(sys.D(i, j)) * cmax;
      for (Eigen::Index k = 1; k <= n; ++k) {
        const double v = sys.C.row(i) * M[static_cast<std::size_t>(k)] * sys.B.col(j);
        num[static_cast<std::size_t>(n - k)] += v;
        scale = std::max(scale, sys.C.row(i).norm() * M[static_cast<std::size_t>(k)].norm() *
                                    sys.B.col(j).norm());
      }
      for (Eigen::Index d = 0; d <= n; ++d)
        num[static_cast<std::size_t>(d)] += sys.D(i, j) * c[static_cast<std::size_t>(d)];
      while (!num.empty() && std::abs(num.back()) <= tol.eps_trim * scale) num.pop_back();
      if (num.empty()) continue;
      const Polynomial np(std::move(num), 0.0);
      T(i, j) = RationalFunction::from_zpk(np.leading(), poly_roots(np), poles, tol);
    }
  }
  return T;
}

/// Per-column controllable canonical realization over each column's least
/// common denominator. Not minimal in general.
inline StateSpace tf_to_ss(const TransferMatrix& T, const ToleranceConfig& tol = {}) {
  if (!T.is_proper()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput,
                        "not realizable in standard state space: transfer matrix is improper");
  }
  const Eigen::Index p = T.rows();
  const Eigen::Index q = T.cols();
  std::vector<StateSpace> cols;
  MatrixXd A(0, 0);
  MatrixXd B(0, q);
  MatrixXd C(p, 0);
  MatrixXd D = MatrixXd::Zero(p, q);
  for (Eigen::Index j = 0; j < q; ++j) {
    RootList lcm;
    for (Eigen::Index i = 0; i < p; ++i) {
      std::vector<bool> used(lcm.size(), false);
      for (const cplx& pole : T(i, j).poles()) {
        bool found = false;
        for (std::size_t k = 0; k < lcm.size(); ++k) {
          if (!used[k] && detail::roots_match(lcm[k], pole, tol.eps_cancel)) {
            used[k] = true;
            found = true;
            break;
          }
        }
        if (!found) {
          lcm.push_back(pole);
          used.push_back(true);
        }
      }
    }
    const Polynomial den = Polynomial::from_roots(lcm, 1.0);
    const int nj = den.degree();
    MatrixXd Aj = MatrixXd::Zero(nj, nj);
    for (int k = 0; k + 1 < nj; ++k) Aj(k, k + 1) = 1.0;
    for (int k = 0; k < nj; ++k) Aj(nj - 1, k) = -den.coeff(k);
    MatrixXd Bj = MatrixXd::Zero(nj, 1);
    if (nj > 0) Bj(nj - 1, 0) = 1.0;
    MatrixXd Cj = MatrixXd::Zero(p, nj);
    for (Eigen::Index i = 0; i < p; ++i) {
      const RationalFunction& e = T(i, j);
      if (e.is_zero()) continue;
      // Numerator over the common denominator: gain * zeros * (lcm \ poles).
      RootList extra;
      std::vector<bool> used(e.poles().size(), false);
      for (const cplx& r : lcm) {
        bool found = false;
        for (std::size_t k = 0; k < e.poles().size(); ++k) {
          if (!used[k] && detail::roots_match(e.poles()[k], r, tol.eps_cancel)) {
            used[k] = true;
            found = true;
            break;
          }
        }
        if (!found) extra.push_back(r);
      }
      RootList z = e.zeros();
      z.insert(z.end(), extra.begin(), extra.end());
      const Polynomial num = Polynomial::from_roots(z, e.gain());
      const double dij = num.degree() == nj ? num.coeff(nj) : 0.0;
      D(i, j) = dij;
      for (int k = 0; k < nj; ++k) Cj(i, k) = num.coeff(k) - dij * den.coeff(k);
    }
    const Eigen::Index n0 = A.rows();
    MatrixXd An = MatrixXd::Zero(n0 + nj, n0 + nj);
    An.topLeftCorner(n0, n0) = A;
    An.bottomRightCorner(nj, nj) = Aj;
    MatrixXd Bn = MatrixXd::Zero(n0 + nj, q);
    Bn.topRows(n0) = B;
    Bn.bottomRows(nj).col(j) = Bj;
    MatrixXd Cn(p, n0 + nj);
    Cn.leftCols(n0) = C;
    Cn.rightCols(nj) = Cj;
    A = An;
    B = Bn;
    C = Cn;
  }
  return {A, B, C, D};
}

// ---------------------------------------------------------------------------
// Structural tests and reductions
// ---------------------------------------------------------------------------

/// PBH: rank [A - lambda I, B] < n.
inline bool pbh_uncontrollable(const MatrixXd& A, const MatrixXd& B, cplx lambda, double rel_tol) {
  const Eigen::Index n = A.rows();
  MatrixXcd M(n, n + B.cols());
  M.leftCols(n) = A.cast<cplx>();
  M.leftCols(n).diagonal().array() -= lambda;
  M.rightCols(B.cols()) = B.cast<cplx>();
  Eigen::JacobiSVD<MatrixXcd> svd(M);
  const VectorXd& s = svd.singularValues();
  const double scale = std::max({A.norm(), B.norm(), 1.0});
  return s.size() < n || s(n - 1) <= rel_tol * scale;
}

struct ModeDefect {
  bool ok = true;
  cplx eigenvalue{0.0, 0.0};
};

/// Stabilizability of (A, B): every eigenvalue with Re >= -eps_stab passes
/// the PBH rank test.
inline ModeDefect stabilizable(const MatrixXd& A, const MatrixXd& B, double eps_stab,
                               double rel_tol = 1e-8) {
  const VectorXcd ev = linalg::eigenvalues(A);
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i).real() < -eps_stab) continue;
    if (pbh_uncontrollable(A, B, ev(i), rel_tol)) return {false, ev(i)};
  }
  return {};
}

inline ModeDefect detectable(const MatrixXd& A, const MatrixXd& C, double eps_stab,
                             double rel_tol = 1e-8) {
  return stabilizable(A.transpose(), C.transpose(), eps_stab, rel_tol);
}

namespace detail {

// Orthogonal controllability staircase. Returns Z (orthogonal) and the
// dimension of the controllable subspace, spanned by the leading columns of Z.
inline std::pair<MatrixXd, Eigen::Index> controllability_staircase(const MatrixXd& A,
                                                                   const MatrixXd& B,
                                                                   double rel_tol) {
  const Eigen::Index n = A.rows();
  MatrixXd Z = MatrixXd::Identity(n, n);
  if (n == 0) return {Z, 0};
  const double scale = std::max({A.norm(), B.norm(), 1e-300});
  MatrixXd At = A;
  MatrixXd coupling = B;
  Eigen::Index done = 0;
  while (done < n) {
    const Eigen::Index rest = n - done;
    Eigen::JacobiSVD<MatrixXd> svd(coupling, Eigen::ComputeFullU);
    const VectorXd& s = svd.singularValues();
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s(i) > rel_tol * scale) ++r;
    if (r == 0) break;
    const MatrixXd& U = svd.matrixU();
    // Rotate the trailing block.
    At.bottomRightCorner(rest, rest) = U.transpose() * At.bottomRightCorner(rest, rest) * U;
    if (done > 0) {
      At.topRightCorner(done, rest) = At.topRightCorner(done, rest) * U;
      At.bottomLeftCorner(rest, done) = U.transpose() * At.bottomLeftCorner(rest, done);
    }
    Z.rightCols(rest) = Z.rightCols(rest) * U;
    done += r;
    if (r == rest) break;
    coupling = At.block(done, done - r, n - done, r);
  }
  return {Z, done};
}

}  // namespace detail

/// Restriction to the controllable subspace (orthogonal staircase).
inline StateSpace controllable_part(const StateSpace& sys, double rel_tol = 1e-10) {
  auto [Z, nc] = detail::controllability_staircase(sys.A, sys.B, rel_tol);
  const MatrixXd Zc = Z.leftCols(nc);
  return {Zc.transpose() * sys.A * Zc, Zc.transpose() * sys.B, sys.C * Zc, sys.D};
}

inline StateSpace observable_part(const StateSpace& sys, double rel_tol = 1e-10) {
  const StateSpace dual(sys.A.transpose(), sys.C.transpose(), sys.B.transpose(),
                        sys.D.transpose());
  const StateSpace red = controllable_part(dual, rel_tol);
  return {red.A.transpose(), red.C.transpose(), red.B.transpose(), red.D.transpose()};
}

/// Removes uncontrollable and unobservable modes. The transfer matrix is
/// unchanged up to the rank tolerance.
inline StateSpace minimal_realization(const StateSpace& sys, double rel_tol = 1e-10) {
  return observable_part(controllable_part(sys, rel_tol), rel_tol);
}

/// Stability of the transfer matrix realized by a possibly non-minimal `sys`:
/// the modes with Re >= -eps_stab are split off in Schur coordinates and their
/// contribution to the transfer matrix must vanish.
inline bool tf_is_stable(const StateSpace& sys, double eps_stab, double rel_tol = 1e-8) {
  const Eigen::Index n = sys.states();
  if (n == 0) return true;
  const auto sch =
      linalg::ordered_schur(sys.A, [&](cplx l) { return l.real() >= -eps_stab; });
  const Eigen::Index k = sch.selected;
  if (k == 0) return true;
  const MatrixXcd Bt = sch.U.adjoint() * sys.B.cast<cplx>();
  const MatrixXcd Ct = sys.C.cast<cplx>() * sch.U;
  const MatrixXcd T11 = sch.T.topLeftCorner(k, k);
  const MatrixXcd T12 = sch.T.topRightCorner(k, n - k);
  const MatrixXcd T22 = sch.T.bottomRightCorner(n - k, n - k);
  // Decouple with z1 + X z2, where T11 X - X T22 = T12.
  MatrixXcd X = MatrixXcd::Zero(k, n - k);
  for (Eigen::Index j = 0; j < n - k; ++j) {
    VectorXcd rhs = T12.col(j);
    for (Eigen::Index i = 0; i < j; ++i) rhs += X.col(i) * T22(i, j);
    MatrixXcd M = T11;
    M.diagonal().array() -= T22(j, j);
    X.col(j) = M.triangularView<Eigen::Upper>().solve(rhs);
  }
  const MatrixXcd Bu = Bt.topRows(k) + X * Bt.bottomRows(n - k);
  const MatrixXcd Cu = Ct.leftCols(k);
  const double tnorm = std::max(1.0, T11.norm());
  const double scale = std::max(sys.B.norm() * (1.0 + X.norm()), 1e-300) *
                       std::max(sys.C.norm(), 1e-300);
  MatrixXcd Tj = MatrixXcd::Identity(k, k);
  double tpow = 1.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double markov = (Cu * Tj * Bu).norm();
    if (markov > rel_tol * scale * tpow) return false;
    Tj = T11 * Tj;
    tpow *= tnorm;
  }
  return true;
}

}  // namespace retrofit
