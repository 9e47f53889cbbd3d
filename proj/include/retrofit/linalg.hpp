#pragma once

// Dense linear-algebra kernels shared by the rational, state-space and
// synthesis layers: balanced eigenvalues, reordered complex Schur forms,
// triangular Lyapunov solves and SVD-based subspace helpers.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "retrofit/tolerances.hpp"

namespace retrofit {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

namespace linalg {

/// Parlett-Reinsch diagonal balancing. Returns D^{-1} A D with D a power-of-two
/// diagonal; eigenvalues are unchanged.
inline MatrixXd balance(const MatrixXd& A) {
  MatrixXd B = A;
  const Eigen::Index n = B.rows();
  constexpr double kRadix = 2.0;
  bool converged = false;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    converged = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = 0.0;
      double r = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(B(j, i));
        r += std::abs(B(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / kRadix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= kRadix;
        c *= kRadix * kRadix;
      }
      g = r * kRadix;
      while (c > g) {
        f /= kRadix;
        c /= kRadix * kRadix;
      }
      if ((c + r) / f < 0.95 * s) {
        converged = false;
        B.row(i) /= f;
        B.col(i) *= f;
      }
    }
  }
  return B;
}

/// Eigenvalues of a real square matrix (balancing, Hessenberg reduction and
/// shifted QR). Empty for a 0x0 input.
inline VectorXcd eigenvalues(const MatrixXd& A) {
  if (A.rows() == 0) return VectorXcd(0);
  Eigen::EigenSolver<MatrixXd> es(balance(A), /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw RetrofitError(RetrofitError::Kind::kNumerical,
                        "eigenvalue iteration did not converge");
  }
  return es.eigenvalues();
}

inline double spectral_abscissa(const MatrixXd& A) {
  if (A.rows() == 0) return -std::numeric_limits<double>::infinity();
  return eigenvalues(A).real().maxCoeff();
}

inline bool is_hurwitz(const MatrixXd& A, double eps_stab) {
  return spectral_abscissa(A) < -eps_stab;
}

/// Complex Schur form A = U T U^* with a chosen set of eigenvalues moved to
/// the leading diagonal block.
struct OrderedSchur {
  MatrixXcd U;
  MatrixXcd T;
  Eigen::Index selected = 0;
};

namespace detail {

// Swap diagonal entries k and k+1 of the upper triangular T with a unitary
// rotation, accumulating it into U.
inline void swap_adjacent(MatrixXcd& T, MatrixXcd& U, Eigen::Index k) {
  const cplx a = T(k, k);
  const cplx b = T(k + 1, k + 1);
  const cplx t = T(k, k + 1);
  const cplx x1 = t;
  const cplx x2 = b - a;
  const double nrm = std::sqrt(std::norm(x1) + std::norm(x2));
  if (nrm == 0.0) return;
  Eigen::Matrix2cd Z;
  Z(0, 0) = x1 / nrm;
  Z(1, 0) = x2 / nrm;
  Z(0, 1) = -std::conj(Z(1, 0));
  Z(1, 1) = std::conj(Z(0, 0));
  T.middleRows(k, 2) = Z.adjoint() * T.middleRows(k, 2);
  T.middleCols(k, 2) = T.middleCols(k, 2) * Z;
  U.middleCols(k, 2) = U.middleCols(k, 2) * Z;
  T(k + 1, k) = 0.0;
}

}  // namespace detail

inline OrderedSchur ordered_schur(const MatrixXd& A,
                                  const std::function<bool(cplx)>& select) {
  OrderedSchur out;
  const Eigen::Index n = A.rows();
  if (n == 0) {
    out.U = MatrixXcd(0, 0);
    out.T = MatrixXcd(0, 0);
    return out;
  }
  Eigen::ComplexSchur<MatrixXcd> cs(A.cast<cplx>());
  if (cs.info() != Eigen::Success) {
    throw RetrofitError(RetrofitError::Kind::kNumerical,
                        "complex Schur decomposition did not converge");
  }
  out.U = cs.matrixU();
  out.T = cs.matrixT();
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!select(out.T(i, i))) continue;
    for (Eigen::Index j = i; j > k; --j) detail::swap_adjacent(out.T, out.U, j - 1);
    ++k;
  }
  out.selected = k;
  return out;
}

/// Solves T^* P + P T + Q = 0 for upper triangular complex T.
inline MatrixXcd lyapunov_triangular(const MatrixXcd& T, const MatrixXcd& Q) {
  const Eigen::Index n = T.rows();
  MatrixXcd P = MatrixXcd::Zero(n, n);
  const MatrixXcd Th = T.adjoint();
  for (Eigen::Index j = 0; j < n; ++j) {
    VectorXcd rhs = -Q.col(j);
    for (Eigen::Index k = 0; k < j; ++k) rhs -= P.col(k) * T(k, j);
    MatrixXcd M = Th;
    M.diagonal().array() += T(j, j);
    for (Eigen::Index d = 0; d < n; ++d) {
      if (std::abs(M(d, d)) == 0.0) {
        throw RetrofitError(RetrofitError::Kind::kNumerical,
                            "Lyapunov equation is singular (eigenvalues "
                            "symmetric about the imaginary axis)");
      }
    }
    P.col(j) = M.triangularView<Eigen::Lower>().solve(rhs);
  }
  return P;
}

/// Solves A^T P + P A + Q = 0 for real A (Schur-based Bartels-Stewart).
inline MatrixXd lyapunov(const MatrixXd& A, const MatrixXd& Q) {
  const Eigen::Index n = A.rows();
  if (n == 0) return MatrixXd(0, 0);
  Eigen::ComplexSchur<MatrixXcd> cs(A.cast<cplx>());
  const MatrixXcd& U = cs.matrixU();
  const MatrixXcd& T = cs.matrixT();
  const MatrixXcd Qt = U.adjoint() * Q.cast<cplx>() * U;
  const MatrixXcd Pt = lyapunov_triangular(T, Qt);
  MatrixXd P = (U * Pt * U.adjoint()).real();
  return 0.5 * (P + P.transpose());
}

inline Eigen::Index numerical_rank(const MatrixXcd& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXcd> svd(M);
  const VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * s(0)) ++r;
  }
  return r;
}

inline Eigen::Index numerical_rank(const MatrixXd& M, double rel_tol) {
  return numerical_rank(MatrixXcd(M.cast<cplx>()), rel_tol);
}

/// Orthonormal basis (as rows) of the left null space of M: rows z with zM = 0.
inline MatrixXd left_null_space(const MatrixXd& M, double rel_tol) {
  const Eigen::Index n = M.rows();
  if (M.cols() == 0) return MatrixXd::Identity(n, n);
  Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeFullU);
  const VectorXd& s = svd.singularValues();
  Eigen::Index r = 0;
  const double smax = s.size() > 0 ? s(0) : 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (smax > 0 && s(i) > rel_tol * smax) ++r;
  }
  return svd.matrixU().rightCols(n - r).transpose();
}

/// Orthonormal basis (as rows) of the row space of M. Singular values are
/// compared against rel_tol * max(sigma_max, scale); pass the scale of the
/// data M was derived from when M itself may be pure rounding residue.
inline MatrixXd row_space(const MatrixXd& M, double rel_tol, double scale = 0.0) {
  if (M.rows() == 0) return MatrixXd(0, M.cols());
  Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeFullV);
  const VectorXd& s = svd.singularValues();
  Eigen::Index r = 0;
  const double smax = std::max(s.size() > 0 ? s(0) : 0.0, scale);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (smax > 0 && s(i) > rel_tol * smax) ++r;
  }
  return svd.matrixV().leftCols(r).transpose();
}

inline MatrixXd vstack(const MatrixXd& top, const MatrixXd& bottom) {
  MatrixXd out(top.rows() + bottom.rows(), std::max(top.cols(), bottom.cols()));
  if (top.rows() > 0) out.topRows(top.rows()) = top;
  if (bottom.rows() > 0) out.bottomRows(bottom.rows()) = bottom;
  return out;
}

inline MatrixXd hstack(const MatrixXd& left, const MatrixXd& right) {
  MatrixXd out(std::max(left.rows(), right.rows()), left.cols() + right.cols());
  if (left.cols() > 0) out.leftCols(left.cols()) = left;
  if (right.cols() > 0) out.rightCols(right.cols()) = right;
  return out;
}

inline MatrixXd block_diag(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out = MatrixXd::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

}  // namespace linalg
}  // namespace retrofit
