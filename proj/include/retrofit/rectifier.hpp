#pragma once

// Output partition selection, rectifier construction and the normal form of
// the selected interaction channel.
//
// Notation: y splits into y_sel = Pi y (rows kept, p - m of them) and
// ybar = PiBar y (m rows used to invert the interaction). H = G_sel Gybar^{-1}
// and the rectifier is R = Pi - H PiBar, so that R Gyv = 0.

#include <algorithm>
#include <climits>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "retrofit/linalg.hpp"
#include "retrofit/lti.hpp"
#include "retrofit/state_space.hpp"
#include "retrofit/transfer_matrix.hpp"

namespace retrofit {

// ---------------------------------------------------------------------------
// Output partition
// ---------------------------------------------------------------------------

struct OutputPartition {
  std::vector<int> index_set;   // rows of y used for inversion (ybar), in Pibar row order
  std::vector<int> complement;  // remaining rows, ascending
  MatrixXd Pi;                  // (p - m) x p
  MatrixXd PiBar;               // m x p

  Eigen::Index p() const { return Pi.cols(); }
  Eigen::Index m() const { return PiBar.rows(); }
  MatrixXd PiDagger() const { return Pi.transpose(); }
  MatrixXd PiBarDagger() const { return PiBar.transpose(); }

  /// Builds complementary 0/1 selectors. The order of `index_set` fixes the
  /// row order of PiBar (and hence the column order of H).
  static OutputPartition from_index_set(Eigen::Index p, std::vector<int> index_set) {
    OutputPartition part;
    std::vector<bool> used(static_cast<std::size_t>(p), false);
    for (int i : index_set) {
      if (i < 0 || i >= p || used[static_cast<std::size_t>(i)]) {
        throw RetrofitError(RetrofitError::Kind::kInvalidInput, "invalid output index set");
      }
      used[static_cast<std::size_t>(i)] = true;
    }
    part.index_set = std::move(index_set);
    for (int i = 0; i < p; ++i)
      if (!used[static_cast<std::size_t>(i)]) part.complement.push_back(i);
    const auto m = static_cast<Eigen::Index>(part.index_set.size());
    part.PiBar = MatrixXd::Zero(m, p);
    for (Eigen::Index r = 0; r < m; ++r) part.PiBar(r, part.index_set[static_cast<std::size_t>(r)]) = 1.0;
    part.Pi = MatrixXd::Zero(p - m, p);
    for (Eigen::Index r = 0; r < p - m; ++r)
      part.Pi(r, part.complement[static_cast<std::size_t>(r)]) = 1.0;
    return part;
  }

  /// Same partition with the index set sorted ascending.
  OutputPartition canonical() const {
    std::vector<int> sorted = index_set;
    std::sort(sorted.begin(), sorted.end());
    return from_index_set(p(), sorted);
  }
};

// ---------------------------------------------------------------------------
// Assumption 2
// ---------------------------------------------------------------------------

enum class Assumption2Status { kOk, kRankDeficient, kRightInvertible };

struct Assumption2Report {
  bool ok = false;
  Assumption2Status status = Assumption2Status::kOk;
  Eigen::Index normal_rank = 0;
  std::string reason;
};

namespace detail {

inline Assumption2Report assumption2_from_rank(Eigen::Index rank, Eigen::Index p, Eigen::Index m) {
  Assumption2Report r;
  r.normal_rank = rank;
  if (rank < m) {
    r.status = Assumption2Status::kRankDeficient;
    r.reason = "Gyv has normal rank " + std::to_string(rank) + " < m = " + std::to_string(m) +
               " (redundant interaction); a factorization Gyv = Gyv' G0 is required first";
  } else if (m >= p) {
    r.status = Assumption2Status::kRightInvertible;
    r.reason = "Gyv is right-invertible (m = p = " + std::to_string(m) +
               "); only trivial controller K=0 is output-rectifying";
  } else {
    r.ok = true;
    r.reason = "ok";
  }
  return r;
}

}  // namespace detail

inline Assumption2Report check_assumption2(const TransferMatrix& Gyv, std::uint64_t seed = 0x5eed,
                                           double eps_rank = 1e-9) {
  return detail::assumption2_from_rank(tm_normal_rank(Gyv, seed, eps_rank), Gyv.rows(), Gyv.cols());
}

inline Assumption2Report check_assumption2(const PartitionedPlant& G, std::uint64_t seed = 0x5eed,
                                           double eps_rank = 1e-9) {
  const StateSpace gyv = G.gyv_ss();
  const Eigen::Index rank =
      G.p() == 0 || G.m() == 0 ? 0
                               : sampled_normal_rank([&](cplx s) { return gyv.eval(s); }, seed, eps_rank);
  return detail::assumption2_from_rank(rank, G.p(), G.m());
}

// ---------------------------------------------------------------------------
// Vector relative degree and normal form
// ---------------------------------------------------------------------------

/// Relative degree (r_1..r_m) of x' = A x + L v, ybar = Cbar x.
inline std::vector<int> relative_degree(const MatrixXd& A, const MatrixXd& L, const MatrixXd& Cbar,
                                        double rel_tol = 1e-9) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = Cbar.rows();
  if (L.cols() != m) {
    throw RetrofitError(RetrofitError::Kind::kRelativeDegree,
                        "vector relative degree undefined: Cbar and L have different widths");
  }
  const double a_scale = std::max(1.0, A.norm());
  std::vector<int> r(static_cast<std::size_t>(m), 0);
  MatrixXd decoupling(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::RowVectorXd row = Cbar.row(i);
    double scale = Cbar.row(i).norm() * L.norm();
    for (int k = 0; k < n; ++k) {
      const Eigen::RowVectorXd mk = row * L;
      if (mk.norm() > rel_tol * scale) {
        r[static_cast<std::size_t>(i)] = k + 1;
        decoupling.row(i) = mk;
        break;
      }
      row = row * A;
      scale *= a_scale;
    }
    if (r[static_cast<std::size_t>(i)] == 0) {
      throw RetrofitError(RetrofitError::Kind::kRelativeDegree,
                          "vector relative degree undefined: output " + std::to_string(i) +
                              " never sees the interaction input");
    }
  }
  Eigen::JacobiSVD<MatrixXd> svd(decoupling);
  const VectorXd& sv = svd.singularValues();
  if (m > 0 && sv(m - 1) <= rel_tol * sv(0)) {
    throw RetrofitError(RetrofitError::Kind::kRelativeDegree,
                        "vector relative degree undefined: decoupling matrix is singular");
  }
  return r;
}

/// Matrix polynomial sum_k M[k] s^k.
using PolyMatrix = std::vector<MatrixXd>;

struct NormalForm {
  std::vector<int> rel_deg;
  MatrixXd T;         // sum(r) x n, rows c_i A^(j-1)
  MatrixXd Tbar;      // (n - sum r) x n
  MatrixXd Tdag;      // n x sum(r): leading block of [T; Tbar]^{-1}
  MatrixXd Tbar_dag;  // n x (n - sum r)
  double condition = 1.0;

  MatrixXd A_xixi, A_xiz, A_zxi, A_zz;
  MatrixXd B_zu;
  MatrixXd C_yxi, C_yz;
  MatrixXd TL, TB;
  // Entrywise bounds |T| |A| |Tdag| etc. of the products above, used to tell
  // genuine polynomial terms from rounding residue.
  MatrixXd A_zxi_mag, C_yxi_mag, B_zu_mag;
  PolyMatrix Du;     // sum(r) x q, derivative chain in u
  PolyMatrix Dybar;  // sum(r) x m, derivative chain in ybar

  Eigen::Index xi_dim() const { return T.rows(); }
  Eigen::Index z_dim() const { return Tbar.rows(); }
};

inline NormalForm normal_form(const MatrixXd& A, const MatrixXd& L, const MatrixXd& B, const MatrixXd& C,
                              const OutputPartition& part, const ToleranceConfig& tol = {}) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = part.m();
  const Eigen::Index q = B.cols();
  const MatrixXd Cbar = part.PiBar * C;
  NormalForm nf;
  nf.rel_deg = relative_degree(A, L, Cbar, tol.eps_rank);
  const int rsum = std::accumulate(nf.rel_deg.begin(), nf.rel_deg.end(), 0);
  if (rsum > n) {
    throw RetrofitError(RetrofitError::Kind::kRelativeDegree, "relative degrees exceed the state dimension");
  }

  // Chains c_i A^(j-1), j = 1..r_i, stacked per output.
  nf.T.resize(rsum, n);
  std::vector<Eigen::Index> chain_start(static_cast<std::size_t>(m));
  std::vector<Eigen::Index> inner_rows;  // rows with j < r_i, which lie in leftnull(L)
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    chain_start[static_cast<std::size_t>(i)] = row;
    Eigen::RowVectorXd c = Cbar.row(i);
    for (int j = 1; j <= nf.rel_deg[static_cast<std::size_t>(i)]; ++j) {
      nf.T.row(row) = c;
      if (j < nf.rel_deg[static_cast<std::size_t>(i)]) inner_rows.push_back(row);
      c = c * A;
      ++row;
    }
  }

  // Tbar: orthonormal basis of leftnull(L) with the inner chain rows projected
  // out. Then Tbar L = 0, and because the complement of Tbar inside [T; Tbar]
  // is exactly the chain, PiBar C Tbar_dag = 0 follows from the block inverse.
  const MatrixXd N = linalg::left_null_space(L, tol.eps_rank);
  MatrixXd W = N;
  if (!inner_rows.empty()) {
    MatrixXd T0(static_cast<Eigen::Index>(inner_rows.size()), n);
    for (std::size_t k = 0; k < inner_rows.size(); ++k) T0.row(static_cast<Eigen::Index>(k)) = nf.T.row(inner_rows[k]);
    const MatrixXd Q0 = linalg::row_space(T0, tol.eps_rank);
    W = N - (N * Q0.transpose()) * Q0;
  }
  nf.Tbar = linalg::row_space(W, 1e-8, 1.0);  // N has orthonormal rows
  if (nf.Tbar.rows() != n - rsum) {
    throw RetrofitError(RetrofitError::Kind::kNumerical,
                        "normal form: complementary coordinates have dimension " +
                            std::to_string(nf.Tbar.rows()) + ", expected " + std::to_string(n - rsum));
  }
  const MatrixXd S = linalg::vstack(nf.T, nf.Tbar);
  Eigen::JacobiSVD<MatrixXd> svd(S);
  const VectorXd& sv = svd.singularValues();
  if (n > 0 && sv(n - 1) <= tol.eps_rank * sv(0)) {
    throw RetrofitError(RetrofitError::Kind::kNumerical, "normal form: [T; Tbar] is singular");
  }
  nf.condition = n > 0 ? sv(0) / sv(n - 1) : 1.0;
  const MatrixXd Sinv = S.partialPivLu().inverse();
  nf.Tdag = Sinv.leftCols(rsum);
  nf.Tbar_dag = Sinv.rightCols(n - rsum);

  const double lscale = std::max(1.0, L.norm());
  const double cscale = std::max(1.0, Cbar.norm());
  if ((nf.Tbar * L).norm() > 1e-8 * lscale || (Cbar * nf.Tbar_dag).norm() > 1e-8 * cscale * nf.condition) {
    throw RetrofitError(RetrofitError::Kind::kNumerical,
                        "normal form: annihilation constraints Tbar L = 0, PiBar C Tbar_dag = 0 violated");
  }

  nf.A_xixi = nf.T * A * nf.Tdag;
  nf.A_xiz = nf.T * A * nf.Tbar_dag;
  nf.A_zxi = nf.Tbar * A * nf.Tdag;
  nf.A_zz = nf.Tbar * A * nf.Tbar_dag;
  nf.B_zu = nf.Tbar * B;
  nf.C_yxi = part.Pi * C * nf.Tdag;
  nf.C_yz = part.Pi * C * nf.Tbar_dag;
  nf.TL = nf.T * L;
  nf.TB = nf.T * B;
  nf.A_zxi_mag = nf.Tbar.cwiseAbs() * A.cwiseAbs() * nf.Tdag.cwiseAbs();
  nf.C_yxi_mag = part.Pi * C.cwiseAbs() * nf.Tdag.cwiseAbs();
  nf.B_zu_mag = nf.Tbar.cwiseAbs() * B.cwiseAbs();

  // xi_ij = ybar_i^(j-1) - sum_{k=0}^{j-2} c_i A^k B u^(j-2-k)
  const int rmax = rsum > 0 ? *std::max_element(nf.rel_deg.begin(), nf.rel_deg.end()) : 0;
  nf.Dybar.assign(static_cast<std::size_t>(std::max(rmax, 1)), MatrixXd::Zero(rsum, m));
  nf.Du.assign(static_cast<std::size_t>(std::max(rmax - 1, 1)), MatrixXd::Zero(rsum, q));
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index base = chain_start[static_cast<std::size_t>(i)];
    for (int j = 1; j <= nf.rel_deg[static_cast<std::size_t>(i)]; ++j) {
      nf.Dybar[static_cast<std::size_t>(j - 1)](base + j - 1, i) = 1.0;
      for (int k = 0; k <= j - 2; ++k) {
        // c_i A^k B multiplies s^(j-2-k); T row base+k holds c_i A^k
        nf.Du[static_cast<std::size_t>(j - 2 - k)].row(base + j - 1) = nf.T.row(base + k) * B;
      }
    }
  }
  return nf;
}

inline NormalForm normal_form(const PartitionedPlant& G, const OutputPartition& part,
                              const ToleranceConfig& tol = {}) {
  return normal_form(G.A(), G.L(), G.B(), G.C(), part, tol);
}

/// Proper part and polynomial remainder of C (sI - A)^{-1} M(s) + P(s).
struct ProperSplit {
  StateSpace proper;
  PolyMatrix poly;       // coefficients of s^l, l >= 1, of the polynomial part
  PolyMatrix poly_mag;   // entrywise magnitude bound used to judge the above
};

/// Mmag and Pmag bound |M_k| and |P_k| entrywise (default: their absolute values).
inline ProperSplit split_proper(const MatrixXd& A, const MatrixXd& C, const PolyMatrix& M, const PolyMatrix& P,
                                const PolyMatrix& Mmag = {}, const PolyMatrix& Pmag = {}) {
  const Eigen::Index n = A.rows();
  const Eigen::Index rows = C.rows();
  const Eigen::Index cols = !M.empty() ? M[0].cols() : P[0].cols();
  const std::size_t K = std::max(M.size(), P.size());
  // Powers C A^k and their magnitudes
  std::vector<MatrixXd> CA(K + 1);
  CA[0] = C;
  for (std::size_t k = 1; k <= K; ++k) CA[k] = CA[k - 1] * A;
  MatrixXd Bt = MatrixXd::Zero(n, cols);
  MatrixXd Ak = MatrixXd::Identity(n, n);
  for (std::size_t k = 0; k < M.size(); ++k) {
    Bt += Ak * M[k];
    Ak = Ak * A;
  }
  ProperSplit out;
  PolyMatrix coef(K, MatrixXd::Zero(rows, cols));
  PolyMatrix mag(K, MatrixXd::Zero(rows, cols));
  for (std::size_t l = 0; l < K; ++l) {
    for (std::size_t k = l + 1; k < M.size(); ++k) {
      coef[l] += CA[k - 1 - l] * M[k];
      mag[l] += CA[k - 1 - l].cwiseAbs() * (k < Mmag.size() ? Mmag[k] : MatrixXd(M[k].cwiseAbs()));
    }
    if (l < P.size()) {
      coef[l] += P[l];
      mag[l] += l < Pmag.size() ? Pmag[l] : MatrixXd(P[l].cwiseAbs());
    }
  }
  out.proper = {A, Bt, C, coef.empty() ? MatrixXd(MatrixXd::Zero(rows, cols)) : coef[0]};
  out.poly.assign(coef.begin() + (coef.empty() ? 0 : 1), coef.end());
  out.poly_mag.assign(mag.begin() + (mag.empty() ? 0 : 1), mag.end());
  return out;
}

namespace detail {

// Entry (i,j) is improper of order l if its s^l coefficient stands out of the
// rounding level of the terms that produced it.
inline Eigen::MatrixXi improper_orders(const ProperSplit& split, double eps) {
  const Eigen::Index rows = split.proper.outputs();
  const Eigen::Index cols = split.proper.inputs();
  Eigen::MatrixXi ord = Eigen::MatrixXi::Zero(rows, cols);
  for (std::size_t l = 0; l < split.poly.size(); ++l) {
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j)
        if (std::abs(split.poly[l](i, j)) > eps * std::max(split.poly_mag[l](i, j), 1e-300))
          ord(i, j) = static_cast<int>(l) + 1;
  }
  return ord;
}

inline ProperSplit rectified_plant_split(const NormalForm& nf) {
  // phi' = A_zz phi + (B_zu - A_zxi Du(s)) u,  yhat = C_yz phi - C_yxi Du(s) u
  const std::size_t K = nf.Du.size();
  PolyMatrix M(K), P(K), Mmag(K), Pmag(K);
  for (std::size_t k = 0; k < K; ++k) {
    M[k] = -nf.A_zxi * nf.Du[k];
    P[k] = -nf.C_yxi * nf.Du[k];
    Mmag[k] = nf.A_zxi_mag * nf.Du[k].cwiseAbs();
    Pmag[k] = nf.C_yxi_mag * nf.Du[k].cwiseAbs();
  }
  M[0] += nf.B_zu;
  Mmag[0] += nf.B_zu_mag;
  return split_proper(nf.A_zz, nf.C_yz, M, P, Mmag, Pmag);
}

inline ProperSplit gg_inverse_split(const NormalForm& nf) {
  const std::size_t K = nf.Dybar.size();
  PolyMatrix M(K), P(K), Mmag(K), Pmag(K);
  for (std::size_t k = 0; k < K; ++k) {
    M[k] = nf.A_zxi * nf.Dybar[k];
    P[k] = nf.C_yxi * nf.Dybar[k];
    Mmag[k] = nf.A_zxi_mag * nf.Dybar[k];
    Pmag[k] = nf.C_yxi_mag * nf.Dybar[k];
  }
  return split_proper(nf.A_zz, nf.C_yz, M, P, Mmag, Pmag);
}

inline StateSpace require_proper(const ProperSplit& split, double eps, const char* what) {
  const Eigen::MatrixXi ord = improper_orders(split, eps);
  if (ord.maxCoeff() > 0) {
    throw RetrofitError(RetrofitError::Kind::kNumerical,
                        std::string(what) + " realization is improper (numerical breakdown)");
  }
  return split.proper;
}

}  // namespace detail

/// Proper realization of the rectified plant u -> yhat from the normal form.
inline StateSpace realize_rectified_plant_nf_ss(const NormalForm& nf, const ToleranceConfig& tol = {}) {
  return detail::require_proper(detail::rectified_plant_split(nf), tol.eps_cancel, "rectified plant");
}

/// Proper realization of H = G_sel Gybar^{-1} (ybar -> estimate of y_sel).
inline StateSpace realize_gg_inv_nf_ss(const NormalForm& nf, const ToleranceConfig& tol = {}) {
  return detail::require_proper(detail::gg_inverse_split(nf), tol.eps_cancel, "G_sel Gybar^{-1}");
}

inline TransferMatrix realize_rectified_plant_nf(const NormalForm& nf, const ToleranceConfig& tol = {}) {
  return ss_to_tf(realize_rectified_plant_nf_ss(nf, tol), tol);
}

inline TransferMatrix realize_gg_inv_nf(const NormalForm& nf, const ToleranceConfig& tol = {}) {
  return ss_to_tf(realize_gg_inv_nf_ss(nf, tol), tol);
}

// ---------------------------------------------------------------------------
// Partition selection
// ---------------------------------------------------------------------------

/// Marker for zero entries of H in relative-degree tables.
inline constexpr int kZeroEntry = INT_MAX;

/// H = G_sel Gybar^{-1} for the given partition (rational path).
inline TransferMatrix gg_inverse(const TransferMatrix& Gyv, const OutputPartition& part,
                                 const ToleranceConfig& tol = {}) {
  const TransferMatrix sel = Gyv.select_rows(part.complement);
  const TransferMatrix bar = Gyv.select_rows(part.index_set);
  TransferMatrix inv;
  try {
    inv = bar.inverse(tol);
  } catch (const RetrofitError&) {
    throw RetrofitError(RetrofitError::Kind::kPartition, "selected rows of Gyv are not independent");
  }
  return TransferMatrix::mul(sel, inv, tol);
}

inline Eigen::MatrixXi relative_degree_table(const TransferMatrix& H) {
  Eigen::MatrixXi d(H.rows(), H.cols());
  for (Eigen::Index i = 0; i < H.rows(); ++i)
    for (Eigen::Index j = 0; j < H.cols(); ++j)
      d(i, j) = H(i, j).is_zero() ? kZeroEntry : H(i, j).relative_degree();
  return d;
}

struct PartitionOptions {
  std::uint64_t seed = 0x5eed;
  bool exhaustive = false;  // also enumerate every valid index set
  ToleranceConfig tol;
};

struct PartitionResult {
  OutputPartition partition;  // index set sorted ascending
  int exchanges = 0;
  std::vector<std::vector<int>> valid_sets;  // lexicographic, only with exhaustive
};

namespace detail {

// Lowest-index-first greedy choice of m independent rows.
template <class RankOf>
std::vector<int> greedy_independent_rows(Eigen::Index p, Eigen::Index m, const RankOf& rank_of) {
  std::vector<int> basis;
  for (int i = 0; i < p && static_cast<Eigen::Index>(basis.size()) < m; ++i) {
    std::vector<int> cand = basis;
    cand.push_back(i);
    if (rank_of(cand) == static_cast<Eigen::Index>(cand.size())) basis = std::move(cand);
  }
  if (static_cast<Eigen::Index>(basis.size()) < m) {
    throw RetrofitError(RetrofitError::Kind::kAssumption2,
                        "Gyv does not have m independent rows (Assumption 2)");
  }
  return basis;
}

// Exchange procedure: while a row of H has an improper entry, swap the basis
// row of its most improper entry (lowest position on ties) with that row.
// degrees(basis) returns the relative-degree table of H with rows ordered as
// the complement (ascending) and columns in basis order.
template <class Degrees>
std::vector<int> exchange_until_proper(Eigen::Index p, std::vector<int> basis, const Degrees& degrees,
                                       int guard, int& exchanges) {
  for (int iter = 0;; ++iter) {
    const OutputPartition part = OutputPartition::from_index_set(p, basis);
    const Eigen::MatrixXi d = degrees(basis);
    int swap_row = -1;
    Eigen::Index swap_col = -1;
    for (Eigen::Index r = 0; r < d.rows() && swap_row < 0; ++r) {
      int best = 0;
      for (Eigen::Index c = 0; c < d.cols(); ++c) {
        if (d(r, c) != kZeroEntry && d(r, c) < best) {
          best = d(r, c);
          swap_col = c;
        }
      }
      if (best < 0) swap_row = part.complement[static_cast<std::size_t>(r)];
    }
    if (swap_row < 0) return basis;
    if (iter >= guard) {
      std::ostringstream os;
      os << "partition exchange did not terminate after " << guard << " steps; basis {";
      for (int b : basis) os << ' ' << b;
      os << " }, relative degrees\n" << d;
      throw RetrofitError(RetrofitError::Kind::kPartition, os.str());
    }
    basis[static_cast<std::size_t>(swap_col)] = swap_row;
    ++exchanges;
  }
}

template <class RankOf, class Degrees>
std::vector<std::vector<int>> enumerate_valid_sets(Eigen::Index p, Eigen::Index m, const RankOf& rank_of,
                                                   const Degrees& degrees) {
  std::vector<std::vector<int>> out;
  std::vector<bool> mask(static_cast<std::size_t>(p), false);
  std::fill(mask.begin(), mask.begin() + m, true);
  do {
    std::vector<int> set;
    for (int i = 0; i < p; ++i)
      if (mask[static_cast<std::size_t>(i)]) set.push_back(i);
    if (rank_of(set) != m) continue;
    Eigen::MatrixXi d;
    try {
      d = degrees(set);
    } catch (const RetrofitError&) {
      continue;
    }
    bool proper = true;
    for (Eigen::Index k = 0; k < d.size(); ++k)
      if (d(k) != kZeroEntry && d(k) < 0) proper = false;
    if (proper) out.push_back(set);
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return out;
}

}  // namespace detail

/// Chooses the inversion rows of Gyv so that H = G_sel Gybar^{-1} is proper.
inline PartitionResult select_partition(const TransferMatrix& Gyv, const PartitionOptions& opt = {}) {
  const Assumption2Report a2 = check_assumption2(Gyv, opt.seed, opt.tol.eps_rank);
  if (!a2.ok) throw RetrofitError(RetrofitError::Kind::kAssumption2, a2.reason);
  const Eigen::Index p = Gyv.rows();
  const Eigen::Index m = Gyv.cols();
  auto rank_of = [&](const std::vector<int>& rows) {
    return tm_normal_rank(Gyv.select_rows(rows), opt.seed, opt.tol.eps_rank);
  };
  auto degrees = [&](const std::vector<int>& basis) {
    return relative_degree_table(gg_inverse(Gyv, OutputPartition::from_index_set(p, basis), opt.tol));
  };
  int max_rd = 0;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (!Gyv(i, j).is_zero()) max_rd = std::max(max_rd, std::abs(Gyv(i, j).relative_degree()));
  const int guard = static_cast<int>(p) * (1 + max_rd);
  PartitionResult res;
  std::vector<int> basis = detail::greedy_independent_rows(p, m, rank_of);
  basis = detail::exchange_until_proper(p, basis, degrees, guard, res.exchanges);
  std::sort(basis.begin(), basis.end());
  res.partition = OutputPartition::from_index_set(p, basis);
  if (opt.exhaustive) res.valid_sets = detail::enumerate_valid_sets(p, m, rank_of, degrees);
  return res;
}

/// State-space variant: properness of H is read off the polynomial part of
/// the normal-form realization, so no rational arithmetic is needed. Requires
/// a vector relative degree for every candidate basis visited.
inline PartitionResult select_partition(const PartitionedPlant& G, const PartitionOptions& opt = {}) {
  const Assumption2Report a2 = check_assumption2(G, opt.seed, opt.tol.eps_rank);
  if (!a2.ok) throw RetrofitError(RetrofitError::Kind::kAssumption2, a2.reason);
  const Eigen::Index p = G.p();
  const Eigen::Index m = G.m();
  const StateSpace gyv = G.gyv_ss();
  auto rank_of = [&](const std::vector<int>& rows) {
    const OutputPartition sel = OutputPartition::from_index_set(p, rows);
    const StateSpace sub = scaled_output(gyv, sel.PiBar);
    return sampled_normal_rank([&](cplx s) { return sub.eval(s); }, opt.seed, opt.tol.eps_rank);
  };
  auto degrees = [&](const std::vector<int>& basis) {
    const NormalForm nf = normal_form(G, OutputPartition::from_index_set(p, basis), opt.tol);
    const Eigen::MatrixXi ord = detail::improper_orders(detail::gg_inverse_split(nf), opt.tol.eps_cancel);
    return Eigen::MatrixXi(-ord);
  };
  const int guard = static_cast<int>(p) * (1 + static_cast<int>(G.n()));
  PartitionResult res;
  try {
    std::vector<int> basis = detail::greedy_independent_rows(p, m, rank_of);
    basis = detail::exchange_until_proper(p, basis, degrees, guard, res.exchanges);
    std::sort(basis.begin(), basis.end());
    res.partition = OutputPartition::from_index_set(p, basis);
  } catch (const RetrofitError& e) {
    // Some visited basis has no vector relative degree: redo it rationally.
    if (e.kind() != RetrofitError::Kind::kRelativeDegree) throw;
    return select_partition(G.Gyv(opt.tol), opt);
  }
  // Sets without a vector relative degree are judged on the rational path.
  if (opt.exhaustive) {
    const TransferMatrix Gyv = G.Gyv(opt.tol);
    auto any_degrees = [&](const std::vector<int>& basis) {
      try {
        return degrees(basis);
      } catch (const RetrofitError& e) {
        if (e.kind() != RetrofitError::Kind::kRelativeDegree) throw;
        return relative_degree_table(gg_inverse(Gyv, OutputPartition::from_index_set(p, basis), opt.tol));
      }
    };
    res.valid_sets = detail::enumerate_valid_sets(p, m, rank_of, any_degrees);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Rectifier
// ---------------------------------------------------------------------------

struct Rectifier {
  bool measured = false;
  std::optional<OutputPartition> partition;  // general case only

  // Rational forms; absent when the rectifier was built on the state-space
  // path only.
  std::optional<TransferMatrix> R;
  std::optional<TransferMatrix> H;        // G_sel Gybar^{-1}
  std::optional<TransferMatrix> gyv_sel;  // Pi Gyv
  std::optional<TransferMatrix> gybar_v;  // PiBar Gyv

  StateSpace realization;                 // R, inputs y (or (y, v) when measured)
  std::optional<StateSpace> h_realization;
  std::optional<NormalForm> normal_form;

  bool has_rational() const { return R.has_value(); }
  Eigen::Index outputs() const { return realization.outputs(); }
};

namespace detail {

// R = Pi - H PiBar from a realization of H.
inline StateSpace rectifier_from_h(const StateSpace& h, const OutputPartition& part) {
  return {h.A, h.B * part.PiBar, -h.C, part.Pi - h.D * part.PiBar};
}

inline TransferMatrix rectifier_tf(const TransferMatrix& H, const OutputPartition& part,
                                   const ToleranceConfig& tol) {
  return TransferMatrix::add(TransferMatrix::constant(part.Pi),
                             -TransferMatrix::mul(H, TransferMatrix::constant(part.PiBar), tol), tol);
}

}  // namespace detail

/// General-case rectifier from the rational Gyv.
inline Rectifier build_rectifier(const TransferMatrix& Gyv, const OutputPartition& part,
                                 const ToleranceConfig& tol = {}) {
  if (part.p() != Gyv.rows() || part.m() != Gyv.cols()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "partition does not match Gyv");
  }
  Rectifier rect;
  rect.partition = part;
  rect.gyv_sel = Gyv.select_rows(part.complement);
  rect.gybar_v = Gyv.select_rows(part.index_set);
  rect.H = gg_inverse(Gyv, part, tol);
  if (!rect.H->is_proper()) {
    throw RetrofitError(RetrofitError::Kind::kPartition,
                        "partition invalid: G_sel Gybar^{-1} is improper");
  }
  rect.R = detail::rectifier_tf(*rect.H, part, tol);
  rect.h_realization = minimal_realization(tf_to_ss(*rect.H, tol));
  rect.realization = detail::rectifier_from_h(*rect.h_realization, part);
  return rect;
}

/// General-case rectifier for a plant. When the normal form exists, H is
/// taken from its realization and converted to rational form; symbolic
/// inversion of Gybar is only used as a fallback since it loses accuracy on
/// high-order entries.
inline Rectifier build_rectifier(const PartitionedPlant& G, const OutputPartition& part,
                                 const ToleranceConfig& tol = {}) {
  std::optional<NormalForm> nf;
  try {
    nf = normal_form(G, part, tol);
  } catch (const RetrofitError& e) {
    if (e.kind() != RetrofitError::Kind::kRelativeDegree) throw;
  }
  const TransferMatrix Gyv = G.Gyv(tol);
  if (!nf) return build_rectifier(Gyv, part, tol);
  if (part.p() != Gyv.rows() || part.m() != Gyv.cols()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "partition does not match Gyv");
  }
  const ProperSplit split = detail::gg_inverse_split(*nf);
  if (detail::improper_orders(split, tol.eps_cancel).maxCoeff() > 0) {
    throw RetrofitError(RetrofitError::Kind::kPartition,
                        "partition invalid: G_sel Gybar^{-1} is improper");
  }
  Rectifier rect;
  rect.partition = part;
  rect.gyv_sel = Gyv.select_rows(part.complement);
  rect.gybar_v = Gyv.select_rows(part.index_set);
  rect.h_realization = minimal_realization(split.proper);
  rect.H = ss_to_tf(*rect.h_realization, tol);
  rect.R = detail::rectifier_tf(*rect.H, part, tol);
  rect.realization = detail::rectifier_from_h(*rect.h_realization, part);
  rect.normal_form = std::move(nf);
  return rect;
}

/// General-case rectifier on the state-space path only (large plants).
inline Rectifier build_rectifier_ss(const PartitionedPlant& G, const OutputPartition& part,
                                    const ToleranceConfig& tol = {}) {
  Rectifier rect;
  rect.partition = part;
  NormalForm nf = normal_form(G, part, tol);
  const ProperSplit split = detail::gg_inverse_split(nf);
  if (detail::improper_orders(split, tol.eps_cancel).maxCoeff() > 0) {
    throw RetrofitError(RetrofitError::Kind::kPartition,
                        "partition invalid: G_sel Gybar^{-1} is improper");
  }
  rect.h_realization = minimal_realization(split.proper);
  rect.realization = detail::rectifier_from_h(*rect.h_realization, part);
  rect.normal_form = std::move(nf);
  return rect;
}

/// Rectifier for measured interaction: yhat = y - Gyv v, acting on (y, v).
inline Rectifier build_rectifier_measured(const PartitionedPlant& G, const ToleranceConfig& tol = {},
                                          bool with_rational = true) {
  Rectifier rect;
  rect.measured = true;
  const Eigen::Index p = G.p();
  const Eigen::Index m = G.m();
  MatrixXd B = MatrixXd::Zero(G.n(), p + m);
  B.rightCols(m) = G.L();
  MatrixXd D = MatrixXd::Zero(p, p + m);
  D.leftCols(p) = MatrixXd::Identity(p, p);
  rect.realization = {G.A(), B, -G.C(), D};
  if (with_rational) {
    const TransferMatrix Gyv = G.Gyv(tol);
    rect.R = hstack(TransferMatrix::identity(p), -Gyv);
  }
  return rect;
}

/// Plant seen by the internal controller: R Gyu, or Gyu when measured.
inline TransferMatrix rectified_plant(const PartitionedPlant& G, const Rectifier& rect,
                                      const ToleranceConfig& tol = {}) {
  if (rect.measured) return G.Gyu(tol);
  if (!rect.R) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "rectifier has no rational form");
  }
  return TransferMatrix::mul(*rect.R, G.Gyu(tol), tol);
}

inline StateSpace rectified_plant_ss(const PartitionedPlant& G, const Rectifier& rect) {
  if (rect.measured) return G.gyu_ss();
  return series(G.gyu_ss(), rect.realization);
}

/// All zeros of det(Gybar) strictly in the left half plane.
inline bool is_minimum_phase(const TransferMatrix& GybarV, const ToleranceConfig& tol = {}) {
  if (GybarV.rows() != GybarV.cols()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "is_minimum_phase needs a square matrix");
  }
  const RationalFunction det = GybarV.determinant(tol);
  if (det.is_zero()) {
    throw RetrofitError(RetrofitError::Kind::kIllPosed, "Gybar is identically singular");
  }
  return std::all_of(det.zeros().begin(), det.zeros().end(),
                     [&](cplx z) { return z.real() < -tol.eps_stab; });
}

/// Sampled max of ||R(s) Gyv(s)||_F / (1 + ||Gyv(s)||_F) (or with col(Gyv, I)
/// in the measured case).
inline double nullspace_residual(const PartitionedPlant& G, const Rectifier& rect, std::uint64_t seed = 1,
                                 int samples = 20) {
  const StateSpace gyv = G.gyv_ss();
  double worst = 0.0;
  for (const cplx s : imag_axis_points(samples, seed)) {
    MatrixXcd g = gyv.eval(s);
    if (rect.measured) {
      MatrixXcd stacked(g.rows() + G.m(), G.m());
      stacked << g, MatrixXcd::Identity(G.m(), G.m());
      g = stacked;
    }
    worst = std::max(worst, (rect.realization.eval(s) * g).norm() / (1.0 + g.norm()));
  }
  return worst;
}

}  // namespace retrofit
