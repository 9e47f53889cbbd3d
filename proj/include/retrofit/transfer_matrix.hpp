#pragma once

#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "retrofit/linalg.hpp"
#include "retrofit/ratpoly.hpp"

namespace retrofit {

/// Dense matrix of real-rational functions (an element of R^{rows x cols}).
class TransferMatrix {
 public:
  TransferMatrix() = default;
  TransferMatrix(Eigen::Index rows, Eigen::Index cols)
      : rows_(rows), cols_(cols), entries_(static_cast<std::size_t>(rows * cols)) {}
  /// Row-major entries.
  TransferMatrix(Eigen::Index rows, Eigen::Index cols, std::vector<RationalFunction> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (static_cast<Eigen::Index>(entries_.size()) != rows * cols)
      throw RetrofitError(RetrofitError::Kind::kInvalidInput, "transfer matrix entry count mismatch");
  }

  static TransferMatrix zero(Eigen::Index rows, Eigen::Index cols) { return {rows, cols}; }

  static TransferMatrix identity(Eigen::Index n) {
    TransferMatrix t(n, n);
    for (Eigen::Index i = 0; i < n; ++i) t(i, i) = RationalFunction(1.0);
    return t;
  }

  static TransferMatrix constant(const MatrixXd& M) {
    TransferMatrix t(M.rows(), M.cols());
    for (Eigen::Index i = 0; i < M.rows(); ++i)
      for (Eigen::Index j = 0; j < M.cols(); ++j) t(i, j) = RationalFunction(M(i, j));
    return t;
  }

  static TransferMatrix column(std::initializer_list<RationalFunction> entries) {
    TransferMatrix t(static_cast<Eigen::Index>(entries.size()), 1);
    Eigen::Index i = 0;
    for (const auto& e : entries) t(i++, 0) = e;
    return t;
  }

  static TransferMatrix row(std::initializer_list<RationalFunction> entries) {
    TransferMatrix t(1, static_cast<Eigen::Index>(entries.size()));
    Eigen::Index j = 0;
    for (const auto& e : entries) t(0, j++) = e;
    return t;
  }

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }

  RationalFunction& operator()(Eigen::Index i, Eigen::Index j) {
    return entries_[static_cast<std::size_t>(i * cols_ + j)];
  }
  const RationalFunction& operator()(Eigen::Index i, Eigen::Index j) const {
    return entries_[static_cast<std::size_t>(i * cols_ + j)];
  }

  bool is_proper() const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [](const RationalFunction& r) { return r.is_proper(); });
  }
  bool is_stable(double eps_stab = 1e-9) const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [&](const RationalFunction& r) { return r.is_stable(eps_stab); });
  }
  bool is_zero() const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [](const RationalFunction& r) { return r.is_zero(); });
  }

  /// Largest denominator degree over all entries.
  int max_order() const {
    int d = 0;
    for (const auto& e : entries_) d = std::max(d, static_cast<int>(e.poles().size()));
    return d;
  }

  MatrixXcd eval(cplx s) const {
    MatrixXcd M(rows_, cols_);
    for (Eigen::Index i = 0; i < rows_; ++i)
      for (Eigen::Index j = 0; j < cols_; ++j) M(i, j) = (*this)(i, j).eval(s);
    return M;
  }

  TransferMatrix select_rows(std::span<const int> idx) const {
    TransferMatrix t(static_cast<Eigen::Index>(idx.size()), cols_);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (Eigen::Index j = 0; j < cols_; ++j) t(static_cast<Eigen::Index>(r), j) = (*this)(idx[r], j);
    return t;
  }

  TransferMatrix transpose() const {
    TransferMatrix t(cols_, rows_);
    for (Eigen::Index i = 0; i < rows_; ++i)
      for (Eigen::Index j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  static TransferMatrix add(const TransferMatrix& a, const TransferMatrix& b,
                            const ToleranceConfig& tol = {}) {
    check_same(a, b);
    TransferMatrix t(a.rows_, a.cols_);
    for (std::size_t k = 0; k < t.entries_.size(); ++k)
      t.entries_[k] = RationalFunction::add(a.entries_[k], b.entries_[k], tol);
    return t;
  }

  static TransferMatrix mul(const TransferMatrix& a, const TransferMatrix& b,
                            const ToleranceConfig& tol = {}) {
    if (a.cols_ != b.rows_) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput,
                          "transfer matrix product: inner dimensions differ");
    }
    TransferMatrix t(a.rows_, b.cols_);
    for (Eigen::Index i = 0; i < a.rows_; ++i) {
      for (Eigen::Index j = 0; j < b.cols_; ++j) {
        RationalFunction acc;
        for (Eigen::Index k = 0; k < a.cols_; ++k) {
          if (a(i, k).is_zero() || b(k, j).is_zero()) continue;
          acc = RationalFunction::add(acc, RationalFunction::mul(a(i, k), b(k, j), tol), tol);
        }
        t(i, j) = acc;
      }
    }
    return t;
  }

  TransferMatrix scaled(double k) const {
    TransferMatrix t = *this;
    for (auto& e : t.entries_) e = RationalFunction::mul(e, RationalFunction(k));
    return t;
  }

  TransferMatrix operator-() const { return scaled(-1.0); }
  friend TransferMatrix operator+(const TransferMatrix& a, const TransferMatrix& b) { return add(a, b); }
  friend TransferMatrix operator-(const TransferMatrix& a, const TransferMatrix& b) { return add(a, -b); }
  friend TransferMatrix operator*(const TransferMatrix& a, const TransferMatrix& b) { return mul(a, b); }

  /// Gauss-Jordan inverse over the rational field. Pivots are chosen by
  /// magnitude at a fixed generic point; a column with no nonzero pivot means
  /// the matrix is singular over R.
  TransferMatrix inverse(const ToleranceConfig& tol = {}) const {
    if (rows_ != cols_) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput, "inverse of a non-square transfer matrix");
    }
    const Eigen::Index n = rows_;
    TransferMatrix a = *this;
    TransferMatrix inv = identity(n);
    for (Eigen::Index c = 0; c < n; ++c) {
      Eigen::Index piv = -1;
      double best = -1.0;
      for (Eigen::Index r = c; r < n; ++r) {
        if (a(r, c).is_zero()) continue;
        const double mag = pivot_magnitude(a(r, c));
        if (mag > best) {
          best = mag;
          piv = r;
        }
      }
      if (piv < 0) {
        throw RetrofitError(RetrofitError::Kind::kIllPosed,
                            "transfer matrix is singular over the rational field");
      }
      if (piv != c) {
        a.swap_rows(piv, c);
        inv.swap_rows(piv, c);
      }
      const RationalFunction pinv = a(c, c).inverse(tol);
      for (Eigen::Index j = 0; j < n; ++j) {
        a(c, j) = RationalFunction::mul(a(c, j), pinv, tol);
        inv(c, j) = RationalFunction::mul(inv(c, j), pinv, tol);
      }
      for (Eigen::Index r = 0; r < n; ++r) {
        if (r == c || a(r, c).is_zero()) continue;
        const RationalFunction f = a(r, c);
        for (Eigen::Index j = 0; j < n; ++j) {
          if (!a(c, j).is_zero())
            a(r, j) = RationalFunction::add(a(r, j), -RationalFunction::mul(f, a(c, j), tol), tol);
          if (!inv(c, j).is_zero())
            inv(r, j) = RationalFunction::add(inv(r, j), -RationalFunction::mul(f, inv(c, j), tol), tol);
        }
      }
    }
    return inv;
  }

  /// Determinant by fraction elimination. Zero when singular over R.
  RationalFunction determinant(const ToleranceConfig& tol = {}) const {
    if (rows_ != cols_) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput, "determinant of a non-square transfer matrix");
    }
    const Eigen::Index n = rows_;
    if (n == 0) return RationalFunction(1.0);
    TransferMatrix a = *this;
    RationalFunction det(1.0);
    for (Eigen::Index c = 0; c < n; ++c) {
      Eigen::Index piv = -1;
      double best = -1.0;
      for (Eigen::Index r = c; r < n; ++r) {
        if (a(r, c).is_zero()) continue;
        const double mag = pivot_magnitude(a(r, c));
        if (mag > best) {
          best = mag;
          piv = r;
        }
      }
      if (piv < 0) return RationalFunction();
      if (piv != c) {
        a.swap_rows(piv, c);
        det = -det;
      }
      det = RationalFunction::mul(det, a(c, c), tol);
      const RationalFunction pinv = a(c, c).inverse(tol);
      for (Eigen::Index r = c + 1; r < n; ++r) {
        if (a(r, c).is_zero()) continue;
        const RationalFunction f = RationalFunction::mul(a(r, c), pinv, tol);
        for (Eigen::Index j = c; j < n; ++j) {
          if (a(c, j).is_zero()) continue;
          a(r, j) = RationalFunction::add(a(r, j), -RationalFunction::mul(f, a(c, j), tol), tol);
        }
      }
    }
    return det;
  }

  void swap_rows(Eigen::Index r1, Eigen::Index r2) {
    for (Eigen::Index j = 0; j < cols_; ++j) std::swap((*this)(r1, j), (*this)(r2, j));
  }

 private:
  static double pivot_magnitude(const RationalFunction& r) {
    static const cplx kProbe(0.6180339887, 1.4142135623);
    try {
      return std::abs(r.eval(kProbe));
    } catch (const RetrofitError&) {
      return std::numeric_limits<double>::max();
    }
  }

  static void check_same(const TransferMatrix& a, const TransferMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput, "transfer matrix dimensions differ");
    }
  }

  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  std::vector<RationalFunction> entries_;
};

inline TransferMatrix hstack(const TransferMatrix& a, const TransferMatrix& b) {
  if (a.rows() != b.rows()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "hstack: row counts differ");
  }
  TransferMatrix t(a.rows(), a.cols() + b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) t(i, j) = a(i, j);
    for (Eigen::Index j = 0; j < b.cols(); ++j) t(i, a.cols() + j) = b(i, j);
  }
  return t;
}

inline TransferMatrix vstack(const TransferMatrix& a, const TransferMatrix& b) {
  if (a.cols() != b.cols()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput, "vstack: column counts differ");
  }
  TransferMatrix t(a.rows() + b.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) t(i, j) = a(i, j);
    for (Eigen::Index i = 0; i < b.rows(); ++i) t(a.rows() + i, j) = b(i, j);
  }
  return t;
}

inline MatrixXcd tm_eval(const TransferMatrix& T, cplx s0) { return T.eval(s0); }

/// Sample points on the right half of the circle |s| = radius.
inline std::vector<cplx> rhp_circle_points(int count, std::uint64_t seed, double radius = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-0.45 * std::numbers::pi, 0.45 * std::numbers::pi);
  std::vector<cplx> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) pts.push_back(std::polar(radius, angle(rng)));
  return pts;
}

/// Points on the imaginary axis with log-uniform magnitude in [wmin, wmax].
inline std::vector<cplx> imag_axis_points(int count, std::uint64_t seed, double wmin = 1e-2,
                                          double wmax = 1e2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(std::log(wmin), std::log(wmax));
  std::vector<cplx> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) pts.emplace_back(0.0, std::exp(u(rng)));
  return pts;
}

/// Rank over the rational field: the maximum numerical rank over seven
/// sample points on the right-half circle of radius 2.
template <class Evaluator>
Eigen::Index sampled_normal_rank(const Evaluator& eval, std::uint64_t seed, double eps_rank,
                                 int samples = 7) {
  Eigen::Index best = 0;
  std::mt19937_64 rng(seed);
  int taken = 0;
  for (int attempt = 0; taken < samples && attempt < 10 * samples; ++attempt) {
    const cplx s = rhp_circle_points(1, rng())[0];
    MatrixXcd M;
    try {
      M = eval(s);
    } catch (const RetrofitError&) {
      continue;
    }
    if (!M.allFinite()) continue;
    best = std::max(best, linalg::numerical_rank(M, eps_rank));
    ++taken;
  }
  return best;
}

inline Eigen::Index tm_normal_rank(const TransferMatrix& T, std::uint64_t seed = 0x5eed,
                                   double eps_rank = 1e-9) {
  if (T.rows() == 0 || T.cols() == 0) return 0;
  return sampled_normal_rank([&](cplx s) { return T.eval(s); }, seed, eps_rank);
}

}  // namespace retrofit
