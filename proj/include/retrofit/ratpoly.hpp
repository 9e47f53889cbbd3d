#pragma once

// Real polynomials and real-rational functions of the Laplace variable s.
//
// A RationalFunction is stored in gain/zero/pole form. Multiplication and
// division only concatenate and cancel root lists, so poles inherited from
// a realization are never re-computed from expanded products. Addition
// expands both numerators over the least common denominator and roots the
// resulting numerator once.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "retrofit/linalg.hpp"
#include "retrofit/tolerances.hpp"

namespace retrofit {

using RootList = std::vector<cplx>;

class Polynomial {
 public:
  Polynomial() = default;

  /// Coefficients in ascending degree. Leading coefficients with magnitude
  /// <= eps_trim * max|c| are dropped.
  explicit Polynomial(std::vector<double> coeffs, double eps_trim = 1e-12)
      : coeffs_(std::move(coeffs)) {
    trim(eps_trim);
  }

  static Polynomial constant(double c) { return Polynomial({c}); }
  static Polynomial s() { return Polynomial({0.0, 1.0}); }

  /// lead * prod (s - r). Imaginary residue from conjugate pairs is dropped.
  static Polynomial from_roots(std::span<const cplx> roots, double lead = 1.0) {
    std::vector<cplx> c{cplx(lead, 0.0)};
    for (const cplx& r : roots) {
      std::vector<cplx> next(c.size() + 1, cplx(0.0));
      for (std::size_t i = 0; i < c.size(); ++i) {
        next[i + 1] += c[i];
        next[i] -= r * c[i];
      }
      c = std::move(next);
    }
    std::vector<double> re(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) re[i] = c[i].real();
    Polynomial p;
    p.coeffs_ = std::move(re);
    if (lead == 0.0) p.coeffs_.clear();
    return p;
  }

  bool is_zero() const { return coeffs_.empty(); }
  /// -1 for the zero polynomial.
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  double leading() const { return coeffs_.empty() ? 0.0 : coeffs_.back(); }
  double coeff(int k) const {
    return (k >= 0 && k < static_cast<int>(coeffs_.size())) ? coeffs_[k] : 0.0;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (double c : coeffs_) m = std::max(m, std::abs(c));
    return m;
  }

  cplx eval(cplx s) const {
    cplx acc(0.0);
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * s + *it;
    return acc;
  }

  Polynomial derivative() const {
    if (coeffs_.size() <= 1) return Polynomial();
    std::vector<double> d(coeffs_.size() - 1);
    for (std::size_t i = 1; i < coeffs_.size(); ++i) d[i - 1] = coeffs_[i] * static_cast<double>(i);
    return Polynomial(std::move(d), 0.0);
  }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<double> c(std::max(a.coeffs_.size(), b.coeffs_.size()), 0.0);
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i) c[i] += a.coeffs_[i];
    for (std::size_t i = 0; i < b.coeffs_.size(); ++i) c[i] += b.coeffs_[i];
    return Polynomial(std::move(c));
  }
  friend Polynomial operator-(const Polynomial& a) {
    std::vector<double> c = a.coeffs_;
    for (double& x : c) x = -x;
    return Polynomial(std::move(c), 0.0);
  }
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-b); }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.is_zero() || b.is_zero()) return Polynomial();
    std::vector<double> c(a.coeffs_.size() + b.coeffs_.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
      for (std::size_t j = 0; j < b.coeffs_.size(); ++j) c[i + j] += a.coeffs_[i] * b.coeffs_[j];
    return Polynomial(std::move(c), 0.0);
  }
  friend Polynomial operator*(double k, const Polynomial& a) {
    if (k == 0.0) return Polynomial();
    std::vector<double> c = a.coeffs_;
    for (double& x : c) x *= k;
    return Polynomial(std::move(c), 0.0);
  }

 private:
  void trim(double eps_trim) {
    const double scale = max_abs_coeff();
    while (!coeffs_.empty() &&
           (coeffs_.back() == 0.0 || std::abs(coeffs_.back()) <= eps_trim * scale)) {
      coeffs_.pop_back();
    }
  }

  std::vector<double> coeffs_;
};

/// Roots of p as eigenvalues of its balanced companion matrix.
inline RootList poly_roots(const Polynomial& p) {
  if (p.is_zero()) {
    throw RetrofitError(RetrofitError::Kind::kInvalidInput,
                        "roots undefined for the zero polynomial");
  }
  const auto& c = p.coeffs();
  RootList roots;
  std::size_t lo = 0;
  while (lo < c.size() && c[lo] == 0.0) {
    roots.emplace_back(0.0, 0.0);
    ++lo;
  }
  const std::vector<double> rest(c.begin() + static_cast<std::ptrdiff_t>(lo), c.end());
  const int n = static_cast<int>(rest.size()) - 1;
  if (n == 1) {
    roots.emplace_back(-rest[0] / rest[1], 0.0);
  } else if (n >= 2) {
    MatrixXd comp = MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) comp(i, n - 1) = -rest[i] / rest[n];
    const VectorXcd ev = linalg::eigenvalues(comp);
    for (Eigen::Index i = 0; i < ev.size(); ++i) roots.push_back(ev(i));
  }
  // Snap near-real roots so conjugate structure survives re-expansion.
  for (cplx& r : roots) {
    if (std::abs(r.imag()) <= 1e-13 * (1.0 + std::abs(r))) r = cplx(r.real(), 0.0);
  }
  return roots;
}

namespace detail {

inline bool roots_match(cplx a, cplx b, double eps) {
  return std::abs(a - b) <= eps * (1.0 + std::max(std::abs(a), std::abs(b)));
}

// Removes root pairs (one from each list) closer than eps, nearest first.
inline void cancel_common_roots(RootList& num, RootList& den, double eps) {
  for (;;) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    std::size_t bj = 0;
    for (std::size_t i = 0; i < num.size(); ++i) {
      for (std::size_t j = 0; j < den.size(); ++j) {
        if (!roots_match(num[i], den[j], eps)) continue;
        const double d = std::abs(num[i] - den[j]);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    if (!std::isfinite(best)) return;
    num.erase(num.begin() + static_cast<std::ptrdiff_t>(bi));
    den.erase(den.begin() + static_cast<std::ptrdiff_t>(bj));
  }
}

// Divides the numerator c by (s - p) for every pole p of `poles` at which it
// vanishes relative to the magnitude bound `mag`, removing p from `poles`.
// Testing values at the exactly known poles is far more reliable than
// matching recomputed numerator roots, which scatter around repeated poles.
inline void deflate_known_poles(std::vector<double>& c, std::vector<double>& mag,
                                RootList& poles, double eps) {
  auto horner = [](const std::vector<double>& v, cplx s) {
    cplx acc = 0.0;
    for (std::size_t k = v.size(); k-- > 0;) acc = acc * s + v[k];
    return acc;
  };
  auto divide = [](std::vector<double>& v, const std::vector<double>& monic_div, bool absolute) {
    // v / (s^d + a_{d-1} s^{d-1} + ... + a_0), remainder dropped
    const std::size_t d = monic_div.size() - 1;
    if (v.size() <= d) {
      v.clear();
      return;
    }
    std::vector<double> q(v.size() - d, 0.0);
    std::vector<double> r = v;
    for (std::size_t k = q.size(); k-- > 0;) {
      q[k] = r[k + d];
      for (std::size_t j = 0; j < d; ++j) {
        const double a = absolute ? std::abs(monic_div[j]) : monic_div[j];
        r[k + j] += (absolute ? 1.0 : -1.0) * a * q[k];
      }
    }
    v = std::move(q);
  };
  bool changed = true;
  while (changed && c.size() > 1) {
    changed = false;
    for (std::size_t i = 0; i < poles.size() && !changed; ++i) {
      const cplx p = poles[i];
      if (p.imag() < 0.0) continue;
      const double bound = std::abs(horner(mag, std::abs(p)));
      if (p.imag() == 0.0) {
        if (std::abs(horner(c, p)) > eps * bound) continue;
        divide(c, {-p.real(), 1.0}, false);
        divide(mag, {-p.real(), 1.0}, true);
        poles.erase(poles.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        continue;
      }
      std::size_t partner = poles.size();
      for (std::size_t j = 0; j < poles.size(); ++j) {
        if (j != i && poles[j].imag() < 0.0 && roots_match(poles[j], std::conj(p), 1e-12)) {
          partner = j;
          break;
        }
      }
      if (partner == poles.size()) continue;
      if (c.size() < 3 || std::abs(horner(c, p)) > eps * bound) continue;
      const std::vector<double> quad{std::norm(p), -2.0 * p.real(), 1.0};
      divide(c, quad, false);
      divide(mag, quad, true);
      poles.erase(poles.begin() + static_cast<std::ptrdiff_t>(std::max(i, partner)));
      poles.erase(poles.begin() + static_cast<std::ptrdiff_t>(std::min(i, partner)));
      changed = true;
    }
  }
}

}  // namespace detail

struct RationalClass {
  bool proper = false;
  bool stable = false;
};

class RationalFunction {
 public:
  /// The zero function.
  RationalFunction() = default;

  RationalFunction(double constant) : gain_(constant) {}  // NOLINT(runtime/explicit)

  RationalFunction(const Polynomial& num, const Polynomial& den,
                   const ToleranceConfig& tol = {}) {
    if (den.is_zero()) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput,
                          "rational function with zero denominator");
    }
    if (num.is_zero()) return;
    *this = from_zpk(num.leading() / den.leading(), poly_roots(num), poly_roots(den), tol);
  }

  static RationalFunction from_zpk(double gain, RootList zeros, RootList poles,
                                   const ToleranceConfig& tol = {}) {
    RationalFunction r;
    if (gain == 0.0) return r;
    detail::cancel_common_roots(zeros, poles, tol.eps_cancel);
    r.gain_ = gain;
    r.zeros_ = std::move(zeros);
    r.poles_ = std::move(poles);
    return r;
  }

  bool is_zero() const { return gain_ == 0.0; }
  double gain() const { return gain_; }
  const RootList& zeros() const { return zeros_; }
  const RootList& poles() const { return poles_; }

  Polynomial num() const {
    if (is_zero()) return Polynomial();
    return Polynomial::from_roots(zeros_, gain_);
  }
  /// Monic denominator.
  Polynomial den() const { return Polynomial::from_roots(poles_, 1.0); }

  int relative_degree() const {
    if (is_zero()) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput,
                          "relative degree undefined for the zero function");
    }
    return static_cast<int>(poles_.size()) - static_cast<int>(zeros_.size());
  }

  bool is_proper() const { return is_zero() || relative_degree() >= 0; }

  bool is_stable(double eps_stab = 1e-9) const {
    if (!is_proper()) return false;
    return std::all_of(poles_.begin(), poles_.end(),
                       [&](const cplx& p) { return p.real() < -eps_stab; });
  }

  RationalClass classify(double eps_stab = 1e-9) const {
    return {is_proper(), is_stable(eps_stab)};
  }

  cplx eval(cplx s) const {
    if (is_zero()) return 0.0;
    cplx acc(gain_, 0.0);
    for (const cplx& p : poles_) {
      if (std::abs(s - p) <= 1e-13 * (1.0 + std::abs(p))) {
        throw RetrofitError(RetrofitError::Kind::kInvalidInput,
                            "evaluation at a pole");
      }
    }
    // Interleave factors to keep intermediate magnitudes moderate.
    const std::size_t k = std::max(zeros_.size(), poles_.size());
    for (std::size_t i = 0; i < k; ++i) {
      if (i < zeros_.size()) acc *= (s - zeros_[i]);
      if (i < poles_.size()) acc /= (s - poles_[i]);
    }
    return acc;
  }

  /// Root pairs that survived cancellation but lie within `factor` * eps_cancel.
  int near_cancellations(const ToleranceConfig& tol = {}, double factor = 10.0) const {
    int count = 0;
    for (const cplx& z : zeros_)
      for (const cplx& p : poles_)
        if (detail::roots_match(z, p, factor * tol.eps_cancel)) ++count;
    return count;
  }

  RationalFunction operator-() const {
    RationalFunction r = *this;
    r.gain_ = -r.gain_;
    return r;
  }

  RationalFunction inverse(const ToleranceConfig& tol = {}) const {
    if (is_zero()) {
      throw RetrofitError(RetrofitError::Kind::kInvalidInput,
                          "division by the zero rational function");
    }
    return from_zpk(1.0 / gain_, poles_, zeros_, tol);
  }

  static RationalFunction add(const RationalFunction& a, const RationalFunction& b,
                              const ToleranceConfig& tol = {}) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    // Least common denominator by matching pole multisets.
    RootList lcm = a.poles_;
    RootList extra_a;  // poles of b missing from a
    std::vector<bool> used(a.poles_.size(), false);
    for (const cplx& pb : b.poles_) {
      bool found = false;
      for (std::size_t i = 0; i < a.poles_.size(); ++i) {
        if (!used[i] && detail::roots_match(a.poles_[i], pb, tol.eps_cancel)) {
          used[i] = true;
          found = true;
          break;
        }
      }
      if (!found) {
        lcm.push_back(pb);
        extra_a.push_back(pb);
      }
    }
    RootList extra_b;  // poles of a missing from b
    for (std::size_t i = 0; i < a.poles_.size(); ++i)
      if (!used[i]) extra_b.push_back(a.poles_[i]);

    RootList za = a.zeros_;
    za.insert(za.end(), extra_a.begin(), extra_a.end());
    RootList zb = b.zeros_;
    zb.insert(zb.end(), extra_b.begin(), extra_b.end());
    const Polynomial na = Polynomial::from_roots(za, a.gain_);
    const Polynomial nb = Polynomial::from_roots(zb, b.gain_);
    const double scale = std::max(na.max_abs_coeff(), nb.max_abs_coeff());
    const std::size_t len = std::max(na.coeffs().size(), nb.coeffs().size());
    std::vector<double> c(len, 0.0);
    std::vector<double> mag(len, 0.0);  // |na| + |nb|, bounds the rounding in c
    for (std::size_t i = 0; i < na.coeffs().size(); ++i) {
      c[i] += na.coeffs()[i];
      mag[i] += std::abs(na.coeffs()[i]);
    }
    for (std::size_t i = 0; i < nb.coeffs().size(); ++i) {
      c[i] += nb.coeffs()[i];
      mag[i] += std::abs(nb.coeffs()[i]);
    }
    while (!c.empty() && std::abs(c.back()) <= tol.eps_trim * scale) {
      c.pop_back();
      mag.pop_back();
    }
    if (c.empty()) return RationalFunction();
    detail::deflate_known_poles(c, mag, lcm, 100.0 * tol.eps_trim);
    const Polynomial num(std::move(c), 0.0);
    return from_zpk(num.leading(), poly_roots(num), std::move(lcm), tol);
  }

  static RationalFunction mul(const RationalFunction& a, const RationalFunction& b,
                              const ToleranceConfig& tol = {}) {
    if (a.is_zero() || b.is_zero()) return RationalFunction();
    RootList z = a.zeros_;
    z.insert(z.end(), b.zeros_.begin(), b.zeros_.end());
    RootList p = a.poles_;
    p.insert(p.end(), b.poles_.begin(), b.poles_.end());
    return from_zpk(a.gain_ * b.gain_, std::move(z), std::move(p), tol);
  }

  static RationalFunction div(const RationalFunction& a, const RationalFunction& b,
                              const ToleranceConfig& tol = {}) {
    return mul(a, b.inverse(tol), tol);
  }

  friend RationalFunction operator+(const RationalFunction& a, const RationalFunction& b) {
    return add(a, b);
  }
  friend RationalFunction operator-(const RationalFunction& a, const RationalFunction& b) {
    return add(a, -b);
  }
  friend RationalFunction operator*(const RationalFunction& a, const RationalFunction& b) {
    return mul(a, b);
  }
  friend RationalFunction operator/(const RationalFunction& a, const RationalFunction& b) {
    return div(a, b);
  }

 private:
  double gain_ = 0.0;
  RootList zeros_;
  RootList poles_;
};

enum class ArithOp { kAdd, kSub, kMul, kDiv };

inline RationalFunction rf_arith(const RationalFunction& a, const RationalFunction& b,
                                 ArithOp op, const ToleranceConfig& tol = {}) {
  switch (op) {
    case ArithOp::kAdd: return RationalFunction::add(a, b, tol);
    case ArithOp::kSub: return RationalFunction::add(a, -b, tol);
    case ArithOp::kMul: return RationalFunction::mul(a, b, tol);
    case ArithOp::kDiv: return RationalFunction::div(a, b, tol);
  }
  return {};
}

inline int rf_relative_degree(const RationalFunction& r) { return r.relative_degree(); }

inline RationalClass rf_classify(const RationalFunction& r, double eps_stab = 1e-9) {
  return r.classify(eps_stab);
}

/// True when a and b agree at the given sample points to relative tolerance.
inline bool approx_equal(const RationalFunction& a, const RationalFunction& b,
                         std::span<const cplx> points, double rel_tol) {
  for (const cplx& s : points) {
    const cplx va = a.eval(s);
    const cplx vb = b.eval(s);
    if (std::abs(va - vb) > rel_tol * (1.0 + std::max(std::abs(va), std::abs(vb)))) return false;
  }
  return true;
}

inline std::ostream& operator<<(std::ostream& os, const Polynomial& p) {
  if (p.is_zero()) return os << "0";
  bool first = true;
  for (int k = p.degree(); k >= 0; --k) {
    const double c = p.coeff(k);
    if (c == 0.0) continue;
    if (!first) os << (c < 0 ? " - " : " + ");
    else if (c < 0) os << "-";
    const double a = std::abs(c);
    if (a != 1.0 || k == 0) os << a;
    if (k >= 1) os << "s";
    if (k >= 2) os << "^" << k;
    first = false;
  }
  return os;
}

inline std::ostream& operator<<(std::ostream& os, const RationalFunction& r) {
  return os << "(" << r.num() << ")/(" << r.den() << ")";
}

}  // namespace retrofit
