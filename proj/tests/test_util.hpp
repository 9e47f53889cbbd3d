#pragma once

// Random plant generators shared by the unit tests and the acceptance runner.

#include <random>

#include "retrofit/lti.hpp"

namespace retrofit::testing {

using Eigen::Index;

inline MatrixXd gaussian(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> g(0.0, 1.0);
  return MatrixXd::NullaryExpr(r, c, [&] { return g(rng); });
}

/// Random Hurwitz matrix with spectral abscissa in [-3, -0.3].
inline MatrixXd random_hurwitz(std::mt19937_64& rng, Index n) {
  MatrixXd A = gaussian(rng, n, n) / std::sqrt(static_cast<double>(std::max<Index>(n, 1)));
  const double target = -0.3 - 2.7 * std::uniform_real_distribution<double>(0, 1)(rng);
  A += (target - linalg::spectral_abscissa(A)) * MatrixXd::Identity(n, n);
  return A;
}

inline StateSpace random_stable_ss(std::mt19937_64& rng, Index n, Index q, Index p, bool with_d = true) {
  return {random_hurwitz(rng, n), gaussian(rng, n, q), gaussian(rng, p, n),
          with_d ? gaussian(rng, p, q) : MatrixXd(MatrixXd::Zero(p, q))};
}

struct PlantDims {
  Index n, m, q, p, w;
};

inline PlantDims random_dims(std::mt19937_64& rng, Index max_n = 8, Index max_p = 5) {
  auto pick = [&](Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); };
  PlantDims d{};
  d.p = pick(2, max_p);
  d.m = pick(1, d.p - 1);
  d.n = pick(std::max<Index>(d.m, 2), max_n);
  d.q = pick(1, 2);
  d.w = pick(1, 2);
  return d;
}

inline PartitionedPlant random_plant(std::mt19937_64& rng, const PlantDims& d) {
  return {random_hurwitz(rng, d.n), gaussian(rng, d.n, d.m), gaussian(rng, d.n, d.q),
          gaussian(rng, d.w, d.n), gaussian(rng, d.p, d.n)};
}

/// Plant whose first m outputs have relative degree 3 from v while the rest
/// have relative degree 1, so the lowest-index choice of inversion rows yields
/// an improper H.
inline PartitionedPlant improper_naive_plant(std::mt19937_64& rng, Index n, Index m, Index p, Index q = 1) {
  const MatrixXd A = random_hurwitz(rng, n);
  const MatrixXd L = gaussian(rng, n, m);
  MatrixXd C = gaussian(rng, p, n);
  const MatrixXd K = linalg::hstack(L, A * L);  // rows of C orthogonal to it
  const MatrixXd N = linalg::left_null_space(K, 1e-12);
  for (Index i = 0; i < m; ++i) C.row(i) = gaussian(rng, 1, N.rows()) * N;
  return {A, L, gaussian(rng, n, q), gaussian(rng, 1, n), C};
}

}  // namespace retrofit::testing
