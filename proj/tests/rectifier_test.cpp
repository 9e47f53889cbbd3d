#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "retrofit/rectifier.hpp"
#include "test_util.hpp"

namespace retrofit {
namespace {

using testing::gaussian;

RationalFunction rf(std::vector<double> num, std::vector<double> den) {
  return {Polynomial(std::move(num)), Polynomial(std::move(den))};
}

const RationalFunction kLag1 = rf({1}, {1, 1});            // 1/(s+1)
const RationalFunction kLag1Sq = rf({1}, {1, 2, 1});       // 1/(s+1)^2
const RationalFunction kLag2 = rf({1}, {2, 1});            // 1/(s+2)

double rel_err(const MatrixXcd& a, const MatrixXcd& b) { return (a - b).norm() / (1.0 + b.norm()); }

// Four-state plant realizing Gyv = [1/(s+1)^2; 1/(s+2)].
PartitionedPlant worked_plant() {
  MatrixXd A = MatrixXd::Zero(4, 4);
  A << -1, 1, 0, 1,
        0, -1, 0, 0,
        0, 0, -2, 0,
        0, 0, 0, -3;
  MatrixXd L(4, 1);
  L << 0, 1, 1, 0;
  MatrixXd B(4, 1);
  B << 0, 0, 1, 1;
  MatrixXd Gamma(1, 4);
  Gamma << 0, 0, 1, 1;
  MatrixXd C(2, 4);
  C << 1, 0, 0, 0,
       0, 0, 1, 0;
  return {A, L, B, Gamma, C};
}

TEST(Assumption2, Examples) {
  const Assumption2Report ok = check_assumption2(TransferMatrix::column({kLag1, kLag2}));
  EXPECT_TRUE(ok.ok);
  const Assumption2Report square = check_assumption2(TransferMatrix::column({kLag1}));
  EXPECT_FALSE(square.ok);
  EXPECT_EQ(square.status, Assumption2Status::kRightInvertible);
  EXPECT_NE(square.reason.find("only trivial controller K=0"), std::string::npos);
  const Assumption2Report redundant = check_assumption2(TransferMatrix::row({kLag1, rf({2}, {1, 1})}));
  EXPECT_FALSE(redundant.ok);
  EXPECT_EQ(redundant.status, Assumption2Status::kRankDeficient);
  EXPECT_EQ(redundant.normal_rank, 1);
  EXPECT_NE(redundant.reason.find("factorization"), std::string::npos);
}

TEST(SelectPartition, WorkedExamplePicksSecondRow) {
  const TransferMatrix Gyv = TransferMatrix::column({kLag1Sq, kLag2});
  // Both candidate inversions by hand: row 2 gives (s+2)/(s+1)^2, row 1 gives (s+1)^2/(s+2).
  EXPECT_EQ(gg_inverse(Gyv, OutputPartition::from_index_set(2, {1}))(0, 0).relative_degree(), 1);
  EXPECT_EQ(gg_inverse(Gyv, OutputPartition::from_index_set(2, {0}))(0, 0).relative_degree(), -1);
  const PartitionResult res = select_partition(Gyv, {.exhaustive = true});
  EXPECT_EQ(res.partition.index_set, std::vector<int>{1});
  EXPECT_EQ(res.exchanges, 1);
  ASSERT_EQ(res.valid_sets.size(), 1u);
  EXPECT_EQ(res.valid_sets[0], std::vector<int>{1});
}

TEST(SelectPartition, TieBrokenToLowestIndex) {
  const PartitionResult res = select_partition(TransferMatrix::column({kLag1, kLag2}), {.exhaustive = true});
  EXPECT_EQ(res.partition.index_set, std::vector<int>{0});
  EXPECT_EQ(res.exchanges, 0);
  EXPECT_EQ(res.valid_sets.size(), 2u);
}

TEST(SelectPartition, FourByTwoExchange) {
  // g3 = h11 g1 + h12 g2 with r11 = -2, so g1 must leave the basis for g3.
  const TransferMatrix Gyv(4, 2, {rf({1}, {1, 3, 3, 1}), RationalFunction(),
                                  RationalFunction(), kLag2,
                                  kLag1, rf({1}, {3, 1}),
                                  rf({1}, {4, 1}), rf({1}, {4, 4, 1})});
  const TransferMatrix H0 = gg_inverse(Gyv, OutputPartition::from_index_set(4, {0, 1}));
  EXPECT_EQ(H0(0, 0).relative_degree(), -2);
  EXPECT_EQ(H0(0, 1).relative_degree(), 0);
  const PartitionResult res = select_partition(Gyv, {.exhaustive = true});
  EXPECT_EQ(res.partition.index_set, (std::vector<int>{1, 2}));
  EXPECT_GE(res.exchanges, 1);
  EXPECT_TRUE(gg_inverse(Gyv, res.partition).is_proper());
  EXPECT_NE(std::find(res.valid_sets.begin(), res.valid_sets.end(), res.partition.index_set),
            res.valid_sets.end());
}

TEST(SelectPartition, RejectsAssumption2Violations) {
  EXPECT_THROW(select_partition(TransferMatrix::column({kLag1})), RetrofitError);
}

TEST(BuildRectifier, WorkedExample) {
  const TransferMatrix Gyv = TransferMatrix::column({kLag1Sq, kLag2});
  const Rectifier rect = build_rectifier(Gyv, OutputPartition::from_index_set(2, {1}));
  ASSERT_TRUE(rect.R.has_value());
  const TransferMatrix& R = *rect.R;
  ASSERT_EQ(R.rows(), 1);
  ASSERT_EQ(R.cols(), 2);
  // R = [1, -(s+2)/(s+1)^2]
  const RationalFunction expected = -rf({2, 1}, {1, 2, 1});
  for (cplx s : imag_axis_points(20, 3)) {
    EXPECT_NEAR(std::abs(R(0, 0).eval(s) - 1.0), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(R(0, 1).eval(s) - expected.eval(s)), 0.0, 1e-12);
    EXPECT_LT((R.eval(s) * Gyv.eval(s)).norm(), 1e-13);
    EXPECT_LT(rel_err(rect.realization.eval(s), R.eval(s)), 1e-12);
  }
  EXPECT_TRUE(R.is_proper());
}

TEST(BuildRectifier, ImproperPartitionRejected) {
  const TransferMatrix Gyv = TransferMatrix::column({kLag1Sq, kLag2});
  EXPECT_THROW(build_rectifier(Gyv, OutputPartition::from_index_set(2, {0})), RetrofitError);
}

TEST(BuildRectifier, SingleSurvivingOutput) {
  std::mt19937_64 rng(1);
  const PartitionedPlant G = testing::random_plant(rng, {5, 3, 1, 4, 1});
  const Rectifier rect = build_rectifier(G, select_partition(G.Gyv()).partition);
  EXPECT_EQ(rect.R->rows(), 1);
  EXPECT_EQ(rect.R->cols(), 4);
  EXPECT_EQ(rect.realization.outputs(), 1);
}

TEST(BuildRectifier, UnimodularCompletion) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const PartitionedPlant G = testing::random_plant(rng, testing::random_dims(rng, 6, 4));
    const TransferMatrix Gyv = G.Gyv();
    const OutputPartition part = select_partition(G).partition;
    const Rectifier rect = build_rectifier(G, part);
    // S = [R; PiBar], S^{-1} = [Pi^T, Gyv Gybar^{-1}]
    const TransferMatrix S = vstack(*rect.R, TransferMatrix::constant(part.PiBar));
    const TransferMatrix GGinv = Gyv * rect.gybar_v->inverse();
    const TransferMatrix Sinv = hstack(TransferMatrix::constant(part.PiDagger()), GGinv);
    EXPECT_TRUE(S.is_proper());
    EXPECT_TRUE(Sinv.is_proper());
    const Eigen::Index p = G.p();
    for (cplx s : imag_axis_points(10, 40 + trial)) {
      EXPECT_LT((Sinv.eval(s) * S.eval(s) - MatrixXcd::Identity(p, p)).norm(), 1e-7);
    }
  }
}

TEST(BuildRectifierMeasured, ScalarLag) {
  const PartitionedPlant G(MatrixXd::Constant(1, 1, -1), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1),
                           MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1));
  const Rectifier rect = build_rectifier_measured(G);
  ASSERT_TRUE(rect.measured);
  const TransferMatrix& R = *rect.R;
  for (cplx s : imag_axis_points(10, 4)) {
    EXPECT_NEAR(std::abs(R(0, 0).eval(s) - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(R(0, 1).eval(s) + 1.0 / (s + 1.0)), 0.0, 1e-14);
  }
  EXPECT_LT(nullspace_residual(G, rect), 1e-14);
}

TEST(BuildRectifierMeasured, ZeroInteraction) {
  const PartitionedPlant G(MatrixXd::Constant(2, 2, 0) - MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 1),
                           MatrixXd::Ones(2, 1), MatrixXd::Ones(1, 2), MatrixXd::Identity(2, 2));
  const Rectifier rect = build_rectifier_measured(G);
  for (cplx s : imag_axis_points(5, 5)) {
    MatrixXcd expected = MatrixXcd::Zero(2, 3);
    expected.leftCols(2) = MatrixXcd::Identity(2, 2);
    EXPECT_LT((rect.R->eval(s) - expected).norm(), 1e-15);
    EXPECT_LT((rect.realization.eval(s) - expected).norm(), 1e-15);
  }
}

TEST(BuildRectifierMeasured, RandomAnnihilation) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const PartitionedPlant G = testing::random_plant(rng, {4, 2, 1, 3, 1});
    const Rectifier rect = build_rectifier_measured(G);
    const TransferMatrix stacked = vstack(G.Gyv(), TransferMatrix::identity(2));
    for (cplx s : imag_axis_points(20, trial)) {
      EXPECT_LT((rect.R->eval(s) * stacked.eval(s)).norm() / (1.0 + stacked.eval(s).norm()), 1e-9);
    }
  }
}

TEST(RectifiedPlant, WorkedExample) {
  const PartitionedPlant G = worked_plant();
  EXPECT_EQ(rectified_plant(G, build_rectifier_measured(G)).rows(), 2);
  const OutputPartition part = OutputPartition::from_index_set(2, {1});
  // Symbolic path is exact here; the plant path goes through eigenvalues of
  // a defective double pole and is only good to about sqrt(eps).
  const TransferMatrix P_sym = rectified_plant(G, build_rectifier(G.Gyv(), part));
  const TransferMatrix P_nf = rectified_plant(G, build_rectifier(G, part));
  const StateSpace P_ss = rectified_plant_ss(G, build_rectifier(G, part));
  ASSERT_EQ(P_sym.rows(), 1);
  // R Gyu = 1/((s+1)(s+3)) - 1/(s+1)^2 = -2/((s+1)^2 (s+3))
  for (cplx s : imag_axis_points(10, 7)) {
    const cplx expected = -2.0 / ((s + 1.0) * (s + 1.0) * (s + 3.0));
    EXPECT_NEAR(std::abs(P_sym(0, 0).eval(s) - expected), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(P_nf(0, 0).eval(s) - expected), 0.0, 1e-7);
    EXPECT_NEAR(std::abs(P_ss.eval(s)(0, 0) - expected), 0.0, 1e-12);
  }
}

TEST(RelativeDegree, Examples) {
  MatrixXd A(2, 2);
  A << 0, 1, 0, 0;
  const MatrixXd L = (MatrixXd(2, 1) << 0, 1).finished();
  EXPECT_EQ(relative_degree(A, L, (MatrixXd(1, 2) << 1, 0).finished()), std::vector<int>{2});
  EXPECT_EQ(relative_degree(A, L, (MatrixXd(1, 2) << 0, 1).finished()), std::vector<int>{1});
  MatrixXd A2(2, 2);
  A2 << 0, 1, -2, -3;
  const MatrixXd c = (MatrixXd(1, 2) << 1, 0).finished();
  EXPECT_EQ(relative_degree(A2, L, c), std::vector<int>{2});
  EXPECT_NEAR((c * A2 * L)(0, 0), 1.0, 1e-15);
}

TEST(RelativeDegree, Undefined) {
  MatrixXd A = -MatrixXd::Identity(2, 2);
  const MatrixXd L = (MatrixXd(2, 1) << 0, 1).finished();
  EXPECT_THROW(relative_degree(A, L, (MatrixXd(1, 2) << 1, 0).finished()), RetrofitError);
  // Both outputs see v only through the same direction: singular decoupling.
  const MatrixXd L2 = (MatrixXd(2, 2) << 1, 1, 0, 0).finished();
  EXPECT_THROW(relative_degree(A, L2, MatrixXd::Identity(2, 2)), RetrofitError);
}

TEST(NormalForm, AnnihilationConstraintsAndDimensions) {
  std::mt19937_64 rng(8);
  int built = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const PartitionedPlant G = trial % 2 == 0 ? testing::random_plant(rng, testing::random_dims(rng))
                                              : testing::improper_naive_plant(rng, 7, 1, 3);
    const OutputPartition part = select_partition(G.Gyv()).partition;
    const NormalForm nf = normal_form(G, part);
    ++built;
    EXPECT_LT((nf.Tbar * G.L()).norm(), 1e-10 * (1.0 + G.L().norm()));
    EXPECT_LT((part.PiBar * G.C() * nf.Tbar_dag).norm(), 1e-10 * (1.0 + G.C().norm()) * nf.condition);
    EXPECT_EQ(nf.xi_dim() + nf.z_dim(), G.n());
    EXPECT_EQ(nf.A_zz.rows(), nf.z_dim());
  }
  EXPECT_EQ(built, 30);
}

TEST(NormalForm, RelativeDegreeFillsStateSpace) {
  // Chain of three lags driven at the far end: r = n, no zero dynamics.
  MatrixXd A(3, 3);
  A << -1, 1, 0, 0, -1, 1, 0, 0, -1;
  const MatrixXd L = MatrixXd::Identity(3, 3).col(2);
  MatrixXd C(2, 3);
  C << 1, 0, 0, 0, 0, 1;
  const PartitionedPlant G(A, L, L, L.transpose(), C);
  const NormalForm nf = normal_form(G, OutputPartition::from_index_set(2, {0}));
  EXPECT_EQ(nf.rel_deg, std::vector<int>{3});
  EXPECT_EQ(nf.z_dim(), 0);

  // Same situation on random engineered plants with n = 3, m = 1.
  std::mt19937_64 rng(81);
  for (int trial = 0; trial < 10; ++trial) {
    const PartitionedPlant Gr = testing::improper_naive_plant(rng, 3, 1, 3);
    EXPECT_EQ(normal_form(Gr, OutputPartition::from_index_set(3, {0})).z_dim(), 0);
  }
}

TEST(NormalForm, XiIdentityAlongTrajectory) {
  // Inputs come from an oscillator exosystem so that every derivative of u
  // and ybar follows from the augmented dynamics.
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const PartitionedPlant G = testing::improper_naive_plant(rng, 7, 1, 3, 2);
    const OutputPartition part = OutputPartition::from_index_set(3, {0});  // relative degree 3
    const NormalForm nf = normal_form(G, part);
    ASSERT_EQ(nf.rel_deg, std::vector<int>{3});
    const Eigen::Index n = G.n();
    const Eigen::Index ne = 4;
    MatrixXd S = MatrixXd::Zero(ne, ne);
    S << 0, 1.3, 0, 0, -1.3, 0, 0, 0, 0, 0, -0.2, 0.7, 0, 0, -0.7, -0.2;
    const MatrixXd Cu = gaussian(rng, G.q(), ne);
    const MatrixXd Cv = gaussian(rng, G.m(), ne);
    MatrixXd Aaug = MatrixXd::Zero(n + ne, n + ne);
    Aaug.topLeftCorner(n, n) = G.A();
    Aaug.topRightCorner(n, ne) = G.L() * Cv + G.B() * Cu;
    Aaug.bottomRightCorner(ne, ne) = S;
    const VectorXd z0 = gaussian(rng, n + ne, 1);
    MatrixXd ybar_out = MatrixXd::Zero(G.m(), n + ne);
    ybar_out.leftCols(n) = part.PiBar * G.C();
    MatrixXd u_out = MatrixXd::Zero(G.q(), n + ne);
    u_out.rightCols(ne) = Cu;
    for (double t : {0.0, 0.37, 1.1, 2.9}) {
      const VectorXd z = (Aaug * t).exp() * z0;
      VectorXd rhs = VectorXd::Zero(nf.xi_dim());
      MatrixXd Ak = MatrixXd::Identity(n + ne, n + ne);
      for (std::size_t k = 0; k < std::max(nf.Dybar.size(), nf.Du.size()); ++k) {
        if (k < nf.Dybar.size()) rhs += nf.Dybar[k] * (ybar_out * Ak * z);
        if (k < nf.Du.size()) rhs -= nf.Du[k] * (u_out * Ak * z);
        Ak = Ak * Aaug;
      }
      const VectorXd lhs = nf.T * z.head(n);
      EXPECT_LT((lhs - rhs).norm(), 1e-9 * (1.0 + lhs.norm())) << "t=" << t;
    }
  }
}

TEST(NormalFormRealizations, WorkedExample) {
  const PartitionedPlant G = worked_plant();
  const OutputPartition part = OutputPartition::from_index_set(2, {1});
  const NormalForm nf = normal_form(G, part);
  const TransferMatrix H = realize_gg_inv_nf(nf);
  const TransferMatrix P = realize_rectified_plant_nf(nf);
  for (cplx s : imag_axis_points(20, 10)) {
    EXPECT_NEAR(std::abs(H(0, 0).eval(s) - (s + 2.0) / ((s + 1.0) * (s + 1.0))), 0.0, 1e-10);
    EXPECT_NEAR(std::abs(P(0, 0).eval(s) + 2.0 / ((s + 1.0) * (s + 1.0) * (s + 3.0))), 0.0, 1e-10);
  }
}

void expect_poles_in(const TransferMatrix& T, const VectorXcd& eig, double tol) {
  for (Eigen::Index i = 0; i < T.rows(); ++i)
    for (Eigen::Index j = 0; j < T.cols(); ++j)
      for (const cplx p : T(i, j).poles()) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < eig.size(); ++k) best = std::min(best, std::abs(eig(k) - p));
        EXPECT_LT(best, tol * (1.0 + std::abs(p))) << "pole " << p;
      }
}

// Rational-path products G_sel Gybar^{-1} and (Pi - H PiBar) Gyu, formed
// pointwise from the rational plant blocks.
struct PointwiseProducts {
  MatrixXcd H, P;
};

PointwiseProducts rational_products(const TransferMatrix& Gyv, const TransferMatrix& Gyu,
                                    const OutputPartition& part, cplx s) {
  const MatrixXcd g = Gyv.eval(s);
  const MatrixXcd gu = Gyu.eval(s);
  const MatrixXcd Pi = part.Pi.cast<cplx>();
  const MatrixXcd PiBar = part.PiBar.cast<cplx>();
  PointwiseProducts out;
  out.H = (Pi * g) * (PiBar * g).partialPivLu().inverse();
  out.P = Pi * gu - out.H * (PiBar * gu);
  return out;
}

TEST(NormalFormRealizations, CrossPathAgreement) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const PartitionedPlant G = trial % 2 == 0 ? testing::random_plant(rng, testing::random_dims(rng, 6, 4))
                                              : testing::improper_naive_plant(rng, 7, 1, 3);
    const TransferMatrix Gyv = G.Gyv();
    const TransferMatrix Gyu = G.Gyu();
    const OutputPartition part = select_partition(G).partition;
    const NormalForm nf = normal_form(G, part);
    const StateSpace h = realize_gg_inv_nf_ss(nf);
    const StateSpace pr = realize_rectified_plant_nf_ss(nf);
    for (cplx s : imag_axis_points(20, 100 + trial)) {
      const PointwiseProducts ref = rational_products(Gyv, Gyu, part, s);
      EXPECT_LT(rel_err(h.eval(s), ref.H), 1e-6);
      EXPECT_LT(rel_err(pr.eval(s), ref.P), 1e-6);
    }
    const VectorXcd eig = linalg::eigenvalues(nf.A_zz);
    expect_poles_in(realize_gg_inv_nf(nf), eig, 1e-6);
    expect_poles_in(realize_rectified_plant_nf(nf), eig, 1e-6);
  }
}

TEST(MinimumPhase, Examples) {
  EXPECT_TRUE(is_minimum_phase(TransferMatrix::column({kLag2})));
  EXPECT_FALSE(is_minimum_phase(TransferMatrix::column({rf({-1, 1}, {4, 4, 1})})));
  const TransferMatrix D(2, 2, {kLag1, RationalFunction(), RationalFunction(), rf({3, 1}, {4, 4, 1})});
  EXPECT_TRUE(is_minimum_phase(D));
  EXPECT_THROW(is_minimum_phase(TransferMatrix(2, 2, {kLag1, kLag1, kLag1, kLag1})), RetrofitError);
}

TEST(RectifierProperties, NullspaceIdentityRandomPlants) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const PartitionedPlant G = testing::random_plant(rng, testing::random_dims(rng));
    const Rectifier rect = build_rectifier(G, select_partition(G).partition);
    const StateSpace gyv = G.gyv_ss();
    for (cplx s : imag_axis_points(20, 500 + trial)) {
      const MatrixXcd g = gyv.eval(s);
      EXPECT_LE((rect.R->eval(s) * g).norm(), 1e-7 * (1.0 + g.norm())) << "trial " << trial;
      EXPECT_LE((rect.realization.eval(s) * g).norm(), 1e-7 * (1.0 + g.norm())) << "trial " << trial;
    }
  }
}

TEST(RectifierProperties, SymbolicPathLowOrder) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 30; ++trial) {
    const PartitionedPlant G = testing::random_plant(rng, testing::random_dims(rng, 4, 3));
    const TransferMatrix Gyv = G.Gyv();
    const Rectifier rect = build_rectifier(Gyv, select_partition(Gyv).partition);
    const StateSpace gyv = G.gyv_ss();
    for (cplx s : imag_axis_points(20, 900 + trial)) {
      const MatrixXcd g = gyv.eval(s);
      EXPECT_LE((rect.R->eval(s) * g).norm(), 1e-7 * (1.0 + g.norm())) << "trial " << trial;
    }
  }
}

TEST(RectifierProperties, SeedChangesKeepValidity) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const PartitionedPlant G = testing::random_plant(rng, testing::random_dims(rng, 6, 4));
    const TransferMatrix Gyv = G.Gyv();
    for (std::uint64_t seed : {1ull, 77ull}) {
      const Rectifier rect = build_rectifier(G, select_partition(Gyv, {.seed = seed}).partition);
      EXPECT_LT(nullspace_residual(G, rect, seed), 1e-7);
    }
  }
}

TEST(RectifierProperties, C1Exact) {
  const OutputPartition part = OutputPartition::from_index_set(5, {3, 1});
  const MatrixXd sum = part.PiDagger() * part.Pi + part.PiBarDagger() * part.PiBar;
  EXPECT_TRUE((sum.array() == MatrixXd::Identity(5, 5).array()).all());
}

TEST(StateSpacePath, MatchesRationalPartitionAndRectifier) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const PartitionedPlant G = testing::improper_naive_plant(rng, 8, 1 + trial % 2, 4);
    const PartitionResult rat = select_partition(G.Gyv());
    const PartitionResult ss = select_partition(G);
    EXPECT_EQ(rat.partition.index_set, ss.partition.index_set);
    const Rectifier rect = build_rectifier_ss(G, ss.partition);
    EXPECT_LT(nullspace_residual(G, rect), 1e-8);
  }
}

}  // namespace
}  // namespace retrofit
