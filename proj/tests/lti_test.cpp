#include <gtest/gtest.h>

#include <random>

#include "retrofit/lti.hpp"

namespace retrofit {
namespace {

using Eigen::Index;

RationalFunction rf(std::vector<double> num, std::vector<double> den) {
  return {Polynomial(std::move(num)), Polynomial(std::move(den))};
}

// Random stable realization with eigenvalues in [-3, -0.3].
StateSpace random_stable(std::mt19937_64& rng, Index n, Index q, Index p, bool with_d = true) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd A = MatrixXd::NullaryExpr(n, n, [&] { return g(rng); });
  const double shift = linalg::spectral_abscissa(A);
  A -= (shift + 0.3 + 2.7 * std::uniform_real_distribution<double>(0, 1)(rng)) *
       MatrixXd::Identity(n, n);
  MatrixXd B = MatrixXd::NullaryExpr(n, q, [&] { return g(rng); });
  MatrixXd C = MatrixXd::NullaryExpr(p, n, [&] { return g(rng); });
  MatrixXd D = with_d ? MatrixXd(MatrixXd::NullaryExpr(p, q, [&] { return g(rng); }))
                      : MatrixXd(MatrixXd::Zero(p, q));
  return {A, B, C, D};
}

double rel_err(const MatrixXcd& a, const MatrixXcd& b) {
  return (a - b).norm() / (1.0 + b.norm());
}

TEST(SsToTf, DoubleIntegrator) {
  MatrixXd A(2, 2);
  A << 0, 1, 0, 0;
  const StateSpace sys{A, (MatrixXd(2, 1) << 0, 1).finished(), (MatrixXd(1, 2) << 1, 0).finished(),
                       MatrixXd::Zero(1, 1)};
  const TransferMatrix T = ss_to_tf(sys);
  EXPECT_EQ(T(0, 0).relative_degree(), 2);
  EXPECT_EQ(T(0, 0).poles().size(), 2u);
  EXPECT_EQ(T(0, 0).zeros().size(), 0u);
  EXPECT_NEAR(std::abs(T(0, 0).eval(cplx(0.5, 1.0)) - 1.0 / std::pow(cplx(0.5, 1.0), 2)), 0.0,
              1e-13);
}

TEST(SsToTf, StaticGain) {
  const TransferMatrix T = ss_to_tf(StateSpace::gain(MatrixXd::Constant(1, 1, 2.0)));
  EXPECT_EQ(T(0, 0).relative_degree(), 0);
  EXPECT_DOUBLE_EQ(T(0, 0).gain(), 2.0);
}

TEST(SsToTf, FirstOrderLag) {
  const StateSpace sys{MatrixXd::Constant(1, 1, -1), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1),
                       MatrixXd::Zero(1, 1)};
  const RationalFunction r = ss_to_tf(sys)(0, 0);
  ASSERT_EQ(r.poles().size(), 1u);
  EXPECT_NEAR(r.poles()[0].real(), -1.0, 1e-14);
  EXPECT_NEAR(r.gain(), 1.0, 1e-14);
}

TEST(TfToSs, FirstOrderLag) {
  const StateSpace sys = tf_to_ss(TransferMatrix::column({rf({1}, {1, 1})}));
  ASSERT_EQ(sys.states(), 1);
  EXPECT_NEAR(sys.A(0, 0), -1.0, 1e-14);
  EXPECT_NEAR((sys.B * sys.C)(0, 0), 1.0, 1e-14);
  EXPECT_EQ(sys.D(0, 0), 0.0);
  for (cplx s : imag_axis_points(20, 1)) {
    EXPECT_NEAR(std::abs(sys.eval(s)(0, 0) - 1.0 / (s + 1.0)), 0.0, 1e-12);
  }
}

TEST(TfToSs, ImproperThrows) {
  EXPECT_THROW(tf_to_ss(TransferMatrix::column({rf({1, 2, 1}, {2, 1})})), RetrofitError);
}

TEST(TfToSs, RoundtripRandom3x2) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const TransferMatrix T = ss_to_tf(random_stable(rng, 3, 2, 3));
    const StateSpace sys = tf_to_ss(T);
    const TransferMatrix back = ss_to_tf(sys);
    for (cplx s : imag_axis_points(20, 100 + trial)) {
      EXPECT_LT(rel_err(sys.eval(s), T.eval(s)), 1e-8);
      EXPECT_LT(rel_err(back.eval(s), T.eval(s)), 1e-8);
    }
  }
}

TEST(Conversions, FrequencyResponseConsistency) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const Index n = 1 + static_cast<Index>(rng() % 10);
    const StateSpace sys = random_stable(rng, n, 1 + rng() % 3, 1 + rng() % 3);
    const TransferMatrix T = ss_to_tf(sys);
    const StateSpace back = tf_to_ss(T);
    for (cplx s : imag_axis_points(20, trial)) {
      EXPECT_LT(rel_err(T.eval(s), sys.eval(s)), 1e-8) << "n=" << n;
      EXPECT_LT(rel_err(back.eval(s), sys.eval(s)), 1e-8) << "n=" << n;
    }
  }
}

TEST(TmEval, Examples) {
  const TransferMatrix lag = TransferMatrix::column({rf({1}, {1, 1})});
  EXPECT_NEAR(std::abs(tm_eval(lag, 0.0)(0, 0) - 1.0), 0.0, 1e-15);
  const MatrixXcd I = tm_eval(TransferMatrix::identity(2), cplx(3.0, -1.0));
  EXPECT_TRUE(I.isApprox(MatrixXcd::Identity(2, 2)));
  EXPECT_THROW(tm_eval(TransferMatrix::column({rf({1}, {0, 1})}), 0.0), RetrofitError);
}

TEST(NormalRank, Examples) {
  EXPECT_EQ(tm_normal_rank(TransferMatrix::column({rf({1}, {1, 1}), rf({1}, {2, 1})})), 1);
  EXPECT_EQ(tm_normal_rank(TransferMatrix::zero(3, 2)), 0);
  EXPECT_EQ(tm_normal_rank(TransferMatrix::identity(2)), 2);
}

TEST(NormalRank, InvariantUnderConstantTransforms) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    // 4x3 of rank 2
    const StateSpace a = random_stable(rng, 3, 2, 4, false);
    const MatrixXd E = MatrixXd::NullaryExpr(2, 3, [&] { return g(rng); });
    const TransferMatrix T = ss_to_tf(scaled_input(a, E));
    ASSERT_EQ(tm_normal_rank(T), 2);
    const MatrixXd M = MatrixXd::NullaryExpr(4, 4, [&] { return g(rng); });
    const MatrixXd N = MatrixXd::NullaryExpr(3, 3, [&] { return g(rng); });
    const TransferMatrix MTN = TransferMatrix::constant(M) * T * TransferMatrix::constant(N);
    EXPECT_EQ(tm_normal_rank(MTN, 99), 2);
  }
}

TEST(Youla, ZeroControllerGivesZero) {
  const TransferMatrix G = TransferMatrix::column({rf({1}, {1, 1}), rf({1}, {2, 1})});
  EXPECT_TRUE(youla_parameter(TransferMatrix::zero(1, 2), G).is_zero());
}

TEST(Youla, ZeroPlantGivesController) {
  const TransferMatrix K = TransferMatrix::row({rf({2, 1}, {3, 1}), rf({-1}, {1})});
  const TransferMatrix Q = youla_parameter(K, TransferMatrix::zero(2, 1));
  for (cplx s : imag_axis_points(10, 2)) EXPECT_LT(rel_err(Q.eval(s), K.eval(s)), 1e-14);
}

TEST(Youla, RoundtripRandom) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const TransferMatrix G = ss_to_tf(random_stable(rng, 3, 2, 2, false));
    const TransferMatrix K = ss_to_tf(random_stable(rng, 2, 2, 2));
    const TransferMatrix Q = youla_parameter(K, G);
    const TransferMatrix back = controller_from_youla(Q, G);
    for (cplx s : imag_axis_points(20, 50 + trial)) {
      EXPECT_LT(rel_err(back.eval(s), K.eval(s)), 1e-8);
      const MatrixXcd Kv = K.eval(s);
      const MatrixXcd ref = (MatrixXcd::Identity(2, 2) - Kv * G.eval(s)).inverse() * Kv;
      EXPECT_LT(rel_err(Q.eval(s), ref), 1e-8);
    }
  }
}

TEST(Youla, IllPosed) {
  // K G = 1 identically
  const TransferMatrix G = TransferMatrix::column({rf({1}, {1, 1})});
  const TransferMatrix K = TransferMatrix::column({rf({1, 1}, {1})});
  EXPECT_THROW(youla_parameter(K, G), RetrofitError);
}

TEST(InternalStability, Examples) {
  const TransferMatrix unstable = TransferMatrix::column({rf({1}, {-1, 1})});
  EXPECT_TRUE(internal_stability(unstable, TransferMatrix::constant(MatrixXd::Constant(1, 1, -2))));
  EXPECT_FALSE(internal_stability(unstable, TransferMatrix::zero(1, 1)));
  EXPECT_TRUE(internal_stability(TransferMatrix::column({rf({1}, {1, 1})}), TransferMatrix::zero(1, 1)));
}

TEST(InternalStability, GangOfFourByHand) {
  // G = 1/(s-1), K = -2: all four maps have the single pole -1.
  const TransferMatrix G = TransferMatrix::column({rf({1}, {-1, 1})});
  const GangOfFour g = gang_of_four(G, TransferMatrix::constant(MatrixXd::Constant(1, 1, -2)));
  for (const TransferMatrix* T : {&g.inv_KG_K, &g.inv_KG, &g.G_inv_KG, &g.inv_GK}) {
    for (const cplx p : (*T)(0, 0).poles()) EXPECT_NEAR(std::abs(p + 1.0), 0.0, 1e-10);
  }
  // (I-KG)^{-1} = (s-1)/(s+1)
  EXPECT_NEAR(std::abs(g.inv_KG(0, 0).eval(2.0) - 1.0 / 3.0), 0.0, 1e-14);
}

TEST(InternalStability, MatchesYoulaStabilityForStablePlants) {
  std::mt19937_64 rng(8);
  int stable_count = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const TransferMatrix G = ss_to_tf(random_stable(rng, 2, 1, 1, false));
    StateSpace k = random_stable(rng, 1, 1, 1);
    k.A(0, 0) += 1.5 * static_cast<double>(trial % 2);  // sometimes unstable
    const TransferMatrix K = ss_to_tf(k);
    const bool is = internal_stability(G, K);
    EXPECT_EQ(is, youla_parameter(K, G).is_stable());
    stable_count += is;
  }
  EXPECT_GT(stable_count, 0);
  EXPECT_LT(stable_count, 40);
}

PartitionedPlant small_plant() {
  MatrixXd A(3, 3);
  A << -1, 1, 0, 0, -2, 1, 0.5, 0, -3;
  return {A, (MatrixXd(3, 1) << 1, 0, 0).finished(), (MatrixXd(3, 1) << 0, 1, 1).finished(),
          (MatrixXd(1, 3) << 0, 0, 1).finished(), (MatrixXd(2, 3) << 1, 0, 0, 0, 1, 0).finished()};
}

TEST(PartitionedPlant, RejectsInconsistentDimensions) {
  EXPECT_THROW(PartitionedPlant(MatrixXd::Identity(2, 2), MatrixXd::Zero(3, 1), MatrixXd::Zero(2, 1),
                                MatrixXd::Zero(1, 2), MatrixXd::Zero(1, 2)),
               RetrofitError);
}

TEST(ClosedLoopMwv, ZeroControllerIsExact) {
  const PartitionedPlant G = small_plant();
  const TransferMatrix M = closed_loop_Mwv(G, TransferMatrix::zero(1, 2));
  const TransferMatrix Gwv = G.Gwv();
  ASSERT_EQ(M.rows(), Gwv.rows());
  EXPECT_EQ(M(0, 0).gain(), Gwv(0, 0).gain());
  EXPECT_EQ(M(0, 0).poles(), Gwv(0, 0).poles());
  EXPECT_EQ(M(0, 0).zeros(), Gwv(0, 0).zeros());
}

TEST(ClosedLoopMwv, NoInflowFromInputMeansNoChange) {
  // Gamma only sees state 1, which u cannot reach.
  MatrixXd A(2, 2);
  A << -1, 0, 0, -2;
  const PartitionedPlant G(A, (MatrixXd(2, 1) << 1, 1).finished(), (MatrixXd(2, 1) << 0, 1).finished(),
                           (MatrixXd(1, 2) << 1, 0).finished(), (MatrixXd(1, 2) << 0, 1).finished());
  const TransferMatrix K = TransferMatrix::column({rf({3}, {4, 1})});
  const TransferMatrix M = closed_loop_Mwv(G, K);
  for (cplx s : imag_axis_points(10, 3)) EXPECT_LT(rel_err(M.eval(s), G.Gwv().eval(s)), 1e-12);
}

TEST(ClosedLoopMwv, StateSpaceAgreesWithRational) {
  const PartitionedPlant G = small_plant();
  const StateSpace Kss{MatrixXd::Constant(1, 1, -4), (MatrixXd(1, 2) << 1, -1).finished(),
                       MatrixXd::Constant(1, 1, 0.7), (MatrixXd(1, 2) << 0.2, 0.1).finished()};
  const TransferMatrix M = closed_loop_Mwv(G, ss_to_tf(Kss));
  const StateSpace Mss = closed_loop_Mwv_ss(G, Kss);
  for (cplx s : imag_axis_points(20, 4)) EXPECT_LT(rel_err(M.eval(s), Mss.eval(s)), 1e-9);
}

TEST(Preexisting, ZeroEnvironment) {
  const PartitionedPlant G = small_plant();
  EXPECT_TRUE(preexisting_internally_stable(G, Environment::zero(1, 1)));
}

TEST(Preexisting, SmallGainEnvironment) {
  const PartitionedPlant G = small_plant();
  EXPECT_TRUE(preexisting_internally_stable(G, {StateSpace::gain(MatrixXd::Constant(1, 1, 0.1))}));
}

TEST(Preexisting, DestabilizingEnvironment) {
  // Scalar G: x' = -x + v, w = x. A static environment v = 1.5 w puts the
  // combined eigenvalue at +0.5.
  const PartitionedPlant G(MatrixXd::Constant(1, 1, -1), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1),
                           MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1));
  const Environment env{StateSpace::gain(MatrixXd::Constant(1, 1, 1.5))};
  const MatrixXd Acl = closed_loop_matrix(G, env, nullptr, ControllerInput::kOutput);
  EXPECT_NEAR(Acl(0, 0), 0.5, 1e-15);
  EXPECT_FALSE(preexisting_internally_stable(G, env));
  // Dynamic version: v = 3/(s+1) w has combined poles at -1 +- sqrt(3).
  const Environment dyn{{MatrixXd::Constant(1, 1, -1), MatrixXd::Ones(1, 1),
                         MatrixXd::Constant(1, 1, 3), MatrixXd::Zero(1, 1)}};
  const VectorXcd ev = linalg::eigenvalues(closed_loop_matrix(G, dyn, nullptr, ControllerInput::kOutput));
  EXPECT_NEAR(ev.real().maxCoeff(), -1.0 + std::sqrt(3.0), 1e-12);
  EXPECT_FALSE(preexisting_internally_stable(G, dyn));
}

TEST(StateSpaceTools, MinimalRealizationRemovesHiddenModes) {
  // Uncontrollable mode at -5 and unobservable mode at +1.
  MatrixXd A = MatrixXd::Zero(3, 3);
  A.diagonal() << -1, -5, 1;
  const StateSpace sys{A, (MatrixXd(3, 1) << 1, 0, 1).finished(), (MatrixXd(1, 3) << 1, 1, 0).finished(),
                       MatrixXd::Zero(1, 1)};
  const StateSpace min = minimal_realization(sys);
  EXPECT_EQ(min.states(), 1);
  for (cplx s : imag_axis_points(10, 5)) EXPECT_LT(rel_err(min.eval(s), sys.eval(s)), 1e-12);
  EXPECT_TRUE(tf_is_stable(sys, 1e-9));
  EXPECT_FALSE(stabilizable(sys.A, sys.B, 1e-9).ok == false);
  EXPECT_FALSE(detectable(sys.A, sys.C, 1e-9).ok);
}

TEST(StateSpaceTools, HiddenUnstableModeDetectedOnlyIfVisible) {
  MatrixXd A = MatrixXd::Zero(2, 2);
  A << -1, 0, 1, 2;  // mode +2 driven by mode -1 and observed
  const StateSpace sys{A, (MatrixXd(2, 1) << 1, 0).finished(), (MatrixXd(1, 2) << 0, 1).finished(),
                       MatrixXd::Zero(1, 1)};
  EXPECT_FALSE(tf_is_stable(sys, 1e-9));
  const StateSpace hidden{A, (MatrixXd(2, 1) << 1, 0).finished(), (MatrixXd(1, 2) << 1, 0).finished(),
                          MatrixXd::Zero(1, 1)};
  EXPECT_TRUE(tf_is_stable(hidden, 1e-9));
}

TEST(StateSpaceTools, YoulaLoopMatchesRational) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const StateSpace P = random_stable(rng, 3, 2, 2);
    StateSpace K = random_stable(rng, 2, 2, 2);
    K.D *= 0.1;
    const StateSpace Q = youla_loop(P, K);
    for (cplx s : imag_axis_points(10, trial)) {
      const MatrixXcd Kv = K.eval(s);
      const MatrixXcd ref = (MatrixXcd::Identity(2, 2) - Kv * P.eval(s)).inverse() * Kv;
      EXPECT_LT(rel_err(Q.eval(s), ref), 1e-10);
    }
  }
}

}  // namespace
}  // namespace retrofit
