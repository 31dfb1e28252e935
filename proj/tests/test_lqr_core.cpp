#include "lqrlab/lqr_core.hpp"

#include <gtest/gtest.h>

#include "lqrlab/certificates.hpp"
#include "lqrlab/errors.hpp"
#include "lqrlab/lyap_kernel.hpp"
#include "lqrlab/mass_spring.hpp"
#include "lqrlab/optimizers.hpp"
#include "lqrlab/sim_engine.hpp"
#include "test_util.hpp"

namespace lqrlab {
namespace {

MatrixXd m1(double v) { return MatrixXd::Constant(1, 1, v); }

const double kKstarScalar = 1.0 + std::sqrt(2.0);

Plant unit_scalar() { return scalar_plant(1, 1, 1, 1, 1); }

TEST(Plant, ValidatesShapesAndPositivity) {
  const MatrixXd I = MatrixXd::Identity(2, 2);
  EXPECT_THROW(Plant(MatrixXd::Zero(2, 3), I, I, I, I), Error);
  EXPECT_THROW(Plant(MatrixXd::Zero(2, 2), I, -I, I, I), Error);
  EXPECT_THROW(Plant(MatrixXd::Zero(2, 2), I, I, I, MatrixXd::Zero(2, 2)), Error);
}

TEST(Plant, ControllabilityRankRecorded) {
  EXPECT_TRUE(make_mass_spring(3).controllable());
  // second state unreachable
  MatrixXd A(2, 2);
  A << -1, 0, 0, -2;
  MatrixXd B(2, 1);
  B << 1, 0;
  const Plant p(A, B, MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1),
                MatrixXd::Identity(2, 2));
  EXPECT_EQ(p.controllability_rank(), 1);
  EXPECT_FALSE(p.controllable());
}

TEST(StateCovariance, ScalarChain) {
  const Plant p = unit_scalar();
  EXPECT_NEAR(state_covariance(p, m1(2.0))(0, 0), 0.5, 1e-14);
  EXPECT_THROW(state_covariance(p, m1(1.0)), NotStabilizingError);
}

TEST(StateCovariance, DecoupledIdentityPlant) {
  const MatrixXd I = MatrixXd::Identity(2, 2);
  const Plant p(MatrixXd::Zero(2, 2), I, I, I, I);
  EXPECT_TRUE(state_covariance(p, I).isApprox(0.5 * I, 1e-13));
}

TEST(CostToGo, ScalarAndRiccatiConsistency) {
  const Plant p = unit_scalar();
  EXPECT_NEAR(cost_to_go(p, m1(2.0))(0, 0), 2.5, 1e-14);
  const auto riccati = solve_riccati_kleinman(p);
  EXPECT_LE((cost_to_go(p, riccati.Kstar) - riccati.Pstar).norm(), 1e-8);
}

TEST(CostToGo, IdentityPlant) {
  const MatrixXd I = MatrixXd::Identity(2, 2);
  const Plant p(MatrixXd::Zero(2, 2), I, I, I, I);
  EXPECT_TRUE(cost_to_go(p, I).isApprox(I, 1e-13));
}

TEST(LqrCost, TotalFunctionWithInfinityEncoding) {
  const Plant p = unit_scalar();
  EXPECT_NEAR(lqr_cost(p, m1(2.0)).value, 2.5, 1e-14);
  const LqrCost at_boundary = lqr_cost(p, m1(1.0));
  EXPECT_FALSE(at_boundary.stabilizing());
  EXPECT_TRUE(std::isinf(at_boundary.value));
  EXPECT_NEAR(at_boundary.hurwitz_margin, 0.0, 1e-14);

  const MatrixXd I = MatrixXd::Identity(2, 2);
  const Plant dec(MatrixXd::Zero(2, 2), I, I, I, I);
  EXPECT_NEAR(lqr_cost(dec, I).value, 2.0, 1e-13);
}

TEST(LqrCost, XFormEqualsTracePOmegaForm) {
  const Plant p = make_mass_spring(2);
  const double f_star = (solve_riccati_kleinman(p).Pstar * p.Omega).trace();
  const auto gains = sample_sublevel_gains(p, 4.0 * f_star, 30, 99);
  for (const auto& K : gains) {
    const double via_x = lqr_cost(p, K).value;
    const double via_p = (cost_to_go(p, K) * p.Omega).trace();
    EXPECT_LE(std::abs(via_x - via_p), 1e-10 * std::abs(via_p));
  }
}

TEST(Gradient, ScalarValueAndStationarity) {
  const Plant p = unit_scalar();
  EXPECT_NEAR(gradient(p, m1(2.0))(0, 0), -0.5, 1e-13);
  EXPECT_LE(gradient(p, m1(kKstarScalar)).norm(), 1e-8);
  EXPECT_THROW(gradient(p, m1(0.5)), NotStabilizingError);
}

TEST(Gradient, MatchesCentralDifferences) {
  for (int s : {1, 2}) {
    const Plant p = make_mass_spring(s);
    const double f_star = (solve_riccati_kleinman(p).Pstar * p.Omega).trace();
    const auto gains = sample_sublevel_gains(p, 4.0 * f_star, 10, 7);
    const double h = 1e-5;
    for (const auto& K : gains) {
      const MatrixXd g = gradient(p, K);
      MatrixXd fd(p.m(), p.n());
      for (int i = 0; i < p.m(); ++i) {
        for (int j = 0; j < p.n(); ++j) {
          MatrixXd Kp = K, Km = K;
          Kp(i, j) += h;
          Km(i, j) -= h;
          fd(i, j) =
              (lqr_cost(p, Kp).value - lqr_cost(p, Km).value) / (2.0 * h);
        }
      }
      EXPECT_LE((fd - g).norm(), 1e-5 * g.norm());
    }
  }
}

TEST(HessianQuadraticForm, ScalarValues) {
  const Plant p = unit_scalar();
  EXPECT_NEAR(hessian_quadratic_form(p, m1(2.0), m1(1.0)), 2.0, 1e-12);
  EXPECT_NEAR(hessian_quadratic_form(p, m1(kKstarScalar), m1(1.0)),
              1.0 / std::sqrt(2.0), 1e-12);
}

TEST(HessianQuadraticForm, MatchesSecondDifferences) {
  const Plant p = make_mass_spring(2);
  const double f_star = (solve_riccati_kleinman(p).Pstar * p.Omega).trace();
  const auto gains = sample_sublevel_gains(p, 3.0 * f_star, 8, 11);
  const double h = 1e-4;
  Rng rng({101, 0});
  for (const auto& K : gains) {
    MatrixXd dir = test::random_matrix(p.m(), p.n(), rng);
    dir /= dir.norm();
    const double qf = hessian_quadratic_form(p, K, dir);
    const double f0 = lqr_cost(p, K).value;
    const double second = (lqr_cost(p, MatrixXd(K + h * dir)).value - 2.0 * f0 +
                           lqr_cost(p, MatrixXd(K - h * dir)).value) /
                          (h * h);
    EXPECT_LE(std::abs(second - qf), 1e-3 * std::max(std::abs(qf), 1e-8));
  }
}

TEST(HessianQuadraticForm, BilinearSymmetryByPolarization) {
  const Plant p = make_mass_spring(1);
  Rng rng({102, 0});
  const MatrixXd K = MatrixXd::Zero(p.m(), p.n());
  const MatrixXd U = test::random_matrix(p.m(), p.n(), rng);
  const MatrixXd V = test::random_matrix(p.m(), p.n(), rng);
  const double upv = hessian_quadratic_form(p, K, U + V);
  const double umv = hessian_quadratic_form(p, K, U - V);
  const double qu = hessian_quadratic_form(p, K, U);
  const double qv = hessian_quadratic_form(p, K, V);
  // parallelogram law of a symmetric bilinear form
  EXPECT_NEAR(upv + umv, 2.0 * (qu + qv), 1e-9 * (std::abs(qu) + std::abs(qv)));
}

TEST(HessianQuadraticForm, NegativeCurvatureOnCrossCoupledPlant) {
  // A = 0, B = -I plant whose stabilizing set is nonconvex: the segment
  // direction between the two cross-coupled gains has negative curvature
  // at the midpoint. Frozen value from the converged second-difference
  // oracle below.
  const int n = 2;
  const MatrixXd I = MatrixXd::Identity(n, n);
  const Plant p(MatrixXd::Zero(n, n), -I, I, I, I);
  const double eps = 0.1;
  MatrixXd K1(n, n), K2(n, n);
  K1 << -1, 2 - 2 * eps, 0, -1;
  K2 << -1, 0, 2 - 2 * eps, -1;
  const MatrixXd K3 = 0.5 * (K1 + K2);
  const MatrixXd J = (K1 - K2) / (K1 - K2).norm();

  const double qf = hessian_quadratic_form(p, K3, J);
  EXPECT_LT(qf, 0.0);
  EXPECT_NEAR(qf, -21.437673, 1e-4);

  const double h = 1e-5;
  const double f0 = lqr_cost(p, K3).value;
  const double second = (lqr_cost(p, MatrixXd(K3 + h * J)).value - 2.0 * f0 +
                         lqr_cost(p, MatrixXd(K3 - h * J)).value) /
                        (h * h);
  EXPECT_LE(std::abs(second - qf), 1e-5 * std::abs(qf));
}

TEST(HessianQuadraticForm, CovarianceOverrideAveragesToFullForm) {
  // E[x x^T] = Omega, and the form is linear in the covariance: averaging
  // the per-initial-condition form over the basis directions scaled by
  // Omega^{1/2} recovers the Omega form exactly.
  const Plant p = make_mass_spring(1);
  Rng rng({103, 0});
  const MatrixXd K = MatrixXd::Zero(p.m(), p.n());
  const MatrixXd J = test::random_matrix(p.m(), p.n(), rng);
  double sum = 0.0;
  for (int i = 0; i < p.n(); ++i) {
    const Eigen::VectorXd v = p.sqrt_omega().col(i);
    const MatrixXd vvT = v * v.transpose();
    sum += hessian_quadratic_form(p, K, J, &vvT);
  }
  EXPECT_NEAR(sum, hessian_quadratic_form(p, K, J), 1e-9 * std::abs(sum));
}

TEST(Kleinman, ScalarOptimum) {
  const auto sol = solve_riccati_kleinman(unit_scalar());
  EXPECT_NEAR(sol.Kstar(0, 0), kKstarScalar, 1e-10);
  EXPECT_NEAR(sol.Pstar(0, 0), kKstarScalar, 1e-10);
}

TEST(Kleinman, IdentityPlant) {
  const MatrixXd I = MatrixXd::Identity(3, 3);
  const Plant p(MatrixXd::Zero(3, 3), I, I, I, I);
  const auto sol = solve_riccati_kleinman(p);
  EXPECT_TRUE(sol.Pstar.isApprox(I, 1e-10));
  EXPECT_TRUE(sol.Kstar.isApprox(I, 1e-10));
}

TEST(Kleinman, IteratesFromGivenStartAreMonotone) {
  const Plant p = unit_scalar();
  // first two policy-iteration values from k = 2
  EXPECT_NEAR(cost_to_go(p, m1(2.0))(0, 0), 2.5, 1e-13);
  EXPECT_NEAR(cost_to_go(p, m1(2.5))(0, 0), 29.0 / 12.0, 1e-13);

  const auto sol = solve_riccati_kleinman(p, m1(2.0));
  EXPECT_NEAR(sol.Kstar(0, 0), kKstarScalar, 1e-10);
  EXPECT_THROW(solve_riccati_kleinman(p, m1(1.0)), NotStabilizingError);
}

TEST(Kleinman, ResidualContractOnChains) {
  for (int s : {1, 2, 5}) {
    const Plant p = make_mass_spring(s);
    const auto sol = solve_riccati_kleinman(p);
    EXPECT_LE(sol.residual, 1e-9 * p.Q.norm()) << "s=" << s;
  }
}

TEST(InitialStabilizingGain, HurwitzAUsesZero) {
  const Plant p = make_mass_spring(2);
  EXPECT_NEAR(initial_stabilizing_gain(p).norm(), 0.0, 0.0);
}

TEST(InitialStabilizingGain, BootstrapsUnstablePlants) {
  const Plant p = unit_scalar();  // A = 1 is unstable
  const MatrixXd K0 = initial_stabilizing_gain(p);
  EXPECT_TRUE(is_hurwitz(closed_loop(p, K0)).stable);
}

TEST(SuboptimalityIdentity, ScalarAndOptimum) {
  const Plant p = unit_scalar();
  const auto riccati = solve_riccati_kleinman(p);
  const auto [lhs, rhs] = suboptimality_identity(p, m1(2.0), riccati);
  EXPECT_NEAR(lhs, 2.5 - kKstarScalar, 1e-12);
  EXPECT_LE(std::abs(lhs - rhs), 1e-8 * (1.0 + std::abs(lhs)));

  const auto [l0, r0] = suboptimality_identity(p, riccati.Kstar, riccati);
  EXPECT_LE(std::abs(l0), 1e-10);
  EXPECT_LE(std::abs(r0), 1e-10);
}

TEST(SuboptimalityIdentity, RandomGainsOnChain) {
  const Plant p = make_mass_spring(2);
  const auto riccati = solve_riccati_kleinman(p);
  const double f_star = (riccati.Pstar * p.Omega).trace();
  for (const auto& K : sample_sublevel_gains(p, 4.0 * f_star, 20, 5)) {
    const auto [lhs, rhs] = suboptimality_identity(p, K, riccati);
    EXPECT_LE(std::abs(lhs - rhs), 1e-8 * (1.0 + std::abs(lhs)));
  }
}

TEST(StabilityRadius, ScalarIsExactlyTightOnTheLeft) {
  const Plant p = unit_scalar();
  EXPECT_NEAR(stability_radius(p, m1(2.0)), 1.0, 1e-13);
  // true stabilizing interval of k-hat is (1, 3): radius 1 touches it
  EXPECT_FALSE(is_hurwitz(closed_loop(p, m1(1.0))).stable);
  EXPECT_TRUE(is_hurwitz(closed_loop(p, m1(2.99))).stable);
}

TEST(StabilityRadius, IdentityPlantToleratesUnitBall) {
  const MatrixXd I = MatrixXd::Identity(2, 2);
  const Plant p(MatrixXd::Zero(2, 2), I, I, I, I);
  EXPECT_NEAR(stability_radius(p, I), 1.0, 1e-13);
}

TEST(StabilityRadius, MonteCarloPerturbationsStayStable) {
  const Plant p = make_mass_spring(2);
  const MatrixXd K = MatrixXd::Zero(p.m(), p.n());
  const double zeta = stability_radius(p, K);
  for (int trial = 0; trial < 200; ++trial) {
    Rng rng({104, static_cast<std::uint64_t>(trial)});
    MatrixXd D = test::random_matrix(p.m(), p.n(), rng);
    Eigen::BDCSVD<MatrixXd> svd(D);
    D *= 0.99 * zeta / svd.singularValues()(0);
    EXPECT_TRUE(is_hurwitz(closed_loop(p, MatrixXd(K + D))).stable);
  }
}

TEST(CriticalPoints, TinyGradientImpliesNearOptimal) {
  // Backtracking alone stalls near machine precision of f; a small-step
  // polish drives the gradient itself below 1e-10.
  for (int s : {1, 2}) {
    const Plant p = make_mass_spring(s);
    const double f_star = (solve_riccati_kleinman(p).Pstar * p.Omega).trace();
    const auto result = gradient_descent(p, MatrixXd::Zero(p.m(), p.n()),
                                         StepRule::backtracking(), 5000, 1e-9);
    MatrixXd K = result.K;
    double grad_norm = gradient(p, K).norm();
    double alpha = 1.0;
    for (int it = 0; it < 5000 && grad_norm > 0.5e-10 && alpha > 1e-14; ++it) {
      const MatrixXd K_next = K - alpha * gradient(p, K);
      if (lqr_cost(p, K_next).stabilizing() &&
          gradient(p, K_next).norm() < grad_norm) {
        K = K_next;
        grad_norm = gradient(p, K).norm();
        alpha *= 1.2;
      } else {
        alpha *= 0.5;
      }
    }
    ASSERT_LE(grad_norm, 1e-10);
    EXPECT_LE(lqr_cost(p, K).value - f_star, 1e-6);
  }
}

}  // namespace
}  // namespace lqrlab
