#include "lqrlab/convex_param.hpp"

#include <gtest/gtest.h>

#include "lqrlab/certificates.hpp"
#include "lqrlab/errors.hpp"
#include "lqrlab/mass_spring.hpp"
#include "test_util.hpp"

namespace lqrlab {
namespace {

MatrixXd m1(double v) { return MatrixXd::Constant(1, 1, v); }

Plant unit_scalar() { return scalar_plant(1, 1, 1, 1, 1); }

TEST(XOfY, ScalarAffineMap) {
  const ConvexParam param(unit_scalar());
  const YPoint feasible = param.x_of_y(m1(1.0));
  EXPECT_NEAR(feasible.X(0, 0), 0.5, 1e-14);
  EXPECT_TRUE(feasible.feasible);

  const YPoint infeasible = param.x_of_y(m1(0.25));
  EXPECT_NEAR(infeasible.X(0, 0), -0.25, 1e-14);
  EXPECT_FALSE(infeasible.feasible);
}

TEST(XOfY, SingularOpenLoopNeedsShift) {
  const Plant p = scalar_plant(0, 1, 1, 1, 1);  // A = 0: the map vanishes
  EXPECT_THROW(ConvexParam{p}, SingularOperatorError);
  const ConvexParam shifted(p, m1(1.0));  // A - B K0 = -1
  EXPECT_TRUE(shifted.x_of_y(shifted.y_from_k(m1(2.0)).Y).feasible);
}

TEST(HCost, ScalarValuesAndInfeasibleInfinity) {
  const ConvexParam param(unit_scalar());
  EXPECT_NEAR(param.h_cost(m1(1.0)), 2.5, 1e-13);
  EXPECT_TRUE(std::isinf(param.h_cost(m1(0.25))));
}

TEST(HCost, ShiftRoundTripOnCrossCoupledPlant) {
  // A = 0, B = -I needs the change of variables; the shifted objective
  // must agree with the gain-space cost.
  const int n = 2;
  const MatrixXd I = MatrixXd::Identity(n, n);
  const Plant p(MatrixXd::Zero(n, n), -I, I, I, I);
  const MatrixXd K0 = -I;  // A - B K0 = -I, stabilizing
  const ConvexParam param(p, K0);

  const MatrixXd K = -2.0 * I;
  const YPoint y = param.y_from_k(K);
  EXPECT_NEAR(param.h_cost(y), lqr_cost(p, K).value, 1e-12);
  EXPECT_TRUE(param.k_from_y(param.x_of_y(y.Y)).K.isApprox(K, 1e-10));
}

TEST(GradH, ScalarValueAndStationarity) {
  const Plant p = unit_scalar();
  const ConvexParam param(p);
  EXPECT_NEAR(param.grad_h(m1(1.0))(0, 0), 1.0, 1e-12);

  const auto riccati = solve_riccati_kleinman(p);
  const YPoint ystar = param.y_from_k(riccati.Kstar);
  EXPECT_LE(param.grad_h(ystar.Y).norm(), 1e-8);
  EXPECT_THROW(param.grad_h(m1(0.25)), Error);
}

TEST(GradH, MatchesCentralDifferences) {
  const Plant p = make_mass_spring(2);
  const ConvexParam param(p);
  const double f_star = (solve_riccati_kleinman(p).Pstar * p.Omega).trace();
  const double h = 1e-5;
  for (const auto& K : sample_sublevel_gains(p, 4.0 * f_star, 8, 21)) {
    const MatrixXd Y = param.y_from_k(K).Y;
    const MatrixXd g = param.grad_h(Y);
    MatrixXd fd(p.m(), p.n());
    for (int i = 0; i < p.m(); ++i) {
      for (int j = 0; j < p.n(); ++j) {
        MatrixXd Yp = Y, Ym = Y;
        Yp(i, j) += h;
        Ym(i, j) -= h;
        fd(i, j) = (param.h_cost(Yp) - param.h_cost(Ym)) / (2.0 * h);
      }
    }
    EXPECT_LE((fd - g).norm(), 1e-5 * g.norm());
  }
}

TEST(HessianH, ScalarValueAndZeroDirection) {
  const ConvexParam param(unit_scalar());
  EXPECT_NEAR(param.hessian_quadratic_form(m1(1.0), m1(1.0)), 4.0, 1e-12);
  EXPECT_NEAR(param.hessian_quadratic_form(m1(1.0), m1(0.0)), 0.0, 1e-15);
}

TEST(HessianH, NonnegativeOnFeasibleSet) {
  const Plant p = make_mass_spring(1);
  const ConvexParam param(p);
  const double f_star = (solve_riccati_kleinman(p).Pstar * p.Omega).trace();
  const auto gains = sample_sublevel_gains(p, 5.0 * f_star, 25, 31);
  Rng rng({31, 999});
  for (const auto& K : gains) {
    const MatrixXd Y = param.y_from_k(K).Y;
    for (int k = 0; k < 4; ++k) {
      const MatrixXd dir = test::random_matrix(p.m(), p.n(), rng);
      EXPECT_GE(param.hessian_quadratic_form(Y, dir), -1e-10);
    }
  }
}

TEST(HessianH, MatchesSecondDifferences) {
  const Plant p = make_mass_spring(2);
  const ConvexParam param(p);
  const double f_star = (solve_riccati_kleinman(p).Pstar * p.Omega).trace();
  const double h = 1e-4;
  Rng rng({32, 0});
  for (const auto& K : sample_sublevel_gains(p, 3.0 * f_star, 6, 33)) {
    const MatrixXd Y = param.y_from_k(K).Y;
    MatrixXd dir = test::random_matrix(p.m(), p.n(), rng);
    dir /= dir.norm();
    const double qf = param.hessian_quadratic_form(Y, dir);
    const double h0 = param.h_cost(Y);
    const double second = (param.h_cost(MatrixXd(Y + h * dir)) - 2.0 * h0 +
                           param.h_cost(MatrixXd(Y - h * dir))) /
                          (h * h);
    EXPECT_LE(std::abs(second - qf), 1e-3 * std::max(std::abs(qf), 1e-8));
  }
}

TEST(HessianH, CertificateSandwich) {
  // mu ||Yt||^2 <= <Yt, Hess h(Y; Yt)> <= L ||Yt||^2 with the certificate
  // constants at a = h(Y); conservative, so tested as inequalities.
  const Plant p = make_mass_spring(1);
  const ConvexParam param(p);
  const double f_star = (solve_riccati_kleinman(p).Pstar * p.Omega).trace();
  Rng rng({34, 0});
  for (const auto& K : sample_sublevel_gains(p, 3.0 * f_star, 10, 35)) {
    const MatrixXd Y = param.y_from_k(K).Y;
    const double a = param.h_cost(Y);
    const SublevelCertificate cert = certificate(p, a);
    for (int k = 0; k < 3; ++k) {
      const MatrixXd dir = test::random_matrix(p.m(), p.n(), rng);
      const double qf = param.hessian_quadratic_form(Y, dir);
      const double nsq = dir.squaredNorm();
      EXPECT_GE(qf, cert.mu * nsq * (1.0 - 1e-9));
      EXPECT_LE(qf, cert.L * nsq * (1.0 + 1e-9));
    }
  }
}

TEST(ChangeOfVariables, RoundTripAndCostEquality) {
  const Plant sp = unit_scalar();
  const ConvexParam sparam(sp);
  const YPoint y = sparam.y_from_k(m1(2.0));
  EXPECT_NEAR(y.Y(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(sparam.k_from_y(sparam.x_of_y(y.Y)).K(0, 0), 2.0, 1e-12);

  const Plant p = make_mass_spring(2);
  const ConvexParam param(p);
  const double f_star = (solve_riccati_kleinman(p).Pstar * p.Omega).trace();
  for (const auto& K : sample_sublevel_gains(p, 4.0 * f_star, 25, 41)) {
    const YPoint yp = param.y_from_k(K);
    EXPECT_TRUE(param.k_from_y(param.x_of_y(yp.Y)).K.isApprox(K, 1e-10));
    const double f = lqr_cost(p, K).value;
    EXPECT_LE(std::abs(param.h_cost(yp.Y) - f), 1e-10 * f);
  }
}

TEST(ChangeOfVariables, OptimaCorrespond) {
  const Plant p = make_mass_spring(1);
  const ConvexParam param(p);
  const auto riccati = solve_riccati_kleinman(p);
  const YPoint ystar = param.y_from_k(riccati.Kstar);
  EXPECT_LE(param.grad_h(ystar.Y).norm(), 1e-8);
  EXPECT_NEAR(param.h_cost(ystar.Y), (riccati.Pstar * p.Omega).trace(), 1e-10);
}

TEST(InducedVectorField, ScalarChainAndGeometricIdentity) {
  const Plant p = unit_scalar();
  const ConvexParam param(p);
  const MatrixXd K = m1(2.0);
  const MatrixXd g = param.induced_vector_field(K);
  EXPECT_NEAR(g(0, 0), 2.0, 1e-12);

  const MatrixXd grad_f = gradient(p, K);
  const MatrixXd grad_hy = param.grad_h(param.y_from_k(K).Y);
  const double lhs = grad_hy.squaredNorm();
  const double rhs = (-grad_f).cwiseProduct(g).sum();
  EXPECT_NEAR(lhs, 1.0, 1e-12);
  EXPECT_LE(std::abs(lhs - rhs), 1e-8 * std::abs(lhs));
}

TEST(InducedVectorField, VanishesAtOptimum) {
  const Plant p = make_mass_spring(1);
  const ConvexParam param(p);
  const auto riccati = solve_riccati_kleinman(p);
  EXPECT_LE(param.induced_vector_field(riccati.Kstar).norm(), 1e-7);
}

TEST(InducedVectorField, GeometricIdentityOnChain) {
  const Plant p = make_mass_spring(2);
  const ConvexParam param(p);
  const double f_star = (solve_riccati_kleinman(p).Pstar * p.Omega).trace();
  for (const auto& K : sample_sublevel_gains(p, 4.0 * f_star, 15, 51)) {
    const double lhs = param.grad_h(param.y_from_k(K).Y).squaredNorm();
    const double rhs =
        (-gradient(p, K)).cwiseProduct(param.induced_vector_field(K)).sum();
    EXPECT_LE(std::abs(lhs - rhs), 1e-8 * std::abs(lhs));
  }
}

TEST(GradientComparison, HoldsWithCertificateConstant) {
  const Plant p = make_mass_spring(1);
  const ConvexParam param(p);
  const double f_star = (solve_riccati_kleinman(p).Pstar * p.Omega).trace();
  const double a = 3.0 * f_star;
  const SublevelCertificate cert = certificate(p, a);
  for (const auto& K : sample_sublevel_gains(p, a, 20, 61)) {
    const double lhs = gradient(p, K).norm();
    const double rhs = cert.c * param.grad_h(param.y_from_k(K).Y).norm();
    EXPECT_GE(lhs, rhs * (1.0 - 1e-9));
  }
}

}  // namespace
}  // namespace lqrlab
