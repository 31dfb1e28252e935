#pragma once

#include <Eigen/Dense>

#include "lqrlab/plant.hpp"
#include "lqrlab/rng.hpp"

namespace lqrlab {

using Eigen::VectorXd;

enum class Integrator {
  kAdaptiveRk45,  // Dormand-Prince with absolute/relative tolerances
  kFixedRk4,      // classical RK4 with fixed dt
  kVanLoanExact,  // closed-form finite-horizon integral (matrix exponential)
};

enum class Quadrature {
  kEmbedded,   // cost carried as an extra ODE state
  kTrapezoid,  // trapezoid rule on the integrator grid (compatibility mode)
};

struct RolloutConfig {
  double tau = 1.0;
  Integrator integrator = Integrator::kAdaptiveRk45;
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  double dt = 1e-2;  // fixed-step mode only
  Quadrature quadrature = Quadrature::kEmbedded;

  void validate() const;
};

enum class InitialDist {
  kStandardNormal,
  kRademacher,
  kUniformScaled,  // uniform on [-sqrt(3), sqrt(3)]
};

/// U with vec(U) uniform on the sphere of radius sqrt(mn);
/// ||U||_F = sqrt(mn) exactly.
MatrixXd sample_sphere_direction(int m, int n, Rng& rng);

/// Entries i.i.d. zero-mean unit-variance from the chosen law.
VectorXd sample_initial_condition(int n, InitialDist dist, Rng& rng);

/// Omega^{1/2} v with v from sample_initial_condition, so that
/// E[x0 x0^T] = Omega for plants with non-identity covariance.
VectorXd sample_plant_initial_condition(const Plant& plant, InitialDist dist,
                                        Rng& rng);

/// Finite-horizon cost of the closed loop from x0 over [0, tau].
/// Defined for any K (stability not required); throws OverflowError with
/// the blow-up time when the state escapes at large tau.
double rollout_cost(const Plant& plant, const MatrixXd& K, const VectorXd& x0,
                    const RolloutConfig& config);

/// Same quantity through the augmented-block matrix exponential; exact up
/// to expm accuracy. Test oracle for rollout_cost; n <= 200.
double exact_rollout_cost(const Plant& plant, const MatrixXd& K,
                          const VectorXd& x0, double tau);

}  // namespace lqrlab
