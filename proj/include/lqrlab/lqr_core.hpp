#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <utility>

#include "lqrlab/plant.hpp"

namespace lqrlab {

/// Extended-real LQR cost. `value` is +infinity when K is not
/// stabilizing; `hurwitz_margin` (largest closed-loop eigenvalue real
/// part) is carried either way so optimizers can line-search across the
/// stability boundary.
struct LqrCost {
  double value = std::numeric_limits<double>::infinity();
  double hurwitz_margin = 0.0;
  bool stabilizing() const { return std::isfinite(value); }
};

/// A feedback gain with its stabilizing/cost certificate.
/// Invariant when stabilizing: X > 0 solves the closed-loop Lyapunov
/// equation, P > 0 the adjoint one, and f = trace((Q + K^T R K) X)
/// = trace(P Omega).
struct Gain {
  MatrixXd K;
  bool stabilizing = false;
  double hurwitz_margin = 0.0;
  MatrixXd X;  // empty unless stabilizing
  MatrixXd P;
  double f = std::numeric_limits<double>::infinity();
};

struct RiccatiSolution {
  MatrixXd Pstar;
  MatrixXd Kstar;
  double residual = 0.0;  // ||A^T P + P A + Q - P B R^{-1} B^T P||_F
  int iterations = 0;
};

inline MatrixXd closed_loop(const Plant& plant, const MatrixXd& K) {
  return plant.A - plant.B * K;
}

/// Evaluates the full certificate for K.
Gain evaluate_gain(const Plant& plant, const MatrixXd& K);

/// X(K): closed-loop state covariance; requires K stabilizing.
MatrixXd state_covariance(const Plant& plant, const MatrixXd& K);

/// P(K): cost-to-go; requires K stabilizing.
MatrixXd cost_to_go(const Plant& plant, const MatrixXd& K);

/// f(K) as an extended real; total function of K.
LqrCost lqr_cost(const Plant& plant, const MatrixXd& K);

/// grad f(K) = 2 (R K - B^T P(K)) X(K); requires K stabilizing.
MatrixXd gradient(const Plant& plant, const MatrixXd& K);

/// Second-order Taylor term <Ktilde, Hess f(K; Ktilde)>. With
/// `covariance_override` (an x0 x0^T in place of Omega) this evaluates the
/// per-initial-condition quadratic form instead.
double hessian_quadratic_form(const Plant& plant, const MatrixXd& K,
                              const MatrixXd& Ktilde,
                              const MatrixXd* covariance_override = nullptr);

/// A stabilizing gain to start iterations from: K = 0 when A is already
/// Hurwitz, otherwise a gain from a generously weighted auxiliary Riccati
/// equation (Q = I, R = I) solved by the Hamiltonian eigenvector method.
MatrixXd initial_stabilizing_gain(const Plant& plant);

/// Kleinman iteration K <- R^{-1} B^T P(K); quadratically convergent and
/// monotone in f. Stops when ||K_next - K||_F <= 1e-12 (1 + ||K||_F).
RiccatiSolution solve_riccati_kleinman(const Plant& plant,
                                       const std::optional<MatrixXd>& K0 = {});

/// Both sides of f(K) - f(Kstar) = trace((K - Kstar)^T R (K - Kstar) X(K)).
std::pair<double, double> suboptimality_identity(const Plant& plant,
                                                 const MatrixXd& K,
                                                 const RiccatiSolution& riccati);

/// Certified stabilizing perturbation radius
/// zeta = lambda_min(Omega) / (2 ||B||_2 ||X(K)||_2): every Khat with
/// ||Khat - K||_2 < zeta is stabilizing.
double stability_radius(const Plant& plant, const MatrixXd& K);

}  // namespace lqrlab
