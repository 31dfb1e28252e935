#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>

#include "lqrlab/lqr_core.hpp"
#include "lqrlab/lyap_kernel.hpp"
#include "lqrlab/plant.hpp"

namespace lqrlab {

/// A point of the convex reparameterization. Under the stabilizing shift
/// K0 (required when the open-loop map X |-> AX + XA^T is singular), Y
/// holds the shifted variable Yhat = (K - K0) X and all formulas run on
/// A - B K0.
struct YPoint {
  MatrixXd Y;
  MatrixXd X;
  bool feasible = false;
  std::optional<MatrixXd> shift_k0;
};

/// Engine for the reparameterized objective h(Y); factorizes the open-loop
/// operator once so optimizer loops can reuse it. All methods are pure.
class ConvexParam {
 public:
  ConvexParam(const Plant& plant, std::optional<MatrixXd> shift_k0 = {});

  bool shifted() const { return shift_k0_.has_value(); }
  const std::optional<MatrixXd>& shift_k0() const { return shift_k0_; }

  /// X(Y) via the affine map; feasibility from
  /// lambda_min(X) > 1e-12 trace(X).
  YPoint x_of_y(const MatrixXd& Y) const;

  /// h(Y) as an extended real (+infinity when infeasible).
  double h_cost(const MatrixXd& Y) const;
  double h_cost(const YPoint& point) const;

  /// grad h(Y) = 2 R Y X^{-1} - 2 B^T W (+ 2 R K0 under the shift); W
  /// solves the open-loop adjoint equation. Requires feasible Y.
  MatrixXd grad_h(const MatrixXd& Y) const;

  /// Second-order Taylor term of h; nonnegative on the feasible set.
  double hessian_quadratic_form(const MatrixXd& Y, const MatrixXd& Ytilde) const;

  YPoint y_from_k(const MatrixXd& K) const;
  Gain k_from_y(const YPoint& point) const;

  /// Gain carried by a (feasible) Y without the certificate evaluation.
  MatrixXd gain_of(const YPoint& point) const;

  /// The vector field g(K) induced on gains by the gradient flow on Y;
  /// satisfies ||grad h(Y)||_F^2 = <-grad f(K), g(K)>.
  MatrixXd induced_vector_field(const MatrixXd& K) const;

 private:
  MatrixXd apply_b(const MatrixXd& Y) const;

  Plant plant_;
  std::optional<MatrixXd> shift_k0_;
  MatrixXd A0_;      // A - B K0 (A itself without shift)
  MatrixXd Q0_;      // Q + K0^T R K0
  std::shared_ptr<const OperatorSolver> solver_;
};

// Per-call conveniences mirroring the operations above.
YPoint x_of_y(const Plant& plant, const MatrixXd& Y,
              const std::optional<MatrixXd>& shift_k0 = {});
double h_cost(const Plant& plant, const MatrixXd& Y,
              const std::optional<MatrixXd>& shift_k0 = {});
MatrixXd grad_h(const Plant& plant, const MatrixXd& Y,
                const std::optional<MatrixXd>& shift_k0 = {});
double hessian_h_quadratic_form(const Plant& plant, const MatrixXd& Y,
                                const MatrixXd& Ytilde,
                                const std::optional<MatrixXd>& shift_k0 = {});
YPoint y_from_k(const Plant& plant, const MatrixXd& K,
                const std::optional<MatrixXd>& shift_k0 = {});
Gain k_from_y(const Plant& plant, const YPoint& point);
MatrixXd induced_vector_field(const Plant& plant, const MatrixXd& K,
                              const std::optional<MatrixXd>& shift_k0 = {});

}  // namespace lqrlab
