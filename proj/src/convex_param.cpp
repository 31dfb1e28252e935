#include "lqrlab/convex_param.hpp"

#include <cmath>
#include <limits>

#include "lqrlab/errors.hpp"

namespace lqrlab {

namespace {
constexpr double kFeasibilityMargin = 1e-12;
}

ConvexParam::ConvexParam(const Plant& plant, std::optional<MatrixXd> shift_k0)
    : plant_(plant), shift_k0_(std::move(shift_k0)) {
  if (shift_k0_) {
    if (shift_k0_->rows() != plant.m() || shift_k0_->cols() != plant.n()) {
      throw Error("ConvexParam: shift K0 must be m x n");
    }
    A0_ = plant.A - plant.B * *shift_k0_;
    if (!is_hurwitz(A0_).stable) {
      throw NotStabilizingError("ConvexParam: shift K0 must be stabilizing");
    }
    Q0_ = plant.Q + shift_k0_->transpose() * plant.R * *shift_k0_;
  } else {
    A0_ = plant.A;
    Q0_ = plant.Q;
  }
  solver_ = std::make_shared<const OperatorSolver>(make_lyap_operator(A0_));
}

MatrixXd ConvexParam::apply_b(const MatrixXd& Y) const {
  const MatrixXd BY = plant_.B * Y;
  return BY + BY.transpose();
}

YPoint ConvexParam::x_of_y(const MatrixXd& Y) const {
  if (Y.rows() != plant_.m() || Y.cols() != plant_.n()) {
    throw Error("x_of_y: Y must be m x n");
  }
  YPoint point;
  point.Y = Y;
  point.shift_k0 = shift_k0_;
  point.X = solver_->solve(apply_b(Y) - plant_.Omega);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(point.X);
  const double lmin = eig.eigenvalues().minCoeff();
  point.feasible = lmin > kFeasibilityMargin * point.X.trace();
  return point;
}

double ConvexParam::h_cost(const YPoint& point) const {
  if (!point.feasible) return std::numeric_limits<double>::infinity();
  const Eigen::LLT<MatrixXd> llt(point.X);
  if (llt.info() != Eigen::Success) {
    return std::numeric_limits<double>::infinity();
  }
  const MatrixXd Xinv_Yt = llt.solve(point.Y.transpose());  // X^{-1} Y^T
  double value = (Q0_ * point.X).trace() +
                 (plant_.R * point.Y * Xinv_Yt).trace();
  if (shift_k0_) {
    value += 2.0 * (point.Y.transpose() * plant_.R * *shift_k0_).trace();
  }
  return value;
}

double ConvexParam::h_cost(const MatrixXd& Y) const { return h_cost(x_of_y(Y)); }

MatrixXd ConvexParam::grad_h(const MatrixXd& Y) const {
  const YPoint point = x_of_y(Y);
  if (!point.feasible) {
    throw Error("grad_h: Y is outside the feasible set");
  }
  const Eigen::LLT<MatrixXd> llt(point.X);
  const MatrixXd YXinv = llt.solve(Y.transpose()).transpose();  // Y X^{-1}
  const MatrixXd forcing =
      YXinv.transpose() * plant_.R * YXinv - Q0_;  // X^{-1}Y^T R Y X^{-1} - Q0
  const MatrixXd W = solver_->adjoint_solve(forcing);
  MatrixXd grad = 2.0 * plant_.R * YXinv - 2.0 * plant_.B.transpose() * W;
  if (shift_k0_) grad += 2.0 * plant_.R * *shift_k0_;
  return grad;
}

double ConvexParam::hessian_quadratic_form(const MatrixXd& Y,
                                           const MatrixXd& Ytilde) const {
  const YPoint point = x_of_y(Y);
  if (!point.feasible) {
    throw Error("hessian_quadratic_form: Y is outside the feasible set");
  }
  const MatrixXd Xtilde = solver_->solve(apply_b(Ytilde));
  const Eigen::LLT<MatrixXd> llt(point.X);
  const MatrixXd Khat = llt.solve(Y.transpose()).transpose();  // Y X^{-1}
  const MatrixXd M = Ytilde - Khat * Xtilde;
  // 2 ||R^{1/2} M X^{-1/2}||_F^2 = 2 trace(M^T R M X^{-1})
  return 2.0 * (M.transpose() * plant_.R * M * llt.solve(MatrixXd::Identity(
                                                plant_.n(), plant_.n())))
                   .trace();
}

YPoint ConvexParam::y_from_k(const MatrixXd& K) const {
  const MatrixXd X = state_covariance(plant_, K);
  YPoint point;
  point.shift_k0 = shift_k0_;
  point.Y = shift_k0_ ? MatrixXd((K - *shift_k0_) * X) : MatrixXd(K * X);
  point.X = X;
  point.feasible = true;
  return point;
}

MatrixXd ConvexParam::gain_of(const YPoint& point) const {
  if (!point.feasible) {
    throw Error("gain_of: Y is outside the feasible set");
  }
  const Eigen::LLT<MatrixXd> llt(point.X);
  MatrixXd K = llt.solve(point.Y.transpose()).transpose();
  if (shift_k0_) K += *shift_k0_;
  return K;
}

Gain ConvexParam::k_from_y(const YPoint& point) const {
  return evaluate_gain(plant_, gain_of(point));
}

MatrixXd ConvexParam::induced_vector_field(const MatrixXd& K) const {
  const YPoint point = y_from_k(K);
  const MatrixXd grad = grad_h(point.Y);
  const MatrixXd T = solver_->solve(apply_b(grad));
  const MatrixXd Khat = shift_k0_ ? MatrixXd(K - *shift_k0_) : K;
  const Eigen::LLT<MatrixXd> llt(point.X);
  return llt.solve((Khat * T - grad).transpose()).transpose();
}

YPoint x_of_y(const Plant& plant, const MatrixXd& Y,
              const std::optional<MatrixXd>& shift_k0) {
  return ConvexParam(plant, shift_k0).x_of_y(Y);
}

double h_cost(const Plant& plant, const MatrixXd& Y,
              const std::optional<MatrixXd>& shift_k0) {
  return ConvexParam(plant, shift_k0).h_cost(Y);
}

MatrixXd grad_h(const Plant& plant, const MatrixXd& Y,
                const std::optional<MatrixXd>& shift_k0) {
  return ConvexParam(plant, shift_k0).grad_h(Y);
}

double hessian_h_quadratic_form(const Plant& plant, const MatrixXd& Y,
                                const MatrixXd& Ytilde,
                                const std::optional<MatrixXd>& shift_k0) {
  return ConvexParam(plant, shift_k0).hessian_quadratic_form(Y, Ytilde);
}

YPoint y_from_k(const Plant& plant, const MatrixXd& K,
                const std::optional<MatrixXd>& shift_k0) {
  return ConvexParam(plant, shift_k0).y_from_k(K);
}

Gain k_from_y(const Plant& plant, const YPoint& point) {
  return ConvexParam(plant, point.shift_k0).k_from_y(point);
}

MatrixXd induced_vector_field(const Plant& plant, const MatrixXd& K,
                              const std::optional<MatrixXd>& shift_k0) {
  return ConvexParam(plant, shift_k0).induced_vector_field(K);
}

}  // namespace lqrlab
