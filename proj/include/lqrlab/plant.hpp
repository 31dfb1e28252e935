#pragma once

#include <Eigen/Dense>

namespace lqrlab {

using Eigen::MatrixXd;

/// LQR problem data (A, B, Q, R, Omega). Q, R, Omega must be symmetric
/// positive definite (smallest eigenvalue > 1e-12); dimensions must be
/// consistent. Controllability of (A, B) is checked at construction and
/// recorded, not enforced.
class Plant {
 public:
  Plant(MatrixXd A, MatrixXd B, MatrixXd Q, MatrixXd R, MatrixXd Omega);

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }

  /// Rank of [B, AB, ..., A^{n-1}B] with threshold 1e-10 * sigma_max.
  int controllability_rank() const { return ctrb_rank_; }
  bool controllable() const { return ctrb_rank_ == n(); }

  double lambda_min_q() const { return lq_; }
  double lambda_min_r() const { return lr_; }
  double lambda_min_omega() const { return lo_; }

  /// Symmetric square root of Omega (for whitened initial conditions).
  const MatrixXd& sqrt_omega() const { return sqrt_omega_; }

  MatrixXd A, B, Q, R, Omega;

 private:
  int ctrb_rank_ = 0;
  double lq_ = 0.0, lr_ = 0.0, lo_ = 0.0;
  MatrixXd sqrt_omega_;
};

/// One-dimensional plant from scalars.
Plant scalar_plant(double a, double b, double q, double r, double omega);

}  // namespace lqrlab
