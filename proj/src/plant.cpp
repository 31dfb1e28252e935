#include "lqrlab/plant.hpp"

#include <string>

#include "lqrlab/errors.hpp"

namespace lqrlab {

namespace {

double check_spd(const MatrixXd& M, const char* name) {
  if (M.rows() != M.cols()) {
    throw Error(std::string("Plant: ") + name + " must be square");
  }
  if (!M.isApprox(M.transpose(), 1e-12)) {
    throw Error(std::string("Plant: ") + name + " must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M);
  const double lmin = eig.eigenvalues().minCoeff();
  if (!(lmin > 1e-12)) {
    throw Error(std::string("Plant: ") + name + " must be positive definite");
  }
  return lmin;
}

}  // namespace

Plant::Plant(MatrixXd A_, MatrixXd B_, MatrixXd Q_, MatrixXd R_, MatrixXd Omega_)
    : A(std::move(A_)), B(std::move(B_)), Q(std::move(Q_)), R(std::move(R_)),
      Omega(std::move(Omega_)) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  if (A.cols() != n || n < 1) throw Error("Plant: A must be square");
  if (B.rows() != n || m < 1) throw Error("Plant: B must be n x m");
  if (Q.rows() != n || R.rows() != m || Omega.rows() != n) {
    throw Error("Plant: weight dimensions inconsistent with (A, B)");
  }
  if (!A.allFinite() || !B.allFinite()) {
    throw Error("Plant: non-finite entries in (A, B)");
  }
  lq_ = check_spd(Q, "Q");
  lr_ = check_spd(R, "R");
  lo_ = check_spd(Omega, "Omega");

  MatrixXd ctrb(n, n * m);
  MatrixXd block = B;
  for (int k = 0; k < n; ++k) {
    ctrb.middleCols(k * m, m) = block;
    block = A * block;
  }
  Eigen::BDCSVD<MatrixXd> svd(ctrb);
  const auto& sv = svd.singularValues();
  const double tol = 1e-10 * sv(0);
  ctrb_rank_ = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++ctrb_rank_;
  }

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Omega);
  sqrt_omega_ = eig.operatorSqrt();
}

Plant scalar_plant(double a, double b, double q, double r, double omega) {
  const auto c = [](double v) { return MatrixXd::Constant(1, 1, v); };
  return Plant(c(a), c(b), c(q), c(r), c(omega));
}

}  // namespace lqrlab
