#include "lqrlab/lyap_kernel.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "lqrlab/errors.hpp"
#include "lqrlab/rng.hpp"

namespace lqrlab {

namespace {

constexpr double kResidualRtol = 1e-10;

void require_square(const MatrixXd& F, const char* who) {
  if (F.rows() != F.cols() || F.rows() < 1) {
    throw Error(std::string(who) + ": matrix must be square and non-empty");
  }
  if (!F.allFinite()) {
    throw Error(std::string(who) + ": matrix has non-finite entries");
  }
}

MatrixXd symmetrize(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

}  // namespace

HurwitzReport is_hurwitz(const MatrixXd& F) {
  require_square(F, "is_hurwitz");
  Eigen::EigenSolver<MatrixXd> eig(F, /*computeEigenvectors=*/false);
  if (eig.info() != Eigen::Success) {
    throw Error("is_hurwitz: eigenvalue computation failed");
  }
  const double margin = eig.eigenvalues().real().maxCoeff();
  return {margin < kHurwitzMargin, margin};
}

LyapunovSolver::LyapunovSolver(const MatrixXd& F) : F_(F) {
  require_square(F, "LyapunovSolver");
  const int n = static_cast<int>(F.rows());
  if (n == 1) {
    hurwitz_ = {F(0, 0) < kHurwitzMargin, F(0, 0)};
    min_eig_sum_ = 2.0 * std::abs(F(0, 0));
    return;
  }
  Eigen::ComplexSchur<MatrixXd> schur(F, /*computeU=*/true);
  if (schur.info() != Eigen::Success) {
    throw Error("LyapunovSolver: Schur decomposition failed");
  }
  U_ = schur.matrixU();
  T_ = schur.matrixT();
  const double margin = T_.diagonal().real().maxCoeff();
  hurwitz_ = {margin < kHurwitzMargin, margin};
  min_eig_sum_ = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      min_eig_sum_ = std::min(min_eig_sum_, std::abs(T_(i, i) + T_(k, k)));
    }
  }
}

MatrixXd LyapunovSolver::solve_once(const MatrixXd& W) const {
  const int n = static_cast<int>(F_.rows());
  if (n == 1) {
    return MatrixXd::Constant(1, 1, -W(0, 0) / (2.0 * F_(0, 0)));
  }
  // With F = U T U^H, the substitution X = U Y U^T turns
  // F X + X F^T + W = 0 into T Y + Y T^T = C, C = -U^H W conj(U),
  // solvable column-by-column from the right (T is upper triangular).
  const Eigen::MatrixXcd C = -U_.adjoint() * W * U_.conjugate();
  Eigen::MatrixXcd Y(n, n);
  for (int k = n - 1; k >= 0; --k) {
    Eigen::VectorXcd rhs = C.col(k);
    if (k + 1 < n) {
      rhs.noalias() -= Y.rightCols(n - 1 - k) *
                       T_.row(k).segment(k + 1, n - 1 - k).transpose();
    }
    Eigen::MatrixXcd shifted = T_;
    shifted.diagonal().array() += T_(k, k);
    Y.col(k) = shifted.triangularView<Eigen::Upper>().solve(rhs);
  }
  return symmetrize((U_ * Y * U_.transpose()).real());
}

LyapunovSolution LyapunovSolver::solve_ex(const MatrixXd& W) const {
  if (W.rows() != F_.rows() || W.cols() != F_.rows()) {
    throw Error("LyapunovSolver: right-hand side dimension mismatch");
  }
  if (!hurwitz_.stable) {
    throw UnstableSystemError("solve_lyapunov: system matrix is not Hurwitz",
                              hurwitz_.margin);
  }
  LyapunovSolution out;
  const double wnorm = W.norm();
  if (wnorm == 0.0) {
    out.X = MatrixXd::Zero(W.rows(), W.cols());
    return out;
  }
  const MatrixXd Wsym = symmetrize(W);
  out.X = solve_once(Wsym);
  // One or two rounds of refinement reusing the factorization.
  for (int round = 0; round < 2; ++round) {
    const MatrixXd res = F_ * out.X + out.X * F_.transpose() + Wsym;
    out.residual = res.norm() / wnorm;
    if (out.residual <= kResidualRtol) break;
    out.X += solve_once(res);
  }
  {
    const MatrixXd res = F_ * out.X + out.X * F_.transpose() + Wsym;
    out.residual = res.norm() / wnorm;
  }
  const double tscale = (F_.rows() == 1) ? 2.0 * std::abs(F_(0, 0))
                                         : T_.cwiseAbs().maxCoeff();
  out.ill_conditioned = min_eig_sum_ < 1e-8 * std::max(tscale, 1.0);
  return out;
}

MatrixXd LyapunovSolver::solve(const MatrixXd& W) const { return solve_ex(W).X; }

LyapunovSolution solve_lyapunov_ex(const MatrixXd& F, const MatrixXd& W) {
  return LyapunovSolver(F).solve_ex(W);
}

MatrixXd solve_lyapunov(const MatrixXd& F, const MatrixXd& W) {
  return solve_lyapunov_ex(F, W).X;
}

LyapunovSolution solve_adjoint_lyapunov_ex(const MatrixXd& F, const MatrixXd& W) {
  return solve_lyapunov_ex(F.transpose(), W);
}

MatrixXd solve_adjoint_lyapunov(const MatrixXd& F, const MatrixXd& W) {
  return solve_adjoint_lyapunov_ex(F, W).X;
}

MatrixXd solve_lyapunov_kron(const MatrixXd& F, const MatrixXd& W) {
  require_square(F, "solve_lyapunov_kron");
  const int n = static_cast<int>(F.rows());
  if (n > 30) {
    throw Error("solve_lyapunov_kron: oracle restricted to n <= 30");
  }
  const auto report = is_hurwitz(F);
  if (!report.stable) {
    throw UnstableSystemError("solve_lyapunov_kron: not Hurwitz", report.margin);
  }
  // vec(F X) = (I (x) F) vec(X), vec(X F^T) = (F (x) I) vec(X)
  MatrixXd M = MatrixXd::Zero(n * n, n * n);
  const MatrixXd I = MatrixXd::Identity(n, n);
  for (int j = 0; j < n; ++j) M.block(j * n, j * n, n, n) = F;
  for (int bi = 0; bi < n; ++bi) {
    for (int bj = 0; bj < n; ++bj) {
      M.block(bi * n, bj * n, n, n) += F(bi, bj) * I;
    }
  }
  const Eigen::Map<const VectorXd> w(W.data(), n * n);
  const VectorXd x = M.partialPivLu().solve(-w);
  const Eigen::Map<const MatrixXd> X(x.data(), n, n);
  return symmetrize(X);
}

MatrixXd matrix_exponential(const MatrixXd& F, double t) {
  require_square(F, "matrix_exponential");
  if (t < 0.0) throw Error("matrix_exponential: t must be nonnegative");
  const int n = static_cast<int>(F.rows());
  if (t == 0.0) return MatrixXd::Identity(n, n);
  const MatrixXd E = (F * t).exp();
  if (!E.allFinite()) {
    throw OverflowError("matrix_exponential: overflow (unstable system?)", t);
  }
  return E;
}

VectorXd svec(const MatrixXd& X) {
  const int n = static_cast<int>(X.rows());
  VectorXd v(svec_dim(n));
  const double s = std::sqrt(2.0);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    v(k++) = X(j, j);
    for (int i = j + 1; i < n; ++i) v(k++) = s * X(i, j);
  }
  return v;
}

MatrixXd smat(const VectorXd& v, int n) {
  MatrixXd X(n, n);
  const double s = 1.0 / std::sqrt(2.0);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    X(j, j) = v(k++);
    for (int i = j + 1; i < n; ++i) {
      X(i, j) = X(j, i) = s * v(k++);
    }
  }
  return X;
}

MatrixXd OperatorRep::apply(const MatrixXd& M) const {
  VectorXd vin;
  if (in_space == OperatorSpace::kSym) {
    vin = svec(M);
  } else {
    vin = Eigen::Map<const VectorXd>(M.data(), M.size());
  }
  const VectorXd vout = matrix * vin;
  if (out_space == OperatorSpace::kSym) {
    return smat(vout, out_rows);
  }
  return Eigen::Map<const MatrixXd>(vout.data(), out_rows, out_cols);
}

OperatorRep make_lyap_operator(const MatrixXd& F) {
  require_square(F, "make_lyap_operator");
  const int n = static_cast<int>(F.rows());
  const int d = svec_dim(n);
  OperatorRep rep;
  rep.matrix.resize(d, d);
  rep.in_space = rep.out_space = OperatorSpace::kSym;
  rep.in_rows = rep.in_cols = rep.out_rows = rep.out_cols = n;
  const double s = 1.0 / std::sqrt(2.0);
  int k = 0;
  MatrixXd S(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      // basis element E = e_i e_i^T (i == j) or (e_i e_j^T + e_j e_i^T)/sqrt(2)
      S.setZero();
      if (i == j) {
        S.col(i) = F.col(i);
      } else {
        S.col(j) += s * F.col(i);
        S.col(i) += s * F.col(j);
      }
      rep.matrix.col(k++) = svec(S + S.transpose());
    }
  }
  return rep;
}

OperatorRep make_adjoint_lyap_operator(const MatrixXd& F) {
  return make_lyap_operator(F.transpose());
}

OperatorRep make_b_operator(const MatrixXd& B, int n) {
  const int m = static_cast<int>(B.cols());
  if (B.rows() != n || m < 1) throw Error("make_b_operator: B must be n x m");
  OperatorRep rep;
  rep.in_space = OperatorSpace::kGen;
  rep.in_rows = m;
  rep.in_cols = n;
  rep.out_space = OperatorSpace::kSym;
  rep.out_rows = rep.out_cols = n;
  rep.matrix.resize(svec_dim(n), m * n);
  MatrixXd S(n, n);
  for (int q = 0; q < n; ++q) {
    for (int p = 0; p < m; ++p) {
      // Y = e_p e_q^T: B Y + Y^T B^T = (B e_p) e_q^T + e_q (B e_p)^T
      S.setZero();
      S.col(q) = B.col(p);
      rep.matrix.col(q * m + p) = svec(S + S.transpose());
    }
  }
  return rep;
}

OperatorRep invert_operator(const OperatorRep& rep, double rtol) {
  if (rep.matrix.rows() != rep.matrix.cols()) {
    throw Error("invert_operator: representation is not square");
  }
  Eigen::BDCSVD<MatrixXd> svd(rep.matrix);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= rtol * sv(0)) {
    throw SingularOperatorError(
        "invert_operator: operator is numerically singular "
        "(A and -A^T share an eigenvalue?); supply a stabilizing shift K0");
  }
  OperatorRep out;
  out.matrix = rep.matrix.partialPivLu().inverse();
  out.in_space = rep.out_space;
  out.in_rows = rep.out_rows;
  out.in_cols = rep.out_cols;
  out.out_space = rep.in_space;
  out.out_rows = rep.in_rows;
  out.out_cols = rep.in_cols;
  return out;
}

OperatorRep compose(const OperatorRep& lhs, const OperatorRep& rhs) {
  if (lhs.matrix.cols() != rhs.matrix.rows() || lhs.in_space != rhs.out_space) {
    throw Error("compose: operator spaces do not match");
  }
  OperatorRep out;
  out.matrix = lhs.matrix * rhs.matrix;
  out.in_space = rhs.in_space;
  out.in_rows = rhs.in_rows;
  out.in_cols = rhs.in_cols;
  out.out_space = lhs.out_space;
  out.out_rows = lhs.out_rows;
  out.out_cols = lhs.out_cols;
  return out;
}

OperatorRep make_ainv_b_operator(const MatrixXd& A, const MatrixXd& B) {
  const int n = static_cast<int>(A.rows());
  return compose(invert_operator(make_lyap_operator(A)), make_b_operator(B, n));
}

double operator_two_norm(const OperatorRep& rep) {
  Eigen::BDCSVD<MatrixXd> svd(rep.matrix);
  return svd.singularValues()(0);
}

double spectral_induced_norm_estimate(const OperatorRep& rep, int samples,
                                      std::uint64_t seed) {
  if (rep.in_space != OperatorSpace::kSym ||
      rep.out_space != OperatorSpace::kSym || rep.in_rows != rep.out_rows) {
    throw Error("spectral_induced_norm_estimate: needs a square Sym->Sym operator");
  }
  if (samples < 1) throw Error("spectral_induced_norm_estimate: samples >= 1");
  const int n = rep.in_rows;

  const auto spectral_norm_and_top = [](const MatrixXd& S, VectorXd* top,
                                        double* sign) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(S);
    const auto& vals = eig.eigenvalues();
    int idx = 0;
    vals.cwiseAbs().maxCoeff(&idx);
    if (top != nullptr) *top = eig.eigenvectors().col(idx);
    if (sign != nullptr) *sign = vals(idx) >= 0.0 ? 1.0 : -1.0;
    return std::abs(vals(idx));
  };

  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    Rng rng({seed, static_cast<std::uint64_t>(s)});
    MatrixXd M(n, n);
    for (int j = 0; j < n; ++j) {
      for (int i = j; i < n; ++i) M(i, j) = M(j, i) = rng.normal();
    }
    const double mnorm = spectral_norm_and_top(M, nullptr, nullptr);
    if (mnorm <= 0.0) continue;
    M /= mnorm;

    // Alternating ascent: the objective u^T Op(M) u is linear in M for a
    // fixed top eigenvector u; its maximizer over ||M||_2 <= 1 is
    // V sign(Lambda) V^T for Op^*(u u^T) = V Lambda V^T.
    for (int it = 0; it < 25; ++it) {
      VectorXd u;
      double sign = 1.0;
      const double value = spectral_norm_and_top(rep.apply(M), &u, &sign);
      best = std::max(best, value);
      const MatrixXd C =
          sign * smat(rep.matrix.transpose() * svec(u * u.transpose()), n);
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(C);
      VectorXd signs = eig.eigenvalues();
      for (int i = 0; i < n; ++i) signs(i) = signs(i) >= 0.0 ? 1.0 : -1.0;
      const MatrixXd next =
          eig.eigenvectors() * signs.asDiagonal() * eig.eigenvectors().transpose();
      const double next_value = spectral_norm_and_top(rep.apply(next), nullptr, nullptr);
      if (next_value <= best * (1.0 + 1e-12)) break;
      M = next;
    }
  }
  return best;
}

OperatorSolver::OperatorSolver(OperatorRep rep, double rtol) : rep_(std::move(rep)) {
  if (rep_.matrix.rows() != rep_.matrix.cols() ||
      rep_.in_space != OperatorSpace::kSym ||
      rep_.out_space != OperatorSpace::kSym) {
    throw Error("OperatorSolver: needs a square Sym->Sym representation");
  }
  Eigen::BDCSVD<MatrixXd> svd(rep_.matrix);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= rtol * sv(0)) {
    throw SingularOperatorError(
        "OperatorSolver: operator is numerically singular; supply a "
        "stabilizing shift K0");
  }
  lu_.compute(rep_.matrix);
  lu_adjoint_.compute(rep_.matrix.transpose());
}

MatrixXd OperatorSolver::solve(const MatrixXd& C) const {
  return smat(lu_.solve(svec(C)), rep_.in_rows);
}

MatrixXd OperatorSolver::adjoint_solve(const MatrixXd& C) const {
  return smat(lu_adjoint_.solve(svec(C)), rep_.in_rows);
}

}  // namespace lqrlab
