#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>

namespace lqrlab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Stability verdict for a square matrix. `margin` is the largest
/// eigenvalue real part; `stable` requires margin < -1e-10 so that
/// downstream Lyapunov solves stay away from the marginal case.
struct HurwitzReport {
  bool stable = false;
  double margin = 0.0;
};

inline constexpr double kHurwitzMargin = -1e-10;

HurwitzReport is_hurwitz(const MatrixXd& F);

struct LyapunovSolution {
  MatrixXd X;
  double residual = 0.0;       // ||F X + X F^T + W||_F / ||W||_F
  bool ill_conditioned = false;
};

/// Solves F X + X F^T + W = 0 for symmetric W and Hurwitz F.
/// Schur (Bartels-Stewart) factorization with iterative refinement;
/// closed form for n = 1. Throws UnstableSystemError if F is not Hurwitz.
MatrixXd solve_lyapunov(const MatrixXd& F, const MatrixXd& W);
LyapunovSolution solve_lyapunov_ex(const MatrixXd& F, const MatrixXd& W);

/// Solves F^T P + P F + W = 0 (the adjoint equation).
MatrixXd solve_adjoint_lyapunov(const MatrixXd& F, const MatrixXd& W);
LyapunovSolution solve_adjoint_lyapunov_ex(const MatrixXd& F, const MatrixXd& W);

/// Kronecker-vectorized solve of F X + X F^T + W = 0. Independent of the
/// Schur path; restricted to n <= 30. Cross-check oracle.
MatrixXd solve_lyapunov_kron(const MatrixXd& F, const MatrixXd& W);

/// Reusable factorization for many Lyapunov solves against the same F.
class LyapunovSolver {
 public:
  explicit LyapunovSolver(const MatrixXd& F);

  const HurwitzReport& hurwitz() const { return hurwitz_; }

  /// Requires F Hurwitz (throws UnstableSystemError otherwise).
  MatrixXd solve(const MatrixXd& W) const;
  LyapunovSolution solve_ex(const MatrixXd& W) const;

 private:
  MatrixXd solve_once(const MatrixXd& W) const;

  MatrixXd F_;
  Eigen::MatrixXcd U_, T_;
  HurwitzReport hurwitz_;
  double min_eig_sum_ = 0.0;  // min_{i,k} |T_ii + T_kk|, conditioning proxy
};

/// e^{F t}; exact identity at t = 0. Throws OverflowError if the result
/// is not finite.
MatrixXd matrix_exponential(const MatrixXd& F, double t);

// --- symmetric-matrix vectorization ------------------------------------

/// Dimension of S^n in the orthonormal (svec) basis.
inline int svec_dim(int n) { return n * (n + 1) / 2; }

/// Coordinates of symmetric X in the orthonormal basis
/// {e_i e_i^T} u {(e_i e_j^T + e_j e_i^T)/sqrt(2), i > j}; preserves the
/// Frobenius inner product: <X, Y>_F = svec(X)^T svec(Y).
VectorXd svec(const MatrixXd& X);
MatrixXd smat(const VectorXd& v, int n);

// --- explicit operator representations ----------------------------------

enum class OperatorSpace : std::uint8_t {
  kSym,  // S^n, svec coordinates
  kGen,  // R^{m x n}, column-major vec coordinates
};

/// Explicit matrix of a linear operator between matrix spaces, in
/// orthonormal coordinates (so the operator 2-norm equals the largest
/// singular value of `matrix`).
struct OperatorRep {
  MatrixXd matrix;
  OperatorSpace in_space = OperatorSpace::kSym;
  int in_rows = 0, in_cols = 0;
  OperatorSpace out_space = OperatorSpace::kSym;
  int out_rows = 0, out_cols = 0;

  MatrixXd apply(const MatrixXd& M) const;
};

/// X |-> F X + X F^T on S^n (the closed-loop operator for F = A - BK,
/// the open-loop one for F = A).
OperatorRep make_lyap_operator(const MatrixXd& F);

/// P |-> F^T P + P F on S^n.
OperatorRep make_adjoint_lyap_operator(const MatrixXd& F);

/// Y |-> B Y + Y^T B^T from R^{m x n} into S^n.
OperatorRep make_b_operator(const MatrixXd& B, int n);

/// Inverse of a square representation. Throws SingularOperatorError when
/// smallest singular value <= rtol * largest.
OperatorRep invert_operator(const OperatorRep& rep, double rtol = 1e-10);

/// Composition lhs o rhs.
OperatorRep compose(const OperatorRep& lhs, const OperatorRep& rhs);

/// (A X + X A^T)^{-1} o (Y |-> B Y + Y^T B^T); the map Y |-> X of the
/// affine covariance parameterization, without the constant term.
OperatorRep make_ainv_b_operator(const MatrixXd& A, const MatrixXd& B);

/// Largest singular value of the representation.
double operator_two_norm(const OperatorRep& rep);

/// Lower estimate of ||M||_S = sup ||M(X)||_2 / ||X||_2 over symmetric X,
/// by randomized restarts plus alternating local ascent. Monotone
/// nondecreasing in `samples` for a fixed seed. This is an estimate, not
/// an exact norm; callers must treat it as a lower bound.
double spectral_induced_norm_estimate(const OperatorRep& rep, int samples,
                                      std::uint64_t seed);

/// Factorized square Sym->Sym representation, for repeated solves of
/// Op(X) = C and Op^*(X) = C. Used for the open-loop map A, which need
/// not be Hurwitz (general Sylvester path).
class OperatorSolver {
 public:
  explicit OperatorSolver(OperatorRep rep, double rtol = 1e-10);

  const OperatorRep& rep() const { return rep_; }

  MatrixXd solve(const MatrixXd& C) const;
  MatrixXd adjoint_solve(const MatrixXd& C) const;

 private:
  OperatorRep rep_;
  Eigen::PartialPivLU<MatrixXd> lu_;
  Eigen::PartialPivLU<MatrixXd> lu_adjoint_;
};

}  // namespace lqrlab
