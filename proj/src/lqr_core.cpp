#include "lqrlab/lqr_core.hpp"

#include <algorithm>
#include <sstream>
#include <vector>

#include "lqrlab/errors.hpp"
#include "lqrlab/lyap_kernel.hpp"

namespace lqrlab {

namespace {

double spectral_norm(const MatrixXd& M) {
  Eigen::BDCSVD<MatrixXd> svd(M);
  return svd.singularValues()(0);
}

/// P = Re(V2 V1^{-1}) from the stable invariant subspace of the
/// Hamiltonian matrix. Bootstrap only; the production Riccati path is the
/// Kleinman iteration.
MatrixXd care_via_hamiltonian(const MatrixXd& A, const MatrixXd& B,
                              const MatrixXd& Q, const MatrixXd& R) {
  const int n = static_cast<int>(A.rows());
  MatrixXd H(2 * n, 2 * n);
  const MatrixXd RinvBt = R.llt().solve(B.transpose());
  H.topLeftCorner(n, n) = A;
  H.topRightCorner(n, n) = -B * RinvBt;
  H.bottomLeftCorner(n, n) = -Q;
  H.bottomRightCorner(n, n) = -A.transpose();

  Eigen::ComplexEigenSolver<MatrixXd> eig(H);
  if (eig.info() != Eigen::Success) {
    throw SynthesisError("initial gain synthesis: Hamiltonian eigensolve failed");
  }
  Eigen::MatrixXcd V1(n, n), V2(n, n);
  int found = 0;
  for (int i = 0; i < 2 * n && found < n; ++i) {
    if (eig.eigenvalues()(i).real() < 0.0) {
      V1.col(found) = eig.eigenvectors().col(i).head(n);
      V2.col(found) = eig.eigenvectors().col(i).tail(n);
      ++found;
    }
  }
  if (found != n) {
    throw SynthesisError(
        "initial gain synthesis: Hamiltonian has no n-dimensional stable "
        "subspace (is (A, B) stabilizable?)");
  }
  const MatrixXd P = (V2 * V1.inverse()).real();
  if (!P.allFinite()) {
    throw SynthesisError("initial gain synthesis: singular subspace basis");
  }
  return 0.5 * (P + P.transpose());
}

}  // namespace

Gain evaluate_gain(const Plant& plant, const MatrixXd& K) {
  if (K.rows() != plant.m() || K.cols() != plant.n()) {
    throw Error("evaluate_gain: K must be m x n");
  }
  Gain g;
  g.K = K;
  const LyapunovSolver solver(closed_loop(plant, K));
  g.hurwitz_margin = solver.hurwitz().margin;
  g.stabilizing = solver.hurwitz().stable;
  if (!g.stabilizing) return g;
  g.X = solver.solve(plant.Omega);
  g.P = solve_adjoint_lyapunov(closed_loop(plant, K), plant.Q + K.transpose() * plant.R * K);
  g.f = ((plant.Q + K.transpose() * plant.R * K) * g.X).trace();
  return g;
}

MatrixXd state_covariance(const Plant& plant, const MatrixXd& K) {
  const MatrixXd F = closed_loop(plant, K);
  const auto report = is_hurwitz(F);
  if (!report.stable) {
    throw NotStabilizingError("state_covariance: K is not stabilizing");
  }
  return solve_lyapunov(F, plant.Omega);
}

MatrixXd cost_to_go(const Plant& plant, const MatrixXd& K) {
  const MatrixXd F = closed_loop(plant, K);
  const auto report = is_hurwitz(F);
  if (!report.stable) {
    throw NotStabilizingError("cost_to_go: K is not stabilizing");
  }
  return solve_adjoint_lyapunov(F, plant.Q + K.transpose() * plant.R * K);
}

LqrCost lqr_cost(const Plant& plant, const MatrixXd& K) {
  const LyapunovSolver solver(closed_loop(plant, K));
  LqrCost cost;
  cost.hurwitz_margin = solver.hurwitz().margin;
  if (!solver.hurwitz().stable) return cost;
  const MatrixXd X = solver.solve(plant.Omega);
  cost.value = ((plant.Q + K.transpose() * plant.R * K) * X).trace();
  return cost;
}

MatrixXd gradient(const Plant& plant, const MatrixXd& K) {
  const MatrixXd F = closed_loop(plant, K);
  const LyapunovSolver solver(F);
  if (!solver.hurwitz().stable) {
    throw NotStabilizingError("gradient: K is not stabilizing");
  }
  const MatrixXd X = solver.solve(plant.Omega);
  const MatrixXd P =
      solve_adjoint_lyapunov(F, plant.Q + K.transpose() * plant.R * K);
  return 2.0 * (plant.R * K - plant.B.transpose() * P) * X;
}

double hessian_quadratic_form(const Plant& plant, const MatrixXd& K,
                              const MatrixXd& Ktilde,
                              const MatrixXd* covariance_override) {
  const MatrixXd F = closed_loop(plant, K);
  const LyapunovSolver solver(F);
  if (!solver.hurwitz().stable) {
    throw NotStabilizingError("hessian_quadratic_form: K is not stabilizing");
  }
  const MatrixXd X =
      solver.solve(covariance_override ? *covariance_override : plant.Omega);
  const MatrixXd P =
      solve_adjoint_lyapunov(F, plant.Q + K.transpose() * plant.R * K);
  // G = B^T P - R K; Ptilde solves the adjoint equation with forcing
  // Ktilde^T G + G^T Ktilde.
  const MatrixXd G = plant.B.transpose() * P - plant.R * K;
  const MatrixXd C = Ktilde.transpose() * G + G.transpose() * Ktilde;
  const MatrixXd Ptilde = solve_adjoint_lyapunov(F, -C);
  const double quad = (Ktilde.transpose() * plant.R * Ktilde * X).trace();
  const double cross = (Ktilde.transpose() * plant.B.transpose() * Ptilde * X).trace();
  return 2.0 * (quad - 2.0 * cross);
}

MatrixXd initial_stabilizing_gain(const Plant& plant) {
  const int n = plant.n();
  const int m = plant.m();
  if (is_hurwitz(plant.A).stable) return MatrixXd::Zero(m, n);
  const MatrixXd P = care_via_hamiltonian(plant.A, plant.B,
                                          MatrixXd::Identity(n, n),
                                          MatrixXd::Identity(m, m));
  const MatrixXd K = plant.B.transpose() * P;
  if (!is_hurwitz(closed_loop(plant, K)).stable) {
    throw SynthesisError("initial gain synthesis: bootstrap gain does not stabilize");
  }
  return K;
}

RiccatiSolution solve_riccati_kleinman(const Plant& plant,
                                       const std::optional<MatrixXd>& K0) {
  MatrixXd K = K0 ? *K0 : initial_stabilizing_gain(plant);
  if (K0 && !is_hurwitz(closed_loop(plant, K)).stable) {
    throw NotStabilizingError("solve_riccati_kleinman: K0 is not stabilizing");
  }

  constexpr int kMaxIters = 200;
  std::vector<double> cost_trace;
  double f_prev = std::numeric_limits<double>::infinity();
  MatrixXd P;
  RiccatiSolution sol;
  for (int it = 0; it < kMaxIters; ++it) {
    P = cost_to_go(plant, K);
    const double f = (P * plant.Omega).trace();
    cost_trace.push_back(f);
    if (f > f_prev * (1.0 + 1e-10) + 1e-12) {
      std::ostringstream msg;
      msg << "solve_riccati_kleinman: cost increased at iteration " << it
          << " (" << f_prev << " -> " << f << ")";
      throw ConvergenceError(msg.str());
    }
    f_prev = f;
    const MatrixXd K_next = plant.R.llt().solve(plant.B.transpose() * P);
    const double delta = (K_next - K).norm();
    K = K_next;
    sol.iterations = it + 1;
    if (delta <= 1e-12 * (1.0 + K.norm())) {
      sol.Kstar = K;
      sol.Pstar = cost_to_go(plant, K);
      const MatrixXd res = plant.A.transpose() * sol.Pstar + sol.Pstar * plant.A +
                           plant.Q -
                           sol.Pstar * plant.B *
                               plant.R.llt().solve(plant.B.transpose() * sol.Pstar);
      sol.residual = res.norm();
      if (sol.residual > 1e-9 * plant.Q.norm()) {
        std::ostringstream msg;
        msg << "solve_riccati_kleinman: ARE residual " << sol.residual
            << " exceeds contract 1e-9 * ||Q||_F";
        throw ConvergenceError(msg.str());
      }
      return sol;
    }
  }
  std::ostringstream msg;
  msg << "solve_riccati_kleinman: no convergence in " << kMaxIters
      << " iterations; cost trace:";
  for (double f : cost_trace) msg << ' ' << f;
  throw ConvergenceError(msg.str());
}

std::pair<double, double> suboptimality_identity(const Plant& plant,
                                                 const MatrixXd& K,
                                                 const RiccatiSolution& riccati) {
  const LqrCost cost = lqr_cost(plant, K);
  if (!cost.stabilizing()) {
    throw NotStabilizingError("suboptimality_identity: K is not stabilizing");
  }
  const double f_star = (riccati.Pstar * plant.Omega).trace();
  const MatrixXd D = K - riccati.Kstar;
  const double rhs =
      (D.transpose() * plant.R * D * state_covariance(plant, K)).trace();
  return {cost.value - f_star, rhs};
}

double stability_radius(const Plant& plant, const MatrixXd& K) {
  const MatrixXd X = state_covariance(plant, K);
  return plant.lambda_min_omega() /
         (2.0 * spectral_norm(plant.B) * spectral_norm(X));
}

}  // namespace lqrlab
