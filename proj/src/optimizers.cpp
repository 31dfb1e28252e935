#include "lqrlab/optimizers.hpp"

#include <chrono>
#include <cmath>
#include <deque>

#include "lqrlab/errors.hpp"

namespace lqrlab {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

double optimal_cost(const Plant& plant) {
  const RiccatiSolution riccati = solve_riccati_kleinman(plant);
  return (riccati.Pstar * plant.Omega).trace();
}

/// Armijo backtracking along `direction` from (K, f). Returns the accepted
/// stepsize, or 0 when no acceptable step exists down to underflow.
template <typename CostFn>
double backtrack(const CostFn& cost, double f, double descent_sq,
                 const StepRule& rule, double alpha0) {
  double alpha = alpha0;
  for (int i = 0; i < 80; ++i) {
    const double trial = cost(alpha);
    if (std::isfinite(trial) &&
        trial <= f - rule.sufficient_decrease * alpha * descent_sq) {
      return alpha;
    }
    alpha *= rule.shrink;
    if (alpha < 1e-20) break;
  }
  return 0.0;
}

}  // namespace

OptimizeResult gradient_flow(const Plant& plant, const MatrixXd& K0, double T,
                             double ode_tol) {
  if (!is_hurwitz(closed_loop(plant, K0)).stable) {
    throw NotStabilizingError("gradient_flow: K0 is not stabilizing");
  }
  if (!(T > 0.0)) throw Error("gradient_flow: T must be positive");
  const double f_star = optimal_cost(plant);
  const auto start = Clock::now();

  // Midpoint pair with step doubling on vec(K); rejects steps whose
  // stages or endpoint leave the stabilizing set.
  const auto rhs = [&](const MatrixXd& K) { return MatrixXd(-gradient(plant, K)); };

  OptimizeResult result;
  MatrixXd K = K0;
  double t = 0.0;
  double h = std::min(T, 1e-3);
  int iter = 0;
  int consecutive_rejects = 0;

  {
    const double f = lqr_cost(plant, K).value;
    result.trace.rows.push_back(
        {iter++, f - f_star, gradient(plant, K).norm(), 0.0, elapsed_ms(start)});
  }

  while (t < T) {
    h = std::min(h, T - t);
    bool ok = true;
    MatrixXd K_full, K_half2;
    try {
      const MatrixXd g0 = rhs(K);
      // one full step (midpoint)
      K_full = K + h * rhs(K + 0.5 * h * g0);
      // two half steps
      const MatrixXd K_half = K + 0.5 * h * rhs(K + 0.25 * h * g0);
      K_half2 = K_half + 0.5 * h * rhs(K_half + 0.25 * h * rhs(K_half));
      ok = is_hurwitz(closed_loop(plant, K_half2)).stable;
    } catch (const NotStabilizingError&) {
      ok = false;
    }
    if (!ok) {
      h *= 0.5;
      if (++consecutive_rejects > 80) {
        throw ConvergenceError("gradient_flow: integrator stalled at the "
                               "stability boundary");
      }
      continue;
    }
    const double err = (K_full - K_half2).norm() /
                       (ode_tol * (1.0 + K_half2.norm()));
    if (err <= 1.0) {
      K = K_half2;
      t += h;
      consecutive_rejects = 0;
      const double f = lqr_cost(plant, K).value;
      result.trace.rows.push_back(
          {iter++, f - f_star, gradient(plant, K).norm(), h, elapsed_ms(start)});
    } else if (++consecutive_rejects > 80) {
      throw ConvergenceError("gradient_flow: step control stalled");
    }
    const double factor = err > 0.0 ? 0.9 * std::pow(err, -1.0 / 3.0) : 4.0;
    h *= std::clamp(factor, 0.2, 4.0);
  }
  result.trace.status = TerminationStatus::kConverged;
  result.K = K;
  result.f = lqr_cost(plant, K).value;
  return result;
}

OptimizeResult gradient_descent(const Plant& plant, const MatrixXd& K0,
                                const StepRule& rule, int max_iters,
                                double tol) {
  if (!is_hurwitz(closed_loop(plant, K0)).stable) {
    throw NotStabilizingError("gradient_descent: K0 is not stabilizing");
  }
  const double f_star = optimal_cost(plant);
  const auto start = Clock::now();

  OptimizeResult result;
  MatrixXd K = K0;
  double f = lqr_cost(plant, K).value;
  double alpha_prev = rule.alpha;

  for (int iter = 0; iter < max_iters; ++iter) {
    const MatrixXd g = gradient(plant, K);
    const double gnorm = g.norm();
    result.trace.rows.push_back(
        {iter, f - f_star, gnorm, alpha_prev, elapsed_ms(start)});
    if (gnorm <= tol * (1.0 + std::abs(f))) {
      result.trace.status = TerminationStatus::kConverged;
      break;
    }

    double alpha = rule.alpha;
    if (rule.mode == StepRule::Mode::kBacktracking) {
      const auto cost = [&](double a) {
        return lqr_cost(plant, K - a * g).value;
      };
      alpha = backtrack(cost, f, gnorm * gnorm, rule, 2.0 * alpha_prev);
      if (alpha == 0.0) {
        result.trace.status = TerminationStatus::kConverged;  // at numeric floor
        break;
      }
    }
    const MatrixXd K_next = K - alpha * g;
    const LqrCost next = lqr_cost(plant, K_next);
    if (!next.stabilizing() ||
        (rule.mode != StepRule::Mode::kBacktracking && next.value > f)) {
      result.trace.status = TerminationStatus::kLeftSublevelSet;
      break;  // keep the last safe iterate
    }
    K = K_next;
    f = next.value;
    alpha_prev = alpha;
  }
  result.K = K;
  result.f = f;
  return result;
}

OptimizeResult gradient_descent_y(const Plant& plant, const MatrixXd& K0,
                                  const StepRule& rule, int max_iters,
                                  double tol,
                                  const std::optional<MatrixXd>& shift_k0) {
  const ConvexParam param(plant, shift_k0);
  const double f_star = optimal_cost(plant);
  const auto start = Clock::now();

  OptimizeResult result;
  MatrixXd Y = param.y_from_k(K0).Y;
  double h = param.h_cost(Y);
  double alpha_prev = rule.alpha;

  for (int iter = 0; iter < max_iters; ++iter) {
    const MatrixXd g = param.grad_h(Y);
    const double gnorm = g.norm();
    result.trace.rows.push_back(
        {iter, h - f_star, gnorm, alpha_prev, elapsed_ms(start)});
    if (gnorm <= tol * (1.0 + std::abs(h))) {
      result.trace.status = TerminationStatus::kConverged;
      break;
    }

    double alpha = rule.alpha;
    if (rule.mode == StepRule::Mode::kBacktracking) {
      const auto cost = [&](double a) { return param.h_cost(Y - a * g); };
      alpha = backtrack(cost, h, gnorm * gnorm, rule, 2.0 * alpha_prev);
      if (alpha == 0.0) {
        result.trace.status = TerminationStatus::kConverged;
        break;
      }
    }
    const MatrixXd Y_next = Y - alpha * g;
    const double h_next = param.h_cost(Y_next);
    if (!std::isfinite(h_next) ||
        (rule.mode != StepRule::Mode::kBacktracking && h_next > h)) {
      result.trace.status = TerminationStatus::kLeftSublevelSet;
      break;
    }
    Y = Y_next;
    h = h_next;
    alpha_prev = alpha;
  }
  const Gain gain = param.k_from_y(param.x_of_y(Y));
  result.K = gain.K;
  result.f = gain.f;
  return result;
}

OptimizeResult preconditioned_descent(const Plant& plant, const MatrixXd& K0,
                                      Preconditioner H1, Preconditioner H2,
                                      double alpha, int max_iters, double tol) {
  if (!is_hurwitz(closed_loop(plant, K0)).stable) {
    throw NotStabilizingError("preconditioned_descent: K0 is not stabilizing");
  }
  const double f_star = optimal_cost(plant);
  const auto start = Clock::now();

  OptimizeResult result;
  MatrixXd K = K0;
  double f = lqr_cost(plant, K).value;

  for (int iter = 0; iter < max_iters; ++iter) {
    const MatrixXd F = closed_loop(plant, K);
    const LyapunovSolver solver(F);
    const MatrixXd X = solver.solve(plant.Omega);
    const MatrixXd P =
        solve_adjoint_lyapunov(F, plant.Q + K.transpose() * plant.R * K);
    const MatrixXd g = 2.0 * (plant.R * K - plant.B.transpose() * P) * X;

    result.trace.rows.push_back(
        {iter, f - f_star, g.norm(), alpha, elapsed_ms(start)});
    if (g.norm() <= tol * (1.0 + std::abs(f))) {
      result.trace.status = TerminationStatus::kConverged;
      break;
    }

    MatrixXd direction = g;
    if (H1 == Preconditioner::kRInverse) {
      direction = plant.R.llt().solve(direction);
    }
    if (H2 == Preconditioner::kXInverse) {
      direction = X.llt().solve(direction.transpose()).transpose();
    }
    const MatrixXd K_next = K - alpha * direction;
    const LqrCost next = lqr_cost(plant, K_next);
    if (!next.stabilizing()) {
      result.trace.status = TerminationStatus::kLeftSublevelSet;
      break;
    }
    K = K_next;
    f = next.value;
  }
  result.K = K;
  result.f = f;
  return result;
}

OptimizeResult random_search(const Plant& plant, const MatrixXd& K0,
                             const EstimatorConfig& estimator,
                             const StepRule& rule,
                             const RandomSearchOptions& options) {
  if (!is_hurwitz(closed_loop(plant, K0)).stable) {
    throw NotStabilizingError("random_search: K0 is not stabilizing");
  }
  const double f_star = optimal_cost(plant);
  const auto start = Clock::now();

  OptimizeResult result;
  MatrixXd K = K0;
  double f = lqr_cost(plant, K).value;
  std::deque<double> recent_norms;

  result.trace.status = TerminationStatus::kMaxIters;
  for (int iter = 0; iter < options.max_iters; ++iter) {
    EstimatorConfig cfg = estimator;
    cfg.stream.stream = estimator.stream.stream +
                        static_cast<std::uint64_t>(iter) *
                            static_cast<std::uint64_t>(estimator.N);

    MatrixXd g;
    bool have_estimate = false;
    for (int attempt = 0; attempt <= options.retries; ++attempt) {
      try {
        g = estimate_gradient_twopoint(plant, K, cfg).value;
        have_estimate = true;
        break;
      } catch (const EstimateFailure&) {
        // fresh, non-overlapping streams for the retry
        cfg.stream.stream += (1ull << 40);
      }
    }
    if (!have_estimate) {
      result.trace.status = TerminationStatus::kEstimateFailure;
      break;
    }

    const double gnorm = g.norm();
    result.trace.rows.push_back(
        {iter, f - f_star, gnorm, rule.alpha, elapsed_ms(start)});

    if (options.oracle_stop && options.target_eps > 0.0 &&
        f - f_star <= options.target_eps) {
      result.trace.status = TerminationStatus::kConverged;
      break;
    }
    if (!options.oracle_stop && options.grad_tol > 0.0) {
      recent_norms.push_back(gnorm);
      if (recent_norms.size() > 10) recent_norms.pop_front();
      double avg = 0.0;
      for (double v : recent_norms) avg += v;
      avg /= static_cast<double>(recent_norms.size());
      if (recent_norms.size() == 10 && avg <= options.grad_tol) {
        result.trace.status = TerminationStatus::kConverged;
        break;
      }
    }

    const MatrixXd K_next = K - rule.alpha * g;
    const LqrCost next = lqr_cost(plant, K_next);
    if (!next.stabilizing()) {
      result.trace.status = TerminationStatus::kLeftSublevelSet;
      break;
    }
    K = K_next;
    f = next.value;

    if (options.oracle_stop && options.target_eps > 0.0 &&
        f - f_star <= options.target_eps) {
      result.trace.rows.push_back({iter + 1, f - f_star, gnorm, rule.alpha,
                                   elapsed_ms(start)});
      result.trace.status = TerminationStatus::kConverged;
      break;
    }
  }
  result.K = K;
  result.f = f;
  return result;
}

}  // namespace lqrlab
