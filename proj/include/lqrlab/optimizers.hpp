#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lqrlab/convex_param.hpp"
#include "lqrlab/lqr_core.hpp"
#include "lqrlab/plant.hpp"
#include "lqrlab/zeroth_order.hpp"

namespace lqrlab {

enum class TerminationStatus {
  kConverged,
  kMaxIters,
  kLeftSublevelSet,
  kEstimateFailure,
};

struct TraceRow {
  int iter = 0;
  double obj_err = 0.0;    // f(K^k) - f(Kstar), nonnegative
  double grad_norm = 0.0;  // exact or estimated gradient norm
  double step = 0.0;
  double wall_ms = 0.0;
};

struct ConvergenceTrace {
  std::vector<TraceRow> rows;
  TerminationStatus status = TerminationStatus::kMaxIters;
};

/// Stepsize policy. Backtracking shrinks by 0.5 under an Armijo test with
/// sufficient-decrease 1e-4 and rejects destabilizing steps (an infinite
/// trial cost fails the test). `theory` runs a fixed stepsize computed by
/// the caller from the certificate constants (1/L_f, or mu1/(mu2 L_f) for
/// the random search) and is recorded as such.
struct StepRule {
  enum class Mode { kFixed, kBacktracking, kTheory };
  Mode mode = Mode::kBacktracking;
  double alpha = 1.0;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;

  static StepRule fixed(double alpha) { return {Mode::kFixed, alpha}; }
  static StepRule backtracking() { return {}; }
  static StepRule theory(double alpha) { return {Mode::kTheory, alpha}; }
};

struct OptimizeResult {
  ConvergenceTrace trace;
  MatrixXd K;
  double f = 0.0;
};

/// Integrates Kdot = -grad f(K) to time T with adaptive steps; steps that
/// would leave the stabilizing set are rejected and halved.
OptimizeResult gradient_flow(const Plant& plant, const MatrixXd& K0, double T,
                             double ode_tol = 1e-8);

/// K <- K - alpha grad f(K). Stops when ||grad f||_F <= tol (1 + |f|).
OptimizeResult gradient_descent(const Plant& plant, const MatrixXd& K0,
                                const StepRule& rule, int max_iters,
                                double tol);

/// Gradient descent on the reparameterized objective h; the trace reports
/// the equivalent gain-space quantities and the final gain comes back
/// through the inverse change of variables.
OptimizeResult gradient_descent_y(const Plant& plant, const MatrixXd& K0,
                                  const StepRule& rule, int max_iters,
                                  double tol,
                                  const std::optional<MatrixXd>& shift_k0 = {});

enum class Preconditioner { kIdentity, kRInverse, kXInverse };

/// K <- K - alpha H1 grad f(K) H2. With (alpha, H1, H2) =
/// (0.5, R^{-1}, X^{-1}) this is the Kleinman iteration; with
/// (alpha, I, X^{-1}) the natural gradient.
OptimizeResult preconditioned_descent(const Plant& plant, const MatrixXd& K0,
                                      Preconditioner H1, Preconditioner H2,
                                      double alpha, int max_iters,
                                      double tol = 1e-12);

struct RandomSearchOptions {
  int max_iters = 100;
  double target_eps = 0.0;   // stop when f - fstar <= target_eps (oracle mode)
  bool oracle_stop = true;   // false: stop on moving-average estimate norm
  double grad_tol = 0.0;     // model-free stopping threshold
  int retries = 3;           // re-draws after an estimate failure
};

/// Random search K <- K - alpha bar-grad f(K); iteration k draws samples
/// from streams k*N .. k*N + N-1 so runs are reproducible and iterations
/// independent. Objective errors in the trace come from the known-model
/// oracle for reporting; in model-free mode they never steer the run.
OptimizeResult random_search(const Plant& plant, const MatrixXd& K0,
                             const EstimatorConfig& estimator,
                             const StepRule& rule,
                             const RandomSearchOptions& options);

}  // namespace lqrlab
