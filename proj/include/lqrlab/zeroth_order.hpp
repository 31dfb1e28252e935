#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lqrlab/plant.hpp"
#include "lqrlab/rng.hpp"
#include "lqrlab/sim_engine.hpp"

namespace lqrlab {

enum class EstimateKind {
  kTruncatedBar,   // Algorithm-style two-point with horizon tau
  kInfiniteTilde,  // two-point with exact infinite-horizon costs
  kUnbiasedHat,    // projection of exact per-sample gradients
};

struct EstimatorConfig {
  double r = 1e-4;  // smoothing radius
  int N = 1;        // sample count
  double tau = 1.0; // horizon (truncated estimator)
  InitialDist dist = InitialDist::kStandardNormal;
  RngStream stream;  // sample i draws from {stream.seed, stream.stream + i}

  // Cost evaluation backend for the truncated estimator.
  Integrator integrator = Integrator::kAdaptiveRk45;
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  double dt = 1e-2;
  Quadrature quadrature = Quadrature::kEmbedded;

  bool keep_samples = false;

  void validate() const;
  RolloutConfig rollout() const;
};

struct SampleArtifact {
  MatrixXd U;
  Eigen::VectorXd x0;
  double cost_plus = 0.0;   // two-point estimators only
  double cost_minus = 0.0;
};

struct GradientEstimate {
  MatrixXd value;
  EstimateKind kind = EstimateKind::kTruncatedBar;
  EstimatorConfig config;
  std::vector<SampleArtifact> samples;  // populated when keep_samples
};

/// Two-point estimate from tau-truncated rollouts: one shared initial
/// condition per sample pair, gains K +- r U_i. Bit-reproducible from
/// (plant, K, config). Rollout overflow fails the whole estimate
/// (EstimateFailure naming the samples); dropping samples would bias it.
GradientEstimate estimate_gradient_twopoint(const Plant& plant,
                                            const MatrixXd& K,
                                            const EstimatorConfig& config);

/// Same draws, exact infinite-horizon per-sample costs x^T P x. Requires
/// every perturbed gain stabilizing (the well-definedness condition);
/// violations raise an error citing the r(a) budget.
GradientEstimate estimate_gradient_infinite(const Plant& plant,
                                            const MatrixXd& K,
                                            const EstimatorConfig& config);

/// Unbiased estimate (1/N) sum <grad f_{x_i}(K), U_i> U_i with exact
/// per-sample gradients; independent of r and tau.
GradientEstimate estimate_gradient_unbiased(const Plant& plant,
                                            const MatrixXd& K,
                                            const EstimatorConfig& config);

/// Pairwise distances of the three estimates on one shared (U_i, x_i)
/// draw, against the certified truncation bound and the (empirically
/// fitted) quadratic smoothing bound at sublevel value a.
struct BiasReport {
  double dist_tilde_bar = 0.0;
  double dist_hat_tilde = 0.0;
  double dist_hat_bar = 0.0;
  double bound_tilde_bar = 0.0;
  double bound_hat_tilde = 0.0;
  double max_x_norm_sq = 0.0;
  double a = 0.0;
  double ell = 0.0;  // empirical fit (see certificates)
  bool ell_is_empirical = true;
  bool bounds_hold = false;
};

BiasReport bias_decomposition(const Plant& plant, const MatrixXd& K,
                              const EstimatorConfig& config, double a,
                              std::optional<double> ell = {});

/// Empirical frequencies of the correlation events over independent
/// unbiased estimates: M1 = {<est, grad f> >= 1/4 ||grad f||^2} and
/// M2 = {||est||^2 <= mu2 ||grad f||^2}. When mu2 is not supplied it is
/// set to the empirical 99th percentile of the norm ratios and the
/// implied absolute constant of the theoretical mu2 shape is reported.
struct CorrelationReport {
  double mu1 = 0.25;
  double p_m1 = 0.0;
  double mu2 = 0.0;
  bool mu2_is_empirical = true;
  double p_m2 = 0.0;
  double implied_mu2_constant = 0.0;
  std::vector<double> inner_products;  // <est, grad f> per trial
  std::vector<double> norm_ratios;     // ||est||^2 / ||grad f||^2 per trial
};

CorrelationReport correlation_events(const Plant& plant, const MatrixXd& K,
                                     int N, int trials, std::uint64_t seed,
                                     std::optional<double> mu2 = {});

}  // namespace lqrlab
