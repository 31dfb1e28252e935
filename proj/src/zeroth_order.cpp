#include "lqrlab/zeroth_order.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lqrlab/certificates.hpp"
#include "lqrlab/errors.hpp"
#include "lqrlab/lqr_core.hpp"
#include "lqrlab/lyap_kernel.hpp"
#include "lqrlab/parallel.hpp"

namespace lqrlab {

namespace {

struct Draw {
  MatrixXd U;
  Eigen::VectorXd x0;
};

Draw draw_sample(const Plant& plant, const EstimatorConfig& config, int i) {
  Rng rng({config.stream.seed, config.stream.stream + static_cast<std::uint64_t>(i)});
  Draw d;
  d.U = sample_sphere_direction(plant.m(), plant.n(), rng);
  d.x0 = sample_plant_initial_condition(plant, config.dist, rng);
  return d;
}

}  // namespace

void EstimatorConfig::validate() const {
  if (!(r > 0.0)) throw Error("EstimatorConfig: r must be positive");
  if (N < 1) throw Error("EstimatorConfig: N must be at least 1");
  if (!(tau > 0.0)) throw Error("EstimatorConfig: tau must be positive");
}

RolloutConfig EstimatorConfig::rollout() const {
  RolloutConfig rc;
  rc.tau = tau;
  rc.integrator = integrator;
  rc.abs_tol = abs_tol;
  rc.rel_tol = rel_tol;
  rc.dt = dt;
  rc.quadrature = quadrature;
  return rc;
}

GradientEstimate estimate_gradient_twopoint(const Plant& plant,
                                            const MatrixXd& K,
                                            const EstimatorConfig& config) {
  config.validate();
  const RolloutConfig rollout = config.rollout();
  const int N = config.N;

  std::vector<MatrixXd> contrib(N);
  std::vector<SampleArtifact> artifacts(N);
  std::vector<int> failed(N, 0);

  parallel_for(N, [&](std::size_t i) {
    const Draw d = draw_sample(plant, config, static_cast<int>(i));
    try {
      const double f_plus =
          rollout_cost(plant, K + config.r * d.U, d.x0, rollout);
      const double f_minus =
          rollout_cost(plant, K - config.r * d.U, d.x0, rollout);
      contrib[i] = (f_plus - f_minus) * d.U;
      if (config.keep_samples) {
        artifacts[i] = {d.U, d.x0, f_plus, f_minus};
      }
    } catch (const OverflowError&) {
      failed[i] = 1;
    }
  });

  std::vector<int> failures;
  for (int i = 0; i < N; ++i) {
    if (failed[i]) failures.push_back(i);
  }
  if (!failures.empty()) {
    std::ostringstream msg;
    msg << "estimate_gradient_twopoint: rollout overflow in " << failures.size()
        << " of " << N << " samples (r too large for this K?)";
    throw EstimateFailure(msg.str(), failures);
  }

  GradientEstimate est;
  est.kind = EstimateKind::kTruncatedBar;
  est.config = config;
  est.value = MatrixXd::Zero(plant.m(), plant.n());
  for (int i = 0; i < N; ++i) est.value += contrib[i];  // index order
  est.value /= 2.0 * config.r * N;
  if (config.keep_samples) est.samples = std::move(artifacts);
  return est;
}

GradientEstimate estimate_gradient_infinite(const Plant& plant,
                                            const MatrixXd& K,
                                            const EstimatorConfig& config) {
  config.validate();
  const int N = config.N;

  std::vector<MatrixXd> contrib(N);
  std::vector<SampleArtifact> artifacts(N);
  std::vector<int> infeasible(N, 0);

  const auto exact_cost = [&](const MatrixXd& gain, const Eigen::VectorXd& x0,
                              bool* ok) {
    const MatrixXd F = closed_loop(plant, gain);
    const LyapunovSolver solver(F);
    if (!solver.hurwitz().stable) {
      *ok = false;
      return 0.0;
    }
    const MatrixXd P = solve_adjoint_lyapunov(
        F, plant.Q + gain.transpose() * plant.R * gain);
    return x0.dot(P * x0);
  };

  parallel_for(N, [&](std::size_t i) {
    const Draw d = draw_sample(plant, config, static_cast<int>(i));
    bool ok = true;
    const double f_plus = exact_cost(K + config.r * d.U, d.x0, &ok);
    const double f_minus = ok ? exact_cost(K - config.r * d.U, d.x0, &ok) : 0.0;
    if (!ok) {
      infeasible[i] = 1;
      return;
    }
    contrib[i] = (f_plus - f_minus) * d.U;
    if (config.keep_samples) artifacts[i] = {d.U, d.x0, f_plus, f_minus};
  });

  std::vector<int> failures;
  for (int i = 0; i < N; ++i) {
    if (infeasible[i]) failures.push_back(i);
  }
  if (!failures.empty()) {
    std::ostringstream msg;
    msg << "estimate_gradient_infinite: K +- rU left the stabilizing set for "
        << failures.size() << " of " << N << " samples";
    const LqrCost cost = lqr_cost(plant, K);
    if (cost.stabilizing()) {
      msg << "; the certified budget at a = f(K) is r(a) = "
          << r_of_a(plant, cost.value) << " while r = " << config.r;
    }
    throw EstimateFailure(msg.str(), failures);
  }

  GradientEstimate est;
  est.kind = EstimateKind::kInfiniteTilde;
  est.config = config;
  est.value = MatrixXd::Zero(plant.m(), plant.n());
  for (int i = 0; i < N; ++i) est.value += contrib[i];
  est.value /= 2.0 * config.r * N;
  if (config.keep_samples) est.samples = std::move(artifacts);
  return est;
}

GradientEstimate estimate_gradient_unbiased(const Plant& plant,
                                            const MatrixXd& K,
                                            const EstimatorConfig& config) {
  config.validate();
  const MatrixXd F = closed_loop(plant, K);
  const LyapunovSolver solver(F);
  if (!solver.hurwitz().stable) {
    throw NotStabilizingError("estimate_gradient_unbiased: K is not stabilizing");
  }
  const MatrixXd P =
      solve_adjoint_lyapunov(F, plant.Q + K.transpose() * plant.R * K);
  const MatrixXd E = 2.0 * (plant.R * K - plant.B.transpose() * P);

  const int N = config.N;
  std::vector<MatrixXd> contrib(N);
  std::vector<SampleArtifact> artifacts(N);
  parallel_for(N, [&](std::size_t i) {
    const Draw d = draw_sample(plant, config, static_cast<int>(i));
    const MatrixXd X_x = solver.solve(d.x0 * d.x0.transpose());
    const MatrixXd grad_x = E * X_x;
    contrib[i] = grad_x.cwiseProduct(d.U).sum() * d.U;
    if (config.keep_samples) {
      artifacts[i] = {d.U, d.x0,
                      std::numeric_limits<double>::quiet_NaN(),
                      std::numeric_limits<double>::quiet_NaN()};
    }
  });

  GradientEstimate est;
  est.kind = EstimateKind::kUnbiasedHat;
  est.config = config;
  est.value = MatrixXd::Zero(plant.m(), plant.n());
  for (int i = 0; i < N; ++i) est.value += contrib[i];
  est.value /= static_cast<double>(N);
  if (config.keep_samples) est.samples = std::move(artifacts);
  return est;
}

BiasReport bias_decomposition(const Plant& plant, const MatrixXd& K,
                              const EstimatorConfig& config, double a,
                              std::optional<double> ell) {
  const LqrCost cost = lqr_cost(plant, K);
  if (!cost.stabilizing() || cost.value > a) {
    throw Error("bias_decomposition: K must lie in S_K(a)");
  }
  const double budget = r_of_a(plant, a);
  if (config.r > budget) {
    std::ostringstream msg;
    msg << "bias_decomposition: r = " << config.r
        << " exceeds the certified budget r(a) = " << budget;
    throw Error(msg.str());
  }

  const GradientEstimate bar = estimate_gradient_twopoint(plant, K, config);
  const GradientEstimate tilde = estimate_gradient_infinite(plant, K, config);
  const GradientEstimate hat = estimate_gradient_unbiased(plant, K, config);

  BiasReport report;
  report.a = a;
  report.dist_tilde_bar = (tilde.value - bar.value).norm();
  report.dist_hat_tilde = (hat.value - tilde.value).norm();
  report.dist_hat_bar = (hat.value - bar.value).norm();

  for (int i = 0; i < config.N; ++i) {
    const Draw d = draw_sample(plant, config, i);
    report.max_x_norm_sq = std::max(report.max_x_norm_sq, d.x0.squaredNorm());
  }

  const SublevelCertificate cert2 = certificate(plant, 2.0 * a);
  const double mn = static_cast<double>(plant.m()) * plant.n();
  report.bound_tilde_bar = (std::sqrt(mn) / config.r) * report.max_x_norm_sq *
                           cert2.kappa1 *
                           std::exp(-cert2.kappa2 * config.tau);
  report.ell =
      ell ? *ell : empirical_ell(plant, 2.0 * a, 40, config.stream.seed + 17);
  report.ell_is_empirical = true;
  const double rmn = config.r * mn;
  report.bound_hat_tilde = 0.5 * rmn * rmn * report.ell * report.max_x_norm_sq;

  report.bounds_hold = report.dist_tilde_bar <= report.bound_tilde_bar &&
                       report.dist_hat_tilde <= report.bound_hat_tilde;
  return report;
}

CorrelationReport correlation_events(const Plant& plant, const MatrixXd& K,
                                     int N, int trials, std::uint64_t seed,
                                     std::optional<double> mu2) {
  if (N < 1 || trials < 1) {
    throw Error("correlation_events: N and trials must be positive");
  }
  const MatrixXd grad = gradient(plant, K);
  const double grad_sq = grad.squaredNorm();
  if (!(grad_sq > 0.0)) {
    throw Error("correlation_events: grad f(K) vanishes (K = Kstar?)");
  }

  CorrelationReport report;
  report.inner_products.resize(trials);
  report.norm_ratios.resize(trials);

  std::vector<MatrixXd> estimates(trials);
  parallel_for(trials, [&](std::size_t t) {
    EstimatorConfig config;
    config.N = N;
    config.stream = {seed, static_cast<std::uint64_t>(t) *
                               static_cast<std::uint64_t>(N)};
    estimates[t] = estimate_gradient_unbiased(plant, K, config).value;
  });
  for (int t = 0; t < trials; ++t) {
    report.inner_products[t] = estimates[t].cwiseProduct(grad).sum();
    report.norm_ratios[t] = estimates[t].squaredNorm() / grad_sq;
  }

  int m1 = 0;
  for (double ip : report.inner_products) {
    if (ip >= report.mu1 * grad_sq) ++m1;
  }
  report.p_m1 = static_cast<double>(m1) / trials;

  if (mu2) {
    report.mu2 = *mu2;
    report.mu2_is_empirical = false;
  } else {
    std::vector<double> sorted = report.norm_ratios;
    std::sort(sorted.begin(), sorted.end());
    const auto idx = static_cast<std::size_t>(
        std::min<double>(sorted.size() - 1.0, std::ceil(0.99 * sorted.size()) - 1.0));
    report.mu2 = sorted[idx];
    report.mu2_is_empirical = true;
  }
  int m2 = 0;
  for (double ratio : report.norm_ratios) {
    if (ratio <= report.mu2) ++m2;
  }
  report.p_m2 = static_cast<double>(m2) / trials;

  // Implied absolute constant of the theoretical mu2 shape
  // C (kappa^2 theta sqrt(mn) log n + sqrt(m))^2 at beta = kappa = 1.
  {
    const OperatorRep inv_adjoint =
        invert_operator(make_adjoint_lyap_operator(closed_loop(plant, K)));
    const double two = operator_two_norm(inv_adjoint);
    const double s_est = plant.n() > 1
                             ? spectral_induced_norm_estimate(inv_adjoint, 8, seed)
                             : two;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(state_covariance(plant, K));
    const double theta = (two + s_est) / eig.eigenvalues().minCoeff();
    const double mn = static_cast<double>(plant.m()) * plant.n();
    const double shape = theta * std::sqrt(mn) * std::log(std::max(2.0, double(plant.n()))) +
                         std::sqrt(double(plant.m()));
    report.implied_mu2_constant = report.mu2 / (shape * shape);
  }
  return report;
}

}  // namespace lqrlab
