#include "lqrlab/sim_engine.hpp"

#include <algorithm>
#include <cmath>

#include "lqrlab/errors.hpp"
#include "lqrlab/lqr_core.hpp"
#include "lqrlab/lyap_kernel.hpp"

namespace lqrlab {

namespace {

constexpr double kStateCap = 1e150;

// Dormand-Prince 5(4) tableau.
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187,
                 kA53 = 64448.0 / 6561, kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33,
                 kA63 = 46732.0 / 5247, kA64 = 49.0 / 176,
                 kA65 = -5103.0 / 18656;
constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192,
                 kB5 = -2187.0 / 6784, kB6 = 11.0 / 84;
// 5th-order minus embedded 4th-order weights.
constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695, kE4 = 71.0 / 1920,
                 kE5 = -17253.0 / 339200, kE6 = 22.0 / 525, kE7 = -1.0 / 40;

struct ClosedLoopOde {
  const MatrixXd& F;
  const MatrixXd& cost_weight;  // Q + K^T R K
  bool embedded_cost;

  // y = [x; z] in embedded mode, y = x otherwise.
  VectorXd operator()(const VectorXd& y) const {
    const int n = static_cast<int>(F.rows());
    VectorXd dy(y.size());
    const auto x = y.head(n);
    dy.head(n).noalias() = F * x;
    if (embedded_cost) dy(n) = x.dot(cost_weight * x);
    return dy;
  }

  double integrand(const VectorXd& y) const {
    const auto x = y.head(F.rows());
    return x.dot(cost_weight * x);
  }
};

void check_state(const VectorXd& y, double t) {
  if (!y.allFinite() || y.cwiseAbs().maxCoeff() > kStateCap) {
    throw OverflowError("rollout_cost: state blew up during simulation", t);
  }
}

double rk45_rollout(const ClosedLoopOde& ode, VectorXd y, double tau,
                    double abs_tol, double rel_tol, bool trapezoid) {
  double t = 0.0;
  double cost = 0.0;
  VectorXd k1 = ode(y);
  double h = std::min(tau, 1e-2 * (1.0 + y.norm()) / (1.0 + k1.norm()));

  int rejected_in_a_row = 0;
  while (t < tau) {
    h = std::min(h, tau - t);
    const VectorXd k2 = ode(y + h * (kA21 * k1));
    const VectorXd k3 = ode(y + h * (kA31 * k1 + kA32 * k2));
    const VectorXd k4 = ode(y + h * (kA41 * k1 + kA42 * k2 + kA43 * k3));
    const VectorXd k5 =
        ode(y + h * (kA51 * k1 + kA52 * k2 + kA53 * k3 + kA54 * k4));
    const VectorXd k6 = ode(y + h * (kA61 * k1 + kA62 * k2 + kA63 * k3 +
                                     kA64 * k4 + kA65 * k5));
    const VectorXd y_next =
        y + h * (kB1 * k1 + kB3 * k3 + kB4 * k4 + kB5 * k5 + kB6 * k6);
    const VectorXd k7 = ode(y_next);
    const VectorXd err_vec = h * (kE1 * k1 + kE3 * k3 + kE4 * k4 + kE5 * k5 +
                                  kE6 * k6 + kE7 * k7);

    if (!y_next.allFinite()) {
      throw OverflowError("rollout_cost: state blew up during simulation", t);
    }
    double err = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double scale =
          abs_tol + rel_tol * std::max(std::abs(y(i)), std::abs(y_next(i)));
      const double e = err_vec(i) / scale;
      err += e * e;
    }
    err = std::sqrt(err / static_cast<double>(y.size()));

    if (err <= 1.0) {
      if (trapezoid) {
        cost += 0.5 * h * (ode.integrand(y) + ode.integrand(y_next));
      }
      t += h;
      y = y_next;
      k1 = k7;  // first-same-as-last
      check_state(y, t);
      rejected_in_a_row = 0;
    } else if (++rejected_in_a_row > 60) {
      throw OverflowError("rollout_cost: step control stalled", t);
    }
    const double factor =
        err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    h *= std::clamp(factor, 0.2, 5.0);
    if (h < 1e-14 * std::max(1.0, tau)) {
      throw OverflowError("rollout_cost: step size underflow", t);
    }
  }
  return trapezoid ? cost : y(y.size() - 1);
}

double rk4_rollout(const ClosedLoopOde& ode, VectorXd y, double tau, double dt,
                   bool trapezoid) {
  double t = 0.0;
  double cost = 0.0;
  while (t < tau) {
    const double h = std::min(dt, tau - t);
    const VectorXd k1 = ode(y);
    const VectorXd k2 = ode(y + 0.5 * h * k1);
    const VectorXd k3 = ode(y + 0.5 * h * k2);
    const VectorXd k4 = ode(y + h * k3);
    const VectorXd y_next = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (trapezoid) {
      cost += 0.5 * h * (ode.integrand(y) + ode.integrand(y_next));
    }
    y = y_next;
    t += h;
    check_state(y, t);
  }
  return trapezoid ? cost : y(y.size() - 1);
}

}  // namespace

void RolloutConfig::validate() const {
  if (!(tau > 0.0)) throw Error("RolloutConfig: tau must be positive");
  if (integrator == Integrator::kAdaptiveRk45 &&
      !(abs_tol > 0.0 && abs_tol <= 1e-2 && rel_tol > 0.0 && rel_tol <= 1e-2)) {
    throw Error("RolloutConfig: tolerances must lie in (0, 1e-2]");
  }
  if (integrator == Integrator::kFixedRk4 && !(dt > 0.0)) {
    throw Error("RolloutConfig: dt must be positive");
  }
}

MatrixXd sample_sphere_direction(int m, int n, Rng& rng) {
  if (m < 1 || n < 1) throw Error("sample_sphere_direction: m, n >= 1");
  MatrixXd U(m, n);
  double norm = 0.0;
  do {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < m; ++i) U(i, j) = rng.normal();
    }
    norm = U.norm();
  } while (norm < 1e-300);
  U *= std::sqrt(static_cast<double>(m) * n) / norm;
  return U;
}

VectorXd sample_initial_condition(int n, InitialDist dist, Rng& rng) {
  VectorXd x(n);
  switch (dist) {
    case InitialDist::kStandardNormal:
      for (int i = 0; i < n; ++i) x(i) = rng.normal();
      break;
    case InitialDist::kRademacher:
      for (int i = 0; i < n; ++i) x(i) = rng.rademacher();
      break;
    case InitialDist::kUniformScaled: {
      const double half_width = std::sqrt(3.0);
      for (int i = 0; i < n; ++i) x(i) = rng.uniform(-half_width, half_width);
      break;
    }
  }
  return x;
}

VectorXd sample_plant_initial_condition(const Plant& plant, InitialDist dist,
                                        Rng& rng) {
  return plant.sqrt_omega() * sample_initial_condition(plant.n(), dist, rng);
}

double rollout_cost(const Plant& plant, const MatrixXd& K, const VectorXd& x0,
                    const RolloutConfig& config) {
  config.validate();
  if (x0.size() != plant.n() || !x0.allFinite()) {
    throw Error("rollout_cost: bad initial condition");
  }
  if (config.integrator == Integrator::kVanLoanExact) {
    return exact_rollout_cost(plant, K, x0, config.tau);
  }
  const MatrixXd F = closed_loop(plant, K);
  const MatrixXd cost_weight = plant.Q + K.transpose() * plant.R * K;
  const bool trapezoid = config.quadrature == Quadrature::kTrapezoid;

  VectorXd y(trapezoid ? plant.n() : plant.n() + 1);
  y.head(plant.n()) = x0;
  if (!trapezoid) y(plant.n()) = 0.0;
  const ClosedLoopOde ode{F, cost_weight, !trapezoid};

  if (config.integrator == Integrator::kFixedRk4) {
    return rk4_rollout(ode, y, config.tau, config.dt, trapezoid);
  }
  return rk45_rollout(ode, y, config.tau, config.abs_tol, config.rel_tol,
                      trapezoid);
}

double exact_rollout_cost(const Plant& plant, const MatrixXd& K,
                          const VectorXd& x0, double tau) {
  if (!(tau > 0.0)) throw Error("exact_rollout_cost: tau must be positive");
  const int n = plant.n();
  if (n > 200) throw Error("exact_rollout_cost: dense method limited to n <= 200");
  const MatrixXd F = closed_loop(plant, K);

  // Split the horizon so the Van Loan block [[-F, W], [0, F^T]] stays
  // representable (e^{-F t0} grows for stable F), then double:
  // G(2t) = G(t) + Phi(t) G(t) Phi(t)^T, Phi(2t) = Phi(t)^2.
  Eigen::BDCSVD<MatrixXd> svd(F);
  const double fnorm = svd.singularValues()(0);
  int doublings = 0;
  double t0 = tau;
  while (t0 * fnorm > 20.0 && doublings < 60) {
    t0 *= 0.5;
    ++doublings;
  }

  MatrixXd block(2 * n, 2 * n);
  block.setZero();
  block.topLeftCorner(n, n) = -F;
  block.topRightCorner(n, n) = x0 * x0.transpose();
  block.bottomRightCorner(n, n) = F.transpose();
  const MatrixXd E = matrix_exponential(block, t0);

  MatrixXd Phi = E.bottomRightCorner(n, n).transpose();  // e^{F t0}
  MatrixXd G = Phi * E.topRightCorner(n, n);             // integral over [0, t0]
  for (int d = 0; d < doublings; ++d) {
    G = G + Phi * G * Phi.transpose();
    Phi = Phi * Phi;
    if (!G.allFinite() || !Phi.allFinite()) {
      throw OverflowError("exact_rollout_cost: horizon overflow",
                          t0 * std::pow(2.0, d + 1));
    }
  }
  return ((plant.Q + K.transpose() * plant.R * K) * G).trace();
}

}  // namespace lqrlab
