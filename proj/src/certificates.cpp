#include "lqrlab/certificates.hpp"

#include <algorithm>
#include <cmath>

#include "lqrlab/convex_param.hpp"
#include "lqrlab/errors.hpp"
#include "lqrlab/lyap_kernel.hpp"
#include "lqrlab/rng.hpp"

namespace lqrlab {

namespace {

double spectral_norm(const MatrixXd& M) {
  Eigen::BDCSVD<MatrixXd> svd(M);
  return svd.singularValues()(0);
}

double nu_constant(const Plant& plant) {
  const double term = spectral_norm(plant.A) / std::sqrt(plant.lambda_min_q()) +
                      spectral_norm(plant.B) / std::sqrt(plant.lambda_min_r());
  const double lo = plant.lambda_min_omega();
  return 0.25 * lo * lo / (term * term);
}

MatrixXd random_direction(int m, int n, Rng& rng) {
  MatrixXd G(m, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < m; ++i) G(i, j) = rng.normal();
  }
  const double norm = G.norm();
  return norm > 0.0 ? MatrixXd(G / norm) : MatrixXd::Zero(m, n);
}

}  // namespace

SublevelBounds sublevel_bounds(const Plant& plant, double a) {
  if (!(a > 0.0)) throw Error("sublevel_bounds: a must be positive");
  SublevelBounds out;
  out.a = a;
  out.nu = nu_constant(plant);
  out.trace_x_max = a / plant.lambda_min_q();
  out.y_fro_max = a / std::sqrt(plant.lambda_min_r() * plant.lambda_min_q());
  out.lambda_min_x_min = out.nu / a;
  out.k_fro_max = a / std::sqrt(out.nu * plant.lambda_min_r());
  out.trace_p_max = a / plant.lambda_min_omega();
  return out;
}

SublevelCertificate certificate(const Plant& plant, double a,
                                const std::optional<MatrixXd>& shift_k0) {
  if (!(a > 0.0)) throw Error("certificate: a must be positive");
  const double lq = plant.lambda_min_q();
  const double lr = plant.lambda_min_r();
  const double lo = plant.lambda_min_omega();
  const double norm_R = spectral_norm(plant.R);
  const double norm_B = spectral_norm(plant.B);

  SublevelCertificate cert;
  cert.a = a;
  cert.shifted = shift_k0.has_value();
  cert.nu = nu_constant(plant);

  const MatrixXd A0 =
      shift_k0 ? MatrixXd(plant.A - plant.B * *shift_k0) : plant.A;
  const OperatorRep a_op = make_lyap_operator(A0);
  const OperatorRep b_op = make_b_operator(plant.B, plant.n());
  const OperatorRep a_inv = invert_operator(a_op);
  cert.norm_b_op = operator_two_norm(b_op);
  cert.norm_ainv = operator_two_norm(a_inv);
  cert.norm_ainv_b = operator_two_norm(compose(a_inv, b_op));

  const double sq_nu_lr = std::sqrt(cert.nu * lr);
  cert.eta = cert.norm_b_op / (lq * lo * sq_nu_lr);

  const double smooth_inner = 1.0 + a * cert.norm_ainv_b / sq_nu_lr;
  cert.L = (2.0 * a * norm_R / cert.nu) * smooth_inner * smooth_inner;

  const double mu_inner = 1.0 + a * a * cert.eta;
  cert.mu = 2.0 * lr * lq / (a * mu_inner * mu_inner);

  cert.c = cert.nu * sq_nu_lr /
           (2.0 * a * a * cert.norm_ainv * norm_B + a * sq_nu_lr);
  cert.mu_f = cert.mu * cert.c * cert.c;

  cert.L_f = 2.0 * a * norm_R / lq +
             (8.0 * a * a * a * norm_B / (lq * lq * lo)) *
                 (norm_B / lo + norm_R / sq_nu_lr);

  cert.b = a * a * norm_R / (cert.nu * lr * lq);

  cert.kappa1 = (plant.Q.norm() + a * a * norm_R / (cert.nu * lr)) *
                (a * a * a) / (cert.nu * lo * lq * lq);
  cert.kappa2 = lo * lq / a;

  cert.r_a = r_of_a(plant, a);
  return cert;
}

PerturbationConstants perturbation_constants(const Plant& plant,
                                             const MatrixXd& K) {
  const MatrixXd X = state_covariance(plant, K);
  const MatrixXd P = cost_to_go(plant, K);
  const double norm_X = spectral_norm(X);
  const double norm_P = spectral_norm(P);
  const double norm_K = spectral_norm(K);
  const double fro_B = plant.B.norm();
  const double fro_R = plant.R.norm();
  const double lq = plant.lambda_min_q();
  const double lo = plant.lambda_min_omega();

  PerturbationConstants out;
  out.delta =
      (1.0 / (4.0 * fro_B)) * std::min(lo / X.trace(), lq / P.trace());
  out.eps1 = norm_X / out.delta;
  out.eps2 = (2.0 * P.trace() / lq) *
             (2.0 * norm_P * fro_B + (out.delta + 2.0 * norm_K) * fro_R);
  out.eps3 = 2.0 * (out.eps1 * norm_K + 2.0 * norm_X) * fro_R +
             2.0 * out.eps1 * (norm_P + 2.0 * out.eps2 * norm_X) * fro_B;
  out.eps4 = out.eps2 * plant.Omega.norm();
  return out;
}

double r_of_a(const Plant& plant, double a) {
  if (!(a > 0.0)) throw Error("r_of_a: a must be positive");
  const double lq = plant.lambda_min_q();
  const double lr = plant.lambda_min_r();
  const double lo = plant.lambda_min_omega();
  const double fro_B = plant.B.norm();
  const double fro_R = plant.R.norm();
  const double nu = nu_constant(plant);

  // Lower bound on delta over S_K(a): both traces obey the sublevel
  // bounds, so delta >= c1/a.
  const double c1 = lo * lq / (4.0 * fro_B);
  // Upper bound eps4 <= c2 a^2 over S_K(a): trace(P), ||P||_2 <= a/lo,
  // ||K||_2 <= a/sqrt(nu lr), delta <= a lo / (4 fro_B nu).
  const double c2 = plant.Omega.norm() * (2.0 / (lo * lq)) *
                    (2.0 * fro_B / lo +
                     fro_R * (lo / (4.0 * fro_B * nu) + 2.0 / std::sqrt(nu * lr)));
  const double mn = static_cast<double>(plant.m()) * plant.n();
  return std::min(c1, 1.0 / c2) / (a * std::sqrt(mn));
}

std::vector<MatrixXd> sample_sublevel_gains(const Plant& plant, double a,
                                            int count, std::uint64_t seed) {
  const RiccatiSolution riccati = solve_riccati_kleinman(plant);
  const double f_star = (riccati.Pstar * plant.Omega).trace();
  if (!(a > f_star)) {
    throw SamplingError("sample_sublevel_gains: a must exceed f(Kstar)");
  }
  const auto cost = [&](const MatrixXd& K) { return lqr_cost(plant, K).value; };

  std::vector<MatrixXd> out;
  out.reserve(count);
  const int max_attempts = 60 * count + 200;
  int attempts = 0;
  std::uint64_t stream = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > max_attempts) {
      throw SamplingError("sample_sublevel_gains: rejection sampling starved");
    }
    Rng rng({seed, stream++});
    const MatrixXd G = random_direction(plant.m(), plant.n(), rng);

    // Largest step along the ray from Kstar that stays in S_K(a).
    double t_in = 0.0, t_out = 1.0;
    while (cost(riccati.Kstar + t_out * G) <= a && t_out < 1e6) {
      t_in = t_out;
      t_out *= 2.0;
    }
    if (t_in == 0.0) {
      for (int halve = 0; halve < 40 && t_out > 1e-8; ++halve) {
        t_out *= 0.5;
        if (cost(riccati.Kstar + t_out * G) <= a) {
          t_in = t_out;
          break;
        }
      }
      if (t_in == 0.0) continue;
    }
    for (int bisect = 0; bisect < 12; ++bisect) {
      const double mid = 0.5 * (t_in + t_out);
      (cost(riccati.Kstar + mid * G) <= a ? t_in : t_out) = mid;
    }

    const double scale = rng.uniform(0.05, 1.0);
    MatrixXd K = riccati.Kstar + scale * t_in * G;
    if (!(cost(K) <= a)) continue;
    out.push_back(K);

    // A short descent run from the accepted point; iterates stay in
    // S_K(a) by monotonicity and spread the sample across cost levels.
    const int extra = std::min<int>(3, count - static_cast<int>(out.size()));
    for (int step = 0; step < extra; ++step) {
      const MatrixXd g = gradient(plant, K);
      if (g.norm() < 1e-12) break;
      double alpha = 1.0 / std::max(1.0, g.norm());
      const double f0 = cost(K);
      bool moved = false;
      for (int bt = 0; bt < 40; ++bt) {
        const MatrixXd K_next = K - alpha * g;
        const double f1 = cost(K_next);
        if (std::isfinite(f1) && f1 <= f0 - 1e-4 * alpha * g.squaredNorm()) {
          K = K_next;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
      out.push_back(K);
    }
  }
  out.resize(count);
  return out;
}

PlReport pl_check(const Plant& plant, double a, int samples, std::uint64_t seed) {
  const SublevelCertificate cert = certificate(plant, a);
  const RiccatiSolution riccati = solve_riccati_kleinman(plant);
  const double f_star = (riccati.Pstar * plant.Omega).trace();

  PlReport report;
  report.mu_f = cert.mu_f;
  report.min_ratio = std::numeric_limits<double>::infinity();

  const auto gains = sample_sublevel_gains(plant, a, samples, seed);
  for (const MatrixXd& K : gains) {
    const double gap = lqr_cost(plant, K).value - f_star;
    if (gap < 1e-13 * (1.0 + std::abs(f_star))) {
      ++report.skipped_near_optimal;  // both sides vanish at Kstar
      continue;
    }
    const double ratio = gradient(plant, K).squaredNorm() / gap;
    report.min_ratio = std::min(report.min_ratio, ratio);
    ++report.samples;
  }
  report.pass = report.samples > 0 && report.min_ratio >= 2.0 * cert.mu_f;
  return report;
}

ThetaBound theta_bound(const Plant& plant, double a, int samples,
                       std::uint64_t seed) {
  if (!(a > 0.0)) throw Error("theta_bound: a must be positive");
  ThetaBound out;
  out.norm2_bound = a / (plant.lambda_min_q() * plant.lambda_min_omega());

  // Sampled upper estimate of ||.||_S / ||.||_2 for the inverse
  // closed-loop adjoint operator over S_K(a); exact (== 1) for n = 1.
  out.s_ratio = 1.0;
  if (plant.n() > 1) {
    const auto gains =
        sample_sublevel_gains(plant, a, std::max(1, samples), seed);
    for (const MatrixXd& K : gains) {
      const OperatorRep inv_adjoint =
          invert_operator(make_adjoint_lyap_operator(closed_loop(plant, K)));
      const double two = operator_two_norm(inv_adjoint);
      const double s_est = spectral_induced_norm_estimate(inv_adjoint, 8, seed);
      out.s_ratio = std::max(out.s_ratio, s_est / two);
    }
  }
  out.s_ratio_is_estimate = plant.n() > 1;

  const double lambda_min_x_lower = nu_constant(plant) / a;
  out.value = (1.0 + out.s_ratio) * out.norm2_bound / lambda_min_x_lower;
  return out;
}

double empirical_ell(const Plant& plant, double a, int samples,
                     std::uint64_t seed) {
  const auto gains = sample_sublevel_gains(plant, a, samples, seed);
  const auto cost = [&](const MatrixXd& K) { return lqr_cost(plant, K).value; };

  double ell = 0.0;
  std::uint64_t stream = 1u << 20;
  for (const MatrixXd& K1 : gains) {
    Rng rng({seed, stream++});
    MatrixXd step = random_direction(plant.m(), plant.n(), rng);
    double h = 0.01 * (1.0 + K1.norm());
    MatrixXd K2 = K1 + h * step;
    for (int halve = 0; halve < 30 && !(cost(K2) <= a); ++halve) {
      h *= 0.5;
      K2 = K1 + h * step;
    }
    if (!(cost(K2) <= a)) continue;

    const MatrixXd J = random_direction(plant.m(), plant.n(), rng);
    Eigen::VectorXd v(plant.n());
    for (int i = 0; i < plant.n(); ++i) v(i) = rng.normal();
    if (v.norm() == 0.0) continue;
    v.normalize();
    const MatrixXd vvT = v * v.transpose();

    const double j1 = hessian_quadratic_form(plant, K1, J, &vvT);
    const double j2 = hessian_quadratic_form(plant, K2, J, &vvT);
    ell = std::max(ell, std::abs(j1 - j2) / h);
  }
  if (ell == 0.0) {
    throw SamplingError("empirical_ell: no admissible sample pairs found");
  }
  return ell;
}

}  // namespace lqrlab
