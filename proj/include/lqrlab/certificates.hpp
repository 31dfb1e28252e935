#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lqrlab/lqr_core.hpp"
#include "lqrlab/plant.hpp"

namespace lqrlab {

/// Numeric thresholds valid over the sublevel set S_K(a) = {f(K) <= a}:
/// trace(X) <= a/lmin(Q), ||Y||_F <= a/sqrt(lmin(R) lmin(Q)),
/// lambda_min(X) >= nu/a, ||K||_F <= a/sqrt(nu lmin(R)),
/// trace(P) <= a/lmin(Omega).
struct SublevelBounds {
  double a = 0.0;
  double nu = 0.0;
  double trace_x_max = 0.0;
  double y_fro_max = 0.0;
  double lambda_min_x_min = 0.0;
  double k_fro_max = 0.0;
  double trace_p_max = 0.0;
};

SublevelBounds sublevel_bounds(const Plant& plant, double a);

/// Every explicit theoretical constant attached to the sublevel set
/// S_K(a), evaluated by literal formula plug-in from problem data and the
/// exact operator 2-norms. All conservative: tested as inequalities.
struct SublevelCertificate {
  double a = 0.0;

  double nu = 0.0;        // lower bound constant for lambda_min(X)
  double eta = 0.0;       // ||B_op||_2 / (lmin(Q) lmin(Omega) sqrt(nu lmin(R)))
  double L = 0.0;         // smoothness of h over S_Y(a)
  double mu = 0.0;        // strong convexity of h over S_Y(a)
  double c = 0.0;         // gradient-comparison constant
  double mu_f = 0.0;      // PL constant mu c^2
  double L_f = 0.0;       // Lipschitz constant of grad f over S_K(a)
  double b = 0.0;         // iterate-error constant
  double kappa1 = 0.0;    // truncation bias amplitude
  double kappa2 = 0.0;    // truncation bias decay rate
  double r_a = 0.0;       // perturbation budget: K + r(a)U stays in S_K(2a)

  // Exact operator norms entering the formulas (2-norms of explicit
  // representations; no ||.||_S estimates are involved here).
  double norm_b_op = 0.0;      // ||Y -> BY + Y^T B^T||_2
  double norm_ainv = 0.0;      // ||A_op^{-1}||_2
  double norm_ainv_b = 0.0;    // ||A_op^{-1} B_op||_2

  bool shifted = false;  // computed under a stabilizing shift K0
};

/// Throws SingularOperatorError if the open-loop map is singular and no
/// shift is supplied.
SublevelCertificate certificate(const Plant& plant, double a,
                                const std::optional<MatrixXd>& shift_k0 = {});

/// Local Lipschitz certificates at K: each eps_i bounds the change of
/// X, P, grad f, f against ||Khat - K||_2 < delta.
struct PerturbationConstants {
  double delta = 0.0;
  double eps1 = 0.0;
  double eps2 = 0.0;
  double eps3 = 0.0;
  double eps4 = 0.0;
};

PerturbationConstants perturbation_constants(const Plant& plant,
                                             const MatrixXd& K);

/// r(a) = min{c1, 1/c2} / (a sqrt(mn)) with c1 a lower bound on delta and
/// c2 an upper bound on eps4 / a^2 over S_K(a), both from sublevel_bounds.
double r_of_a(const Plant& plant, double a);

/// Stabilizing gains spread over S_K(a): scaled random rays from Kstar
/// plus points along short gradient-descent trajectories. Deterministic
/// given seed; throws SamplingError on starvation.
std::vector<MatrixXd> sample_sublevel_gains(const Plant& plant, double a,
                                            int count, std::uint64_t seed);

struct PlReport {
  bool pass = false;
  double mu_f = 0.0;        // certificate constant; PL threshold is 2 mu_f
  double min_ratio = 0.0;   // min ||grad f||^2 / (f - fstar) over samples
  int samples = 0;
  int skipped_near_optimal = 0;
};

PlReport pl_check(const Plant& plant, double a, int samples, std::uint64_t seed);

/// Upper bound on (||(A_K^*)^{-1}||_2 + ||(A_K^*)^{-1}||_S)/lambda_min(X)
/// over S_K(a). The ||.||_S part rests on a sampled ratio estimate and is
/// flagged as such.
struct ThetaBound {
  double value = 0.0;
  double norm2_bound = 0.0;     // a / (lmin(Q) lmin(Omega)), exact
  double s_ratio = 1.0;         // max sampled ||.||_S / ||.||_2, >= 1
  bool s_ratio_is_estimate = true;
};

ThetaBound theta_bound(const Plant& plant, double a, int samples,
                       std::uint64_t seed);

/// Empirical Lipschitz coefficient of the per-initial-condition Hessian
/// form j_v over S_K(a): max observed
/// |j_v(K1) - j_v(K2)| / (||J||_F^2 ||v||^2 ||K1 - K2||_F). EMPIRICAL:
/// stands in for the paper-level polynomial whose coefficients are not
/// numerically specified.
double empirical_ell(const Plant& plant, double a, int samples,
                     std::uint64_t seed);

}  // namespace lqrlab
