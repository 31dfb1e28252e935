#include "lqrlab/mass_spring.hpp"

#include "lqrlab/errors.hpp"
#include "lqrlab/lyap_kernel.hpp"

namespace lqrlab {

Plant make_mass_spring(const MassSpringSpec& spec) {
  const int s = spec.masses;
  if (s < 1) throw Error("make_mass_spring: need at least one mass");
  const int n = 2 * s;

  MatrixXd T = 2.0 * MatrixXd::Identity(s, s);
  for (int i = 0; i + 1 < s; ++i) {
    T(i, i + 1) = -1.0;
    T(i + 1, i) = -1.0;
  }

  MatrixXd A = MatrixXd::Zero(n, n);
  A.topRightCorner(s, s) = MatrixXd::Identity(s, s);
  A.bottomLeftCorner(s, s) = -T;
  A.bottomRightCorner(s, s) = -T;

  MatrixXd B = MatrixXd::Zero(n, s);
  B.bottomRows(s) = MatrixXd::Identity(s, s);

  const MatrixXd Q = spec.Q.value_or(MatrixXd::Identity(n, n));
  const MatrixXd R = spec.R.value_or(MatrixXd::Identity(s, s));
  const MatrixXd Omega = spec.Omega.value_or(MatrixXd::Identity(n, n));

  Plant plant(A, B, Q, R, Omega);
  const auto report = is_hurwitz(plant.A);
  if (!report.stable) {
    throw Error("make_mass_spring: chain dynamics unexpectedly unstable");
  }
  return plant;
}

Plant make_mass_spring(int masses) { return make_mass_spring({.masses = masses}); }

Plant make_mass_spring_heavy_weights(int masses) {
  if (masses < 4) {
    throw Error("make_mass_spring_heavy_weights: needs s >= 4 (weight on e4)");
  }
  const int n = 2 * masses;
  MassSpringSpec spec;
  spec.masses = masses;
  MatrixXd Q = MatrixXd::Identity(n, n);
  Q(0, 0) += 100.0;
  MatrixXd R = MatrixXd::Identity(masses, masses);
  R(3, 3) += 1000.0;
  spec.Q = Q;
  spec.R = R;
  return make_mass_spring(spec);
}

}  // namespace lqrlab
