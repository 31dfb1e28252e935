#pragma once

#include <optional>

#include "lqrlab/plant.hpp"

namespace lqrlab {

/// Mass-spring-damper chain with s unit masses: n = 2s states
/// (positions, velocities), m = s inputs,
/// A = [[0, I], [-T, -T]], B = [0; I], T = Toeplitz(2 on the diagonal,
/// -1 on the first off-diagonals). A is Hurwitz for every s; verified at
/// construction.
struct MassSpringSpec {
  int masses = 1;
  // Defaults are identity weights; override any subset.
  std::optional<MatrixXd> Q;
  std::optional<MatrixXd> R;
  std::optional<MatrixXd> Omega;
};

Plant make_mass_spring(const MassSpringSpec& spec);
Plant make_mass_spring(int masses);

/// The heavily weighted configuration Q = I + 100 e1 e1^T,
/// R = I + 1000 e4 e4^T, Omega = I (requires s >= 4).
Plant make_mass_spring_heavy_weights(int masses);

}  // namespace lqrlab
