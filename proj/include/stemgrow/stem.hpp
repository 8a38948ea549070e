#pragma once

#include <cstddef>
#include <vector>

#include "stemgrow/curves.hpp"

namespace stemgrow {

/// Discretized stem on the fixed horizon grid [0, T].
///
/// Nodes 0..tip are grown (s_tip = t); cells i < tip carry the bending
/// tangents; k[tip] is the tip tangent and every node past the tip repeats it
/// bitwise, so the curve continues as a straight segment. A node's arclength
/// is also its birth time.
struct StemState {
  ArclengthGrid grid;
  std::size_t tip = 0;
  std::vector<Vec3> gamma;
  std::vector<Vec3> k;

  double time() const { return grid.node(tip); }
  std::size_t grown_cells() const { return tip; }
  bool at_horizon() const { return tip + 1 >= grid.nodes; }

  TangentField tangents() const { return {grid, k}; }

  /// Copies k[tip] over the extension and recomputes gamma from the origin.
  void refresh();
};

/// Midpoint of cell i, where the quadrature of arclength integrals samples positions.
inline Vec3 cell_midpoint(const StemState& stem, std::size_t i) { return 0.5 * (stem.gamma[i] + stem.gamma[i + 1]); }

}  // namespace stemgrow

namespace stemgrow {

struct Tolerances {
  double contact = 0.0;
  double penetration = 0.0;
  double breakdown_angle = 1e-4;
  double breakdown_curvature = 1e-3;

  /// contact = 1e-3 ds, penetration = 0.05 ds.
  static Tolerances defaults(double ds);
};

}  // namespace stemgrow
