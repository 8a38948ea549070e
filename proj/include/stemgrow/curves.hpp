#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace stemgrow {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Uniform arclength grid s_i = i * spacing, i = 0 .. nodes-1.
///
/// Tangent and density fields on the grid are cell based: the value stored
/// at node i is the (constant) value on the cell [s_i, s_{i+1}). The value at
/// the last node describes the straight continuation past the grid end.
struct ArclengthGrid {
  double spacing = 0.0;
  std::size_t nodes = 0;

  double node(std::size_t i) const { return static_cast<double>(i) * spacing; }
  double length() const { return nodes == 0 ? 0.0 : node(nodes - 1); }
  std::size_t cells() const { return nodes == 0 ? 0 : nodes - 1; }

  /// Throws InvalidConfig unless spacing > 0 and there is at least one node.
  void validate() const;

  bool operator==(const ArclengthGrid&) const = default;
};

struct TangentField {
  ArclengthGrid grid;
  std::vector<Vec3> k;  // one unit vector per node

  /// Throws InvalidConfig if sizes disagree or some |k_i| deviates from 1 by more than tol.
  void validate(double tol = 1e-12) const;
};

/// Skew matrix with hat(w) * v == w.cross(v).
Mat3 hat(const Vec3& w);

/// Rotation by angle |w| about w / |w|: the time-1 flow of v' = w x v.
Mat3 rodrigues(const Vec3& w);

/// Applies rodrigues(w) to v without forming the matrix.
Vec3 rotate(const Vec3& w, const Vec3& v);

/// Positions gamma_0 = base, gamma_{i+1} = gamma_i + spacing * k_i.
std::vector<Vec3> integrate_tangents(const TangentField& k, const Vec3& base);

/// Integral over [0, s] of a cell-constant density; `density` holds one value
/// per cell (cells beyond density.size() count as zero).
Vec3 cumulative_angular_velocity(std::span<const Vec3> density, const ArclengthGrid& grid,
                                 double s);

}  // namespace stemgrow
