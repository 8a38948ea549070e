#pragma once

#include <variant>
#include <vector>

#include "stemgrow/curves.hpp"

namespace stemgrow {

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

/// The obstacle is the open half-space {x : <x - point, outward_normal> < 0};
/// outward_normal points from the obstacle into free space.
struct HalfSpace {
  Vec3 point = Vec3::Zero();
  Vec3 outward_normal = Vec3::UnitZ();
};

/// Infinite solid cylinder around the line axis_point + r * axis_dir.
struct Cylinder {
  Vec3 axis_point = Vec3::Zero();
  Vec3 axis_dir = Vec3::UnitZ();
  double radius = 1.0;
};

using Obstacle = std::variant<Sphere, HalfSpace, Cylinder>;

/// Throws InvalidScene on a non-positive radius or non-unit direction.
void validate(const Obstacle& obstacle);

double signed_distance(const Obstacle& obstacle, const Vec3& x);

/// Gradient of the obstacle's signed distance; throws DegenerateGradient where
/// it is undefined (sphere center, cylinder axis).
Vec3 sdf_gradient(const Obstacle& obstacle, const Vec3& x);

/// Disjoint union of well-separated primitives.
struct Scene {
  std::vector<Obstacle> obstacles;

  bool empty() const { return obstacles.empty(); }

  /// Checks every primitive and requires pairwise surface separation > min_separation.
  void validate(double min_separation) const;

  /// Index of the obstacle with the smallest signed distance at x; -1 if empty.
  int nearest(const Vec3& x) const;
};

/// Min over obstacles; the largest finite double for an empty scene.
double signed_distance(const Scene& scene, const Vec3& x);

/// Unit outer normal of the nearest boundary. Throws NoNearbyBoundary unless
/// |signed_distance| < band_width, DegenerateGradient on a medial point.
Vec3 outer_normal(const Scene& scene, const Vec3& x, double band_width);

/// Gradient of the scene signed distance without the band restriction.
Vec3 sdf_gradient(const Scene& scene, const Vec3& x);

}  // namespace stemgrow
