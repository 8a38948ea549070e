#include "stemgrow/obstacles.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "stemgrow/error.hpp"

namespace stemgrow {

namespace {

constexpr double kUnitTol = 1e-9;
constexpr double kMedialTol = 1e-14;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Vec3 radial_offset(const Cylinder& c, const Vec3& x) {
  const Vec3 d = x - c.axis_point;
  return d - d.dot(c.axis_dir) * c.axis_dir;
}

// Distance between the axis lines of two cylinders.
double line_distance(const Cylinder& a, const Cylinder& b) {
  const Vec3 w = a.axis_point - b.axis_point;
  const Vec3 n = a.axis_dir.cross(b.axis_dir);
  if (n.norm() < 1e-12) return (w - w.dot(a.axis_dir) * a.axis_dir).norm();
  return std::abs(w.dot(n)) / n.norm();
}

// Surface separation of two primitives; negative or zero when they touch.
double separation(const Obstacle& a, const Obstacle& b) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (const auto* s = std::get_if<Sphere>(&a)) {
    return signed_distance(b, s->center) - s->radius;
  }
  if (const auto* s = std::get_if<Sphere>(&b)) {
    return signed_distance(a, s->center) - s->radius;
  }
  if (const auto* h = std::get_if<HalfSpace>(&a)) {
    if (const auto* g = std::get_if<HalfSpace>(&b)) {
      // Only opposite-facing parallel half-spaces can be disjoint.
      if (h->outward_normal.dot(g->outward_normal) > -1.0 + 1e-12) return -kInf;
      return (g->point - h->point).dot(h->outward_normal);
    }
    const auto& c = std::get<Cylinder>(b);
    if (std::abs(c.axis_dir.dot(h->outward_normal)) > 1e-12) return -kInf;
    return signed_distance(a, c.axis_point) - c.radius;
  }
  const auto& c = std::get<Cylinder>(a);
  if (std::holds_alternative<HalfSpace>(b)) return separation(b, a);
  const auto& d = std::get<Cylinder>(b);
  return line_distance(c, d) - c.radius - d.radius;
}

}  // namespace

void validate(const Obstacle& obstacle) {
  std::visit(Overloaded{
                 [](const Sphere& s) {
                   if (!(s.radius > 0.0)) throw Error(ErrorKind::InvalidScene, "sphere radius must be positive");
                   if (!s.center.allFinite()) throw Error(ErrorKind::InvalidScene, "sphere center not finite");
                 },
                 [](const HalfSpace& h) {
                   if (std::abs(h.outward_normal.norm() - 1.0) > kUnitTol)
                     throw Error(ErrorKind::InvalidScene, "half-space normal must be unit");
                   if (!h.point.allFinite()) throw Error(ErrorKind::InvalidScene, "half-space point not finite");
                 },
                 [](const Cylinder& c) {
                   if (!(c.radius > 0.0)) throw Error(ErrorKind::InvalidScene, "cylinder radius must be positive");
                   if (std::abs(c.axis_dir.norm() - 1.0) > kUnitTol)
                     throw Error(ErrorKind::InvalidScene, "cylinder axis must be unit");
                   if (!c.axis_point.allFinite()) throw Error(ErrorKind::InvalidScene, "cylinder axis point not finite");
                 },
             },
             obstacle);
}

double signed_distance(const Obstacle& obstacle, const Vec3& x) {
  return std::visit(Overloaded{
                        [&](const Sphere& s) { return (x - s.center).norm() - s.radius; },
                        [&](const HalfSpace& h) { return (x - h.point).dot(h.outward_normal); },
                        [&](const Cylinder& c) { return radial_offset(c, x).norm() - c.radius; },
                    },
                    obstacle);
}

Vec3 sdf_gradient(const Obstacle& obstacle, const Vec3& x) {
  return std::visit(Overloaded{
                        [&](const Sphere& s) -> Vec3 {
                          const Vec3 d = x - s.center;
                          const double r = d.norm();
                          if (r <= kMedialTol * (1.0 + s.radius))
                            throw Error(ErrorKind::DegenerateGradient, "query at sphere center");
                          return d / r;
                        },
                        [&](const HalfSpace& h) -> Vec3 { return h.outward_normal; },
                        [&](const Cylinder& c) -> Vec3 {
                          const Vec3 d = radial_offset(c, x);
                          const double r = d.norm();
                          if (r <= kMedialTol * (1.0 + c.radius))
                            throw Error(ErrorKind::DegenerateGradient, "query on cylinder axis");
                          return d / r;
                        },
                    },
                    obstacle);
}

void Scene::validate(double min_separation) const {
  for (const auto& o : obstacles) stemgrow::validate(o);
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    for (std::size_t j = i + 1; j < obstacles.size(); ++j) {
      if (!(separation(obstacles[i], obstacles[j]) > min_separation)) {
        throw Error(ErrorKind::InvalidScene, "obstacles " + std::to_string(i) + " and " +
                                                 std::to_string(j) + " overlap or touch");
      }
    }
  }
}

int Scene::nearest(const Vec3& x) const {
  int best = -1;
  double best_phi = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const double phi = signed_distance(obstacles[i], x);
    if (phi < best_phi) {
      best_phi = phi;
      best = static_cast<int>(i);
    }
  }
  return best;
}

double signed_distance(const Scene& scene, const Vec3& x) {
  double phi = std::numeric_limits<double>::max();
  for (const auto& o : scene.obstacles) phi = std::min(phi, signed_distance(o, x));
  return phi;
}

Vec3 outer_normal(const Scene& scene, const Vec3& x, double band_width) {
  const int i = scene.nearest(x);
  if (i < 0) throw Error(ErrorKind::NoNearbyBoundary, "scene is empty");
  const auto& o = scene.obstacles[static_cast<std::size_t>(i)];
  if (!(std::abs(signed_distance(o, x)) < band_width)) {
    throw Error(ErrorKind::NoNearbyBoundary, "point is outside the normal band");
  }
  return sdf_gradient(o, x);
}

Vec3 sdf_gradient(const Scene& scene, const Vec3& x) {
  const int i = scene.nearest(x);
  if (i < 0) throw Error(ErrorKind::NoNearbyBoundary, "scene is empty");
  return sdf_gradient(scene.obstacles[static_cast<std::size_t>(i)], x);
}

}  // namespace stemgrow
