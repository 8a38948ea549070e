#include "stemgrow/curves.hpp"

#include <cmath>
#include <string>

#include "stemgrow/error.hpp"

namespace stemgrow {

void ArclengthGrid::validate() const {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw Error(ErrorKind::InvalidConfig, "grid spacing must be positive and finite");
  }
  if (nodes == 0) throw Error(ErrorKind::InvalidConfig, "grid has no nodes");
}

void TangentField::validate(double tol) const {
  grid.validate();
  if (k.size() != grid.nodes) {
    throw Error(ErrorKind::InvalidConfig, "tangent field size does not match grid");
  }
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (std::abs(k[i].norm() - 1.0) > tol) {
      throw Error(ErrorKind::InvalidConfig, "tangent " + std::to_string(i) + " is not unit");
    }
  }
}

Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

namespace {

// sin(a)/a and (1 - cos(a))/a^2, with series below 1e-6 where the closed
// forms lose digits to cancellation.
void rodrigues_coefficients(double angle, double& c1, double& c2) {
  if (angle < 1e-6) {
    const double a2 = angle * angle;
    c1 = 1.0 - a2 / 6.0;
    c2 = 0.5 - a2 / 24.0;
  } else {
    c1 = std::sin(angle) / angle;
    c2 = (1.0 - std::cos(angle)) / (angle * angle);
  }
}

}  // namespace

Mat3 rodrigues(const Vec3& w) {
  double c1 = 0.0;
  double c2 = 0.0;
  rodrigues_coefficients(w.norm(), c1, c2);
  const Mat3 a = hat(w);
  return Mat3::Identity() + c1 * a + c2 * (a * a);
}

Vec3 rotate(const Vec3& w, const Vec3& v) {
  double c1 = 0.0;
  double c2 = 0.0;
  rodrigues_coefficients(w.norm(), c1, c2);
  const Vec3 wv = w.cross(v);
  return v + c1 * wv + c2 * w.cross(wv);
}

std::vector<Vec3> integrate_tangents(const TangentField& k, const Vec3& base) {
  std::vector<Vec3> gamma(k.k.size());
  if (gamma.empty()) return gamma;
  gamma[0] = base;
  for (std::size_t i = 0; i + 1 < gamma.size(); ++i) {
    gamma[i + 1] = gamma[i] + k.grid.spacing * k.k[i];
  }
  return gamma;
}

Vec3 cumulative_angular_velocity(std::span<const Vec3> density, const ArclengthGrid& grid,
                                 double s) {
  Vec3 total = Vec3::Zero();
  if (s <= 0.0) return total;
  const double ds = grid.spacing;
  const std::size_t cells = std::min(density.size(), grid.cells());
  for (std::size_t i = 0; i < cells; ++i) {
    const double lo = grid.node(i);
    if (s <= lo) break;
    const double width = std::min(ds, s - lo);
    total += width * density[i];
  }
  return total;
}

}  // namespace stemgrow
