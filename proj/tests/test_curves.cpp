#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "stemgrow/curves.hpp"
#include "stemgrow/error.hpp"

using namespace stemgrow;

namespace {

// Classical RK4 on v' = w x v.
Vec3 rk4_flow(const Vec3& w, Vec3 v, int steps) {
  const double h = 1.0 / steps;
  for (int n = 0; n < steps; ++n) {
    const Vec3 a = w.cross(v);
    const Vec3 b = w.cross(v + 0.5 * h * a);
    const Vec3 c = w.cross(v + 0.5 * h * b);
    const Vec3 d = w.cross(v + h * c);
    v += h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
  }
  return v;
}

}  // namespace

TEST_CASE("rodrigues: identity and quarter turn") {
  CHECK((rodrigues(Vec3::Zero()) - Mat3::Identity()).norm() == 0.0);
  const Vec3 r = rodrigues(Vec3(0, 0, std::numbers::pi / 2)) * Vec3::UnitX();
  CHECK((r - Vec3::UnitY()).norm() < 1e-12);
}

TEST_CASE("rodrigues matches the RK4 flow of v' = w x v") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec3 w = 0.3 * fixtures::random_unit(rng);
    const Vec3 v = fixtures::random_unit(rng);
    CHECK((rodrigues(w) * v - rk4_flow(w, v, 10000)).norm() < 1e-10);
    CHECK((rotate(w, v) - rodrigues(w) * v).norm() < 1e-14);
  }
}

TEST_CASE("rodrigues: orthogonal, unit determinant, fixed axis, small-angle limit") {
  std::mt19937_64 rng(11);
  for (double mag : {1e-9, 1e-4, 0.5, 2.0, 3.1}) {
    const Vec3 w = mag * fixtures::random_unit(rng);
    const Mat3 q = rodrigues(w);
    CHECK((q.transpose() * q - Mat3::Identity()).norm() < 1e-14);
    CHECK(q.determinant() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((q * w - w).norm() < 1e-14 * (1.0 + mag));
    if (mag < 1e-3) CHECK((q - Mat3::Identity() - hat(w)).norm() < mag * mag);
  }
}

TEST_CASE("integrate_tangents: straight stems") {
  TangentField f{{0.1, 11}, std::vector<Vec3>(11, Vec3::UnitZ())};
  const auto g = integrate_tangents(f, Vec3::Zero());
  for (std::size_t i = 0; i < g.size(); ++i) CHECK((g[i] - Vec3(0, 0, 0.1 * i)).norm() < 1e-15);

  TangentField h{{0.1, 11}, std::vector<Vec3>(11, Vec3::UnitX())};
  const auto p = integrate_tangents(h, Vec3(1, 2, 3));
  for (std::size_t i = 0; i < p.size(); ++i) CHECK((p[i] - Vec3(1 + 0.1 * i, 2, 3)).norm() < 1e-14);
}

TEST_CASE("integrate_tangents: unit circle with second-order deviation") {
  // Cell i carries the circle tangent at its midpoint.
  auto deviation = [](std::size_t n) {
    const double ds = 2.0 * std::numbers::pi / static_cast<double>(n);
    TangentField f{{ds, n + 1}, {}};
    for (std::size_t i = 0; i <= n; ++i) {
      const double th = (static_cast<double>(i) + 0.5) * ds;
      f.k.emplace_back(std::cos(th), std::sin(th), 0.0);
    }
    const auto g = integrate_tangents(f, Vec3::Zero());
    double worst = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      const double s = static_cast<double>(i) * ds;
      worst = std::max(worst, (g[i] - Vec3(std::sin(s), 1.0 - std::cos(s), 0.0)).norm());
    }
    return worst;
  };
  const double e1 = deviation(100), e2 = deviation(200);
  CHECK(e1 < 1e-3);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("cumulative_angular_velocity") {
  const ArclengthGrid grid{0.1, 11};
  const std::vector<Vec3> ones(10, Vec3::UnitZ());
  CHECK((cumulative_angular_velocity(ones, grid, 0.5) - Vec3(0, 0, 0.5)).norm() < 1e-15);
  CHECK(cumulative_angular_velocity(ones, grid, 0.0).norm() == 0.0);

  std::vector<Vec3> piecewise(10);
  for (std::size_t i = 0; i < 10; ++i) piecewise[i] = i < 3 ? Vec3::UnitX() : Vec3::UnitY();
  CHECK((cumulative_angular_velocity(piecewise, grid, 1.0) - Vec3(0.3, 0.7, 0)).norm() < 1e-14);
  // Partial cell counts proportionally.
  CHECK((cumulative_angular_velocity(piecewise, grid, 0.25) - Vec3(0.25, 0, 0)).norm() < 1e-15);
}

TEST_CASE("grid and tangent validation") {
  CHECK_THROWS_AS((ArclengthGrid{0.0, 3}.validate()), Error);
  CHECK_NOTHROW((ArclengthGrid{0.1, 3}.validate()));
  TangentField f{{0.1, 2}, {Vec3::UnitZ(), Vec3(0, 0, 1.1)}};
  try {
    f.validate();
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidConfig);
  }
}
