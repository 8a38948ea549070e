#include "stemgrow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <string>

#include "stemgrow/error.hpp"

namespace stemgrow {

Vec3 minimal_rotation(const Vec3& k1, const Vec3& k2) {
  const double c = k1.dot(k2);
  if (c <= -1.0 + 1e-9) throw Error(ErrorKind::AntipodalAmbiguity, "tangents are antipodal");
  const Vec3 axis = k1.cross(k2);
  const double sn = axis.norm();
  if (sn == 0.0) return Vec3::Zero();
  // atan2 keeps full accuracy for small and large angles alike.
  return (std::atan2(sn, c) / sn) * axis;
}

RotationField rotation_field(std::span<const Vec3> first, std::span<const Vec3> second, double ds) {
  if (first.size() != second.size()) {
    throw Error(ErrorKind::GridMismatch, "fields have " + std::to_string(first.size()) + " and " +
                                             std::to_string(second.size()) + " cells");
  }
  RotationField f;
  f.grid = {ds, first.size() + 1};
  f.w.resize(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    try {
      f.w[i] = minimal_rotation(first[i], second[i]);
    } catch (const Error&) {
      throw Error(ErrorKind::AntipodalAmbiguity, "tangents are antipodal at node " + std::to_string(i));
    }
  }
  return f;
}

RotationField rotation_field(const StemState& first, const StemState& second) {
  if (first.grid.spacing != second.grid.spacing || first.tip != second.tip) {
    throw Error(ErrorKind::GridMismatch, "stems differ in spacing or grown length");
  }
  const std::span<const Vec3> a(first.k.data(), first.tip);
  const std::span<const Vec3> b(second.k.data(), second.tip);
  return rotation_field(a, b, first.grid.spacing);
}

double weighted_norm(const RotationField& field, const WeightedNorm& norm) {
  const double ds = field.grid.spacing;
  double sum = 0.0;
  for (std::size_t i = 0; i < field.w.size(); ++i) {
    sum += ds * std::exp(-norm.beta * field.grid.node(i)) * field.w[i].squaredNorm();
  }
  return std::sqrt(sum);
}

GronwallCertificate gronwall_certificate(std::span<const double> distances, double dt) {
  if (distances.size() < 10) {
    throw Error(ErrorKind::InsufficientSamples,
                "need at least 10 samples, got " + std::to_string(distances.size()));
  }
  for (std::size_t k = 0; k < distances.size(); ++k) {
    if (!(distances[k] > 0.0)) {
      throw Error(ErrorKind::NonPositiveDistance, "distance at sample " + std::to_string(k) + " is not positive");
    }
  }
  GronwallCertificate c;
  c.samples = distances.size();
  c.initial = distances.front();
  c.terminal = distances.back();
  c.max_step_log_rate = -std::numeric_limits<double>::infinity();
  const double slack = std::log1p(1e-9);
  const double log0 = std::log(c.initial);
  for (std::size_t k = 1; k < distances.size(); ++k) {
    const double lk = std::log(distances[k]);
    const double elapsed = static_cast<double>(k) * dt;
    c.rate = std::max(c.rate, (lk - log0 - slack) / elapsed);
    c.max_step_log_rate = std::max(c.max_step_log_rate, (lk - std::log(distances[k - 1])) / dt);
  }
  return c;
}

namespace {

void check(AuditReport& r, std::span<const Vec3> gamma, std::span<const Vec3> k, std::size_t grown, double ds,
           const Scene& scene, const Tolerances& tol) {
  for (std::size_t i = 0; i < k.size(); ++i) r.max_unit_error = std::max(r.max_unit_error, std::abs(k[i].norm() - 1.0));
  for (std::size_t i = 0; i + 1 < gamma.size() && i < grown; ++i) {
    r.max_segment_excess = std::max(r.max_segment_excess, (gamma[i + 1] - gamma[i]).norm() / ds - 1.0);
  }
  r.root_offset = gamma.empty() ? 0.0 : gamma.front().norm();
  r.min_gap = std::numeric_limits<double>::max();
  if (!scene.empty()) {
    for (std::size_t i = 0; i <= grown && i < gamma.size(); ++i) r.min_gap = std::min(r.min_gap, signed_distance(scene, gamma[i]));
  }

  if (r.max_unit_error > 1e-10) r.failures.push_back("tangent norm drifts by " + std::to_string(r.max_unit_error));
  if (r.max_segment_excess > 1e-10)
    r.failures.push_back("segment longer than ds by " + std::to_string(r.max_segment_excess));
  if (r.root_offset != 0.0) r.failures.push_back("root moved by " + std::to_string(r.root_offset));
  if (!r.extension_straight) r.failures.push_back("extension is not straight");
  if (r.min_gap < -tol.penetration) r.failures.push_back("penetration depth " + std::to_string(-r.min_gap));
}

}  // namespace

AuditReport audit_state(const StemState& state, const Scene& scene, const Tolerances& tol) {
  AuditReport r;
  for (std::size_t i = state.tip + 1; i < state.k.size(); ++i) {
    if (std::memcmp(state.k[i].data(), state.k[state.tip].data(), sizeof(double) * 3) != 0) {
      r.extension_straight = false;
    }
  }
  check(r, state.gamma, state.k, state.tip, state.grid.spacing, scene, tol);
  const double grown_length = state.time();
  if (std::abs(grown_length - static_cast<double>(state.tip) * state.grid.spacing) > 1e-12) {
    r.failures.push_back("grown length differs from t");
  }
  return r;
}

AuditReport audit_snapshot(std::span<const Vec3> gamma, std::span<const Vec3> k, double ds, const Scene& scene,
                           const Tolerances& tol) {
  AuditReport r;
  if (gamma.size() != k.size() || gamma.empty()) {
    r.failures.push_back("snapshot has mismatched or empty node arrays");
    return r;
  }
  check(r, gamma, k, gamma.size() - 1, ds, scene, tol);
  for (std::size_t i = 0; i + 1 < gamma.size(); ++i) {
    const Vec3 expected = gamma[i] + ds * k[i];
    if ((gamma[i + 1] - expected).norm() > 1e-12 * (1.0 + expected.norm())) {
      r.failures.push_back("positions do not integrate the tangents at node " + std::to_string(i + 1));
      break;
    }
  }
  return r;
}

}  // namespace stemgrow
