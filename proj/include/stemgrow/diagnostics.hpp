#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stemgrow/curves.hpp"
#include "stemgrow/obstacles.hpp"
#include "stemgrow/stem.hpp"

namespace stemgrow {

/// Smallest rotation vector W (|W| <= pi, W orthogonal to both) with
/// rodrigues(W) k1 == k2. Throws AntipodalAmbiguity when <k1, k2> <= -1 + 1e-9.
Vec3 minimal_rotation(const Vec3& k1, const Vec3& k2);

/// Per-cell rotation vectors carrying one stem's tangents onto another's.
/// This is the pointwise rotation, not the density whose running integral
/// rotates k1 into k2; both agree to first order for nearby solutions.
struct RotationField {
  ArclengthGrid grid;  // [0, t]
  std::vector<Vec3> w; // one per grown cell
};

/// Throws GridMismatch when spacing or grown length differ, AntipodalAmbiguity
/// (naming the node) when two tangents are opposite.
RotationField rotation_field(const StemState& first, const StemState& second);
RotationField rotation_field(std::span<const Vec3> first, std::span<const Vec3> second, double ds);

struct WeightedNorm {
  double beta = 0.0;
};

/// (sum_i ds * exp(-beta s_i) |W_i|^2)^(1/2).
double weighted_norm(const RotationField& field, const WeightedNorm& norm);

struct GronwallCertificate {
  double rate = 0.0;                // least C >= 0 with D_k <= D_0 exp(C (t_k - t_0)) (1 + 1e-9)
  double max_step_log_rate = 0.0;   // max_k log(D_{k+1} / D_k) / dt
  double initial = 0.0;
  double terminal = 0.0;
  std::size_t samples = 0;
};

/// Throws NonPositiveDistance if some sample is <= 0, InsufficientSamples below 10.
GronwallCertificate gronwall_certificate(std::span<const double> distances, double dt);

struct AuditReport {
  double max_unit_error = 0.0;
  double max_segment_excess = 0.0;  // max_i |gamma_{i+1} - gamma_i| / ds - 1
  double root_offset = 0.0;
  double min_gap = 0.0;
  bool extension_straight = true;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

/// Checks unit tangents, segment lengths, the clamped root, the straight
/// extension and non-penetration of grown nodes.
AuditReport audit_state(const StemState& state, const Scene& scene, const Tolerances& tol);

/// Same checks on a stored snapshot of the grown nodes.
AuditReport audit_snapshot(std::span<const Vec3> gamma, std::span<const Vec3> k, double ds,
                           const Scene& scene, const Tolerances& tol);

}  // namespace stemgrow
