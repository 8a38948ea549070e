#pragma once

#include <utility>
#include <vector>

#include "stemgrow/curves.hpp"

namespace stemgrow {

enum class LawKind { Gravitropic, Zero, Tabulated };

/// Free angular-velocity density Psi(t, s, gamma, k).
///
/// Gravitropic: gain * exp(-beta (t - s)) * (k x up). Tabulated replaces the
/// exponential age factor by a piecewise-linear table of (age, coefficient)
/// pairs, clamped at both ends. beta is also the stiffness that weights the
/// reaction energy, so it matters even for the zero law.
struct GrowthLaw {
  LawKind kind = LawKind::Gravitropic;
  double beta = 1.0;
  double gain = 1.0;
  Vec3 up = Vec3::UnitZ();
  std::vector<std::pair<double, double>> table;  // (age, coefficient), ages increasing

  /// Throws InvalidConfig if beta < 0, gain < 0, up is not unit, or the table is malformed.
  void validate() const;

  double age_factor(double age) const;
};

Vec3 eval_psi(const GrowthLaw& law, double t, double s, const Vec3& gamma, const Vec3& k);

}  // namespace stemgrow
