#include "stemgrow/growth.hpp"

#include <algorithm>
#include <cmath>

#include "stemgrow/error.hpp"

namespace stemgrow {

void GrowthLaw::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorKind::InvalidConfig, "law.beta must be >= 0");
  if (!(gain >= 0.0) || !std::isfinite(gain)) throw Error(ErrorKind::InvalidConfig, "law.gain must be >= 0");
  if (std::abs(up.norm() - 1.0) > 1e-9) throw Error(ErrorKind::InvalidConfig, "law.up must be a unit vector");
  if (kind == LawKind::Tabulated) {
    if (table.empty()) throw Error(ErrorKind::InvalidConfig, "law.table is empty");
    for (std::size_t i = 1; i < table.size(); ++i) {
      if (!(table[i].first > table[i - 1].first)) {
        throw Error(ErrorKind::InvalidConfig, "law.table ages must be strictly increasing");
      }
    }
  }
}

double GrowthLaw::age_factor(double age) const {
  switch (kind) {
    case LawKind::Zero:
      return 0.0;
    case LawKind::Gravitropic:
      return std::exp(-beta * age);
    case LawKind::Tabulated: {
      if (age <= table.front().first) return table.front().second;
      if (age >= table.back().first) return table.back().second;
      const auto hi = std::upper_bound(table.begin(), table.end(), age,
                                       [](double a, const auto& row) { return a < row.first; });
      const auto lo = hi - 1;
      const double w = (age - lo->first) / (hi->first - lo->first);
      return (1.0 - w) * lo->second + w * hi->second;
    }
  }
  return 0.0;
}

Vec3 eval_psi(const GrowthLaw& law, double t, double s, const Vec3& /*gamma*/, const Vec3& k) {
  const double age = t - s;
  if (age < -1e-12 * std::max(1.0, std::abs(t))) {
    throw Error(ErrorKind::AgeNegative, "arclength beyond current time");
  }
  if (law.kind == LawKind::Zero) return Vec3::Zero();
  return (law.gain * law.age_factor(std::max(age, 0.0))) * k.cross(law.up);
}

}  // namespace stemgrow
