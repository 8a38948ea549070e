#include "stemgrow/stem.hpp"

namespace stemgrow {

void StemState::refresh() {
  for (std::size_t i = tip + 1; i < k.size(); ++i) k[i] = k[tip];
  gamma = integrate_tangents(tangents(), Vec3::Zero());
}

}  // namespace stemgrow

namespace stemgrow {

Tolerances Tolerances::defaults(double ds) {
  Tolerances t;
  t.contact = 1e-3 * ds;
  t.penetration = 0.05 * ds;
  return t;
}

}  // namespace stemgrow
