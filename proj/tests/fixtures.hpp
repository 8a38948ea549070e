#pragma once
// Shared helpers for unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "stemgrow/reaction.hpp"
#include "stemgrow/stem.hpp"

namespace fixtures {

using stemgrow::Vec3;

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec3 v;
  do v = Vec3(g(rng), g(rng), g(rng));
  while (v.norm() < 1e-3);
  return v.normalized();
}

/// Grown stem with `nodes` grown nodes (tip = nodes - 1) and a smooth random tangent walk.
inline stemgrow::StemState random_stem(std::mt19937_64& rng, std::size_t nodes, double ds, double bend = 0.3) {
  stemgrow::StemState st;
  st.grid = {ds, nodes + 5};
  st.tip = nodes - 1;
  st.k.resize(st.grid.nodes);
  std::normal_distribution<double> g(0.0, bend * std::sqrt(ds));
  st.k[0] = random_unit(rng);
  for (std::size_t i = 1; i <= st.tip; ++i) st.k[i] = stemgrow::rotate(Vec3(g(rng), g(rng), g(rng)), st.k[i - 1]);
  st.refresh();
  return st;
}

/// Reaction problem with m rows at distinct random nodes and random normals.
/// Right-hand sides are built as in the stepper: free normal rate of a random
/// gravitropic law, Baumgarte bias of a sub-tolerance penetration, growth term
/// on a tip row.
inline stemgrow::ConstraintSystem random_system(std::mt19937_64& rng, const stemgrow::StemState& st, double beta,
                                                std::size_t m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  stemgrow::GrowthLaw law;
  law.beta = beta;
  law.gain = 0.5 + 2.5 * u(rng);
  law.up = random_unit(rng);
  const double dt = st.grid.spacing;
  const std::vector<Vec3> v = stemgrow::velocity_field(st, stemgrow::free_density(st, law));
  stemgrow::ConstraintSystem sys = stemgrow::base_system(st, law);
  std::vector<std::size_t> nodes(st.tip);
  std::iota(nodes.begin(), nodes.end(), std::size_t{1});
  std::shuffle(nodes.begin(), nodes.end(), rng);
  for (std::size_t j = 0; j < m; ++j) {
    stemgrow::ConstraintRow row;
    row.node = nodes[j];
    row.kind = row.node == st.tip ? stemgrow::RowKind::Tip : stemgrow::RowKind::Contact;
    row.point = st.gamma[row.node];
    row.normal = random_unit(rng);
    row.gap = -0.05 * dt * u(rng);
    row.free_rate = v[row.node].dot(row.normal);
    row.bias = 0.2 * (-row.gap) / dt;
    if (row.kind == stemgrow::RowKind::Tip) row.growth = std::max(0.0, -st.k[st.tip].dot(row.normal));
    sys.add_row(row);
  }
  return sys;
}

/// Stress variant: unit-scale right-hand sides regardless of the lever arm.
inline stemgrow::ConstraintSystem stress_system(std::mt19937_64& rng, const stemgrow::StemState& st, double beta,
                                                std::size_t m) {
  stemgrow::GrowthLaw law;
  law.beta = beta;
  stemgrow::ConstraintSystem sys = stemgrow::base_system(st, law);
  std::vector<std::size_t> nodes(st.tip);
  std::iota(nodes.begin(), nodes.end(), std::size_t{1});
  std::shuffle(nodes.begin(), nodes.end(), rng);
  std::normal_distribution<double> g;
  for (std::size_t j = 0; j < m; ++j) {
    stemgrow::ConstraintRow row;
    row.node = nodes[j];
    row.point = st.gamma[row.node];
    row.normal = random_unit(rng);
    row.free_rate = g(rng);
    sys.add_row(row);
  }
  return sys;
}

/// Dense constraint matrix (rows x 3 cells), built entry by entry from the coefficients.
inline Eigen::MatrixXd dense_rows(const stemgrow::ConstraintSystem& sys) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sys.rows.size()),
                                            static_cast<Eigen::Index>(3 * sys.cells));
  for (std::size_t j = 0; j < sys.rows.size(); ++j)
    for (std::size_t i = 0; i < sys.cells; ++i)
      a.block<1, 3>(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(3 * i)) =
          sys.spacing * sys.coefficient(j, i).transpose();
  return a;
}

inline Eigen::VectorXd flatten(const std::vector<Vec3>& w) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(3 * w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) x.segment<3>(static_cast<Eigen::Index>(3 * i)) = w[i];
  return x;
}

struct Kkt {
  double stationarity = 0.0;    // max_i |omega_i - decay_i sum_j mu_j a_j(i)|
  double omega_norm = 0.0;
  double min_mu = 0.0;
  double min_slack = 0.0;
  double complementarity = 0.0;  // sum_j |mu_j slack_j|
  double b_norm = 0.0;
};

/// KKT residuals of (omega, mu) for `sys`, recomputed densely.
inline Kkt kkt(const stemgrow::ConstraintSystem& sys, const std::vector<Vec3>& omega, const std::vector<double>& mu) {
  Kkt r;
  const std::size_t m = sys.rows.size();
  const Eigen::VectorXd w = flatten(omega);
  r.omega_norm = w.norm();
  Eigen::VectorXd b(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) b(static_cast<Eigen::Index>(j)) = sys.rows[j].rhs;
  r.b_norm = b.norm();
  for (std::size_t i = 0; i < sys.cells; ++i) {
    Vec3 s = Vec3::Zero();
    for (std::size_t j = 0; j < m; ++j) s += mu[j] * sys.coefficient(j, i);
    r.stationarity = std::max(r.stationarity, (omega[i] - sys.decay[i] * s).norm());
  }
  if (m == 0) return r;
  const Eigen::VectorXd slack = dense_rows(sys) * w - b;
  r.min_mu = *std::min_element(mu.begin(), mu.end());
  r.min_slack = slack.minCoeff();
  for (std::size_t j = 0; j < m; ++j) r.complementarity += std::abs(mu[j] * slack(static_cast<Eigen::Index>(j)));
  return r;
}

}  // namespace fixtures
