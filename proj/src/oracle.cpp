// Reference solver for the reaction problem: enumerates every active set and
// solves each equality-constrained KKT system with dense linear algebra.
// It shares only ConstraintSystem::coefficient with the production solver.

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "stemgrow/error.hpp"
#include "stemgrow/reaction.hpp"

namespace stemgrow {

ReactionSolution oracle_solve_reaction(const ConstraintSystem& system) {
  const std::size_t m = system.rows.size();
  if (m > 12) throw Error(ErrorKind::TooManyContacts, std::to_string(m) + " rows exceed the oracle limit of 12");

  const auto rows = static_cast<Eigen::Index>(m);
  const auto cols = static_cast<Eigen::Index>(3 * system.cells);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd inv_weight(cols);
  Eigen::VectorXd b(rows);
  for (std::size_t i = 0; i < system.cells; ++i) {
    inv_weight.segment<3>(static_cast<Eigen::Index>(3 * i)).setConstant(1.0 / system.weights[i]);
  }
  for (std::size_t j = 0; j < m; ++j) {
    b(static_cast<Eigen::Index>(j)) = system.rows[j].rhs;
    for (std::size_t i = 0; i < system.cells; ++i) {
      a.block<1, 3>(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(3 * i)) =
          system.spacing * system.coefficient(j, i).transpose();
    }
  }
  const Eigen::MatrixXd scaled = a * inv_weight.asDiagonal();
  const Eigen::MatrixXd gram = scaled * a.transpose();

  const double b_max = m == 0 ? 0.0 : b.cwiseAbs().maxCoeff();
  const double tol = 1e-9 * (1.0 + b_max);

  std::vector<unsigned> masks(std::size_t{1} << m);
  std::iota(masks.begin(), masks.end(), 0u);
  std::stable_sort(masks.begin(), masks.end(),
                   [](unsigned x, unsigned y) { return std::popcount(x) < std::popcount(y); });

  for (unsigned mask : masks) {
    std::vector<Eigen::Index> set;
    for (Eigen::Index j = 0; j < rows; ++j)
      if (mask & (1u << j)) set.push_back(j);
    const auto k = static_cast<Eigen::Index>(set.size());

    Eigen::VectorXd mu = Eigen::VectorXd::Zero(rows);
    if (k > 0) {
      Eigen::MatrixXd g(k, k);
      Eigen::VectorXd rhs(k);
      for (Eigen::Index p = 0; p < k; ++p) {
        rhs(p) = b(set[p]);
        for (Eigen::Index q = 0; q < k; ++q) g(p, q) = gram(set[p], set[q]);
      }
      const Eigen::VectorXd z = g.completeOrthogonalDecomposition().solve(rhs);
      if ((g * z - rhs).lpNorm<Eigen::Infinity>() > tol) continue;
      const double mu_scale = 1.0 + z.cwiseAbs().maxCoeff();
      if ((z.array() < -1e-9 * mu_scale).any()) continue;
      for (Eigen::Index p = 0; p < k; ++p) mu(set[p]) = std::max(0.0, z(p));
    }

    const Eigen::VectorXd omega = inv_weight.asDiagonal() * (a.transpose() * mu);
    const Eigen::VectorXd slack = a * omega - b;
    if (m > 0 && slack.minCoeff() < -tol) continue;

    ReactionSolution sol;
    sol.omega.resize(system.cells);
    for (std::size_t i = 0; i < system.cells; ++i) {
      sol.omega[i] = omega.segment<3>(static_cast<Eigen::Index>(3 * i));
    }
    sol.mu.assign(mu.data(), mu.data() + rows);
    sol.slack.assign(slack.data(), slack.data() + rows);
    for (std::size_t j = 0; j < m; ++j)
      if (sol.mu[j] > 0.0) sol.active.push_back(j);
    sol.energy = 0.5 * omega.dot(omega.cwiseQuotient(inv_weight));
    sol.iterations = mask;
    return sol;
  }
  throw Error(ErrorKind::NoCandidateFeasible, "no active set satisfies the KKT conditions");
}

}  // namespace stemgrow
