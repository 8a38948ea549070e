#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stemgrow/curves.hpp"
#include "stemgrow/growth.hpp"
#include "stemgrow/obstacles.hpp"
#include "stemgrow/stem.hpp"

namespace stemgrow {

struct Contact {
  std::size_t node = 0;
  double s = 0.0;
  Vec3 normal = Vec3::UnitZ();
  double gap = 0.0;  // signed distance of the node; in [-eps_penetration, eps_contact]
};

/// Grown nodes touching the obstacle, in increasing node order.
struct ContactSet {
  std::vector<Contact> contacts;
  bool tip_in_contact = false;

  bool empty() const { return contacts.empty(); }
  std::size_t size() const { return contacts.size(); }
};

/// Returns the grown nodes 1..tip with signed distance <= eps_contact (the
/// root is clamped and never constrained). Throws PenetrationExceeded if any
/// grown node is deeper than eps_penetration.
ContactSet detect_contacts(const StemState& stem, const Scene& scene, double eps_contact,
                           double eps_penetration);

enum class RowKind {
  Contact,   // node on the boundary
  Tip,       // tip on the boundary: non-penetration of the material point and of the growing tip
  Approach,  // node off the boundary whose motion this step would carry it inside
};

const char* to_string(RowKind kind);

/// One unilateral constraint  sum_i ds <omega_i, a_i> >= rhs  with
/// a_i = (gamma_node - m_i) x normal on the cells i < min(node, tip), m_i the cell midpoint.
///
/// rhs = -free_rate + bias + growth, where free_rate is the normal velocity
/// produced by the free growth density alone, bias is the position-level
/// correction (pushback for penetrated contacts, landing target for approach
/// rows) and growth = max(0, -<k_tip, normal>) on the tip row.
struct ConstraintRow {
  std::size_t node = 0;
  RowKind kind = RowKind::Contact;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double gap = 0.0;
  double free_rate = 0.0;
  double bias = 0.0;
  double growth = 0.0;
  double rhs = 0.0;
};

struct ConstraintSystem {
  double spacing = 0.0;
  std::size_t cells = 0;         // bending cells (grown cells of the stem)
  std::vector<Vec3> gamma;       // midpoint of each cell
  std::vector<double> decay;     // exp(-beta (t - s_i)) per cell
  std::vector<double> weights;   // energy weights ds * exp(beta (t - s_i)) per cell
  std::vector<ConstraintRow> rows;

  std::size_t support(std::size_t row) const;
  /// a_row(s_cell), zero outside the support.
  Vec3 coefficient(std::size_t row, std::size_t cell) const;
  void add_row(ConstraintRow row);
};

/// Geometry and weights of the reaction problem for `stem`, without rows.
ConstraintSystem base_system(const StemState& stem, const GrowthLaw& law);

/// Free angular-velocity density Psi at the left endpoint of each grown cell.
std::vector<Vec3> free_density(const StemState& stem, const GrowthLaw& law);

/// Velocity of every grid node induced by a cell density:
/// v_j = sum_{i < min(j, tip)} ds * density_i x (gamma_j - m_i), m_i the cell midpoint.
std::vector<Vec3> velocity_field(const StemState& stem, std::span<const Vec3> density);

/// Contact and tip rows for `contacts`. Throws EmptyContactSet.
ConstraintSystem assemble_constraints(const StemState& stem, const ContactSet& contacts,
                                      const GrowthLaw& law, double kappa, double dt);

struct ReactionSolution {
  std::vector<Vec3> omega;      // per cell
  std::vector<double> mu;       // per row
  std::vector<double> slack;    // (A omega - rhs) per row
  std::vector<std::size_t> active;
  double energy = 0.0;
  bool degenerate = false;      // active Gram block numerically singular; mu not unique
  std::size_t iterations = 0;
};

struct SolverOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 10000;
  double ridge = 1e-12;  // relative to each diagonal entry of the Gram block
};

/// Unique minimizer of 1/2 sum_i d_i |omega_i|^2 subject to the rows, via an
/// active-set method on the nonnegative dual. `warm_nodes` seeds the active
/// set with rows at those nodes. Throws Infeasible or MaxIterations.
ReactionSolution solve_reaction(const ConstraintSystem& system, const SolverOptions& options = {},
                                std::span<const std::size_t> warm_nodes = {});

/// Brute-force reference: enumerates all 2^m active sets with dense linear
/// algebra. Throws TooManyContacts (m > 12) or NoCandidateFeasible.
ReactionSolution oracle_solve_reaction(const ConstraintSystem& system);

/// Reaction velocity at arclength s: integral over [0, s] of omega x (gamma(s) - gamma(sigma)),
/// midpoint rule per cell (a partial last cell uses its own midpoint).
Vec3 reaction_velocity(const StemState& stem, std::span<const Vec3> omega, double s);

/// Row-wise normal rates <v(node), normal> of a cell density (the constraint operator A).
std::vector<double> apply_rows(const ConstraintSystem& system, std::span<const Vec3> omega);

/// omega_i = decay_i * sum_j mu_j a_j(s_i) (stationarity map).
std::vector<Vec3> apply_rows_transpose(const ConstraintSystem& system, std::span<const double> mu);

double reaction_energy(const ConstraintSystem& system, std::span<const Vec3> omega);

}  // namespace stemgrow
