#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "stemgrow/error.hpp"
#include "stemgrow/reaction.hpp"

using namespace stemgrow;

namespace {

// Nodes 0..tip along `dir`, extension to `nodes`.
StemState straight(Vec3 dir, std::size_t tip, double ds, std::size_t nodes, Vec3 base = Vec3::Zero()) {
  StemState st;
  st.grid = {ds, nodes};
  st.tip = tip;
  st.k.assign(nodes, dir.normalized());
  st.refresh();
  for (auto& g : st.gamma) g += base;
  return st;
}

// Horizontal 3-node stem under a ceiling touching node 1; gravitropism lifts it.
struct ThreeNode {
  double ds = 0.1;
  StemState st = straight(Vec3::UnitX(), 2, 0.1, 6);
  GrowthLaw law;
  ContactSet contacts;
  ThreeNode() {
    law.beta = 0.0;
    law.gain = 1.0;
    contacts.contacts.push_back({1, ds, -Vec3::UnitZ(), 0.0});
  }
};

}  // namespace

TEST_CASE("detect_contacts") {
  const StemState st = straight(Vec3::UnitZ(), 10, 0.1, 16);
  CHECK(detect_contacts(st, Scene{{Sphere{Vec3(5, 0, 0), 1.0}}}, 1e-4, 5e-3).empty());

  // Sphere tangent to the stem at node 5 from the side.
  const Scene side{{Sphere{Vec3(0.3, 0, 0.5), 0.3}}};
  const ContactSet one = detect_contacts(st, side, 1e-4, 5e-3);
  REQUIRE(one.size() == 1);
  CHECK(one.contacts[0].node == 5);
  CHECK((one.contacts[0].normal + Vec3::UnitX()).norm() < 1e-12);
  CHECK_FALSE(one.tip_in_contact);

  // Tip hovering at half the contact tolerance.
  const double eps = 1e-4;
  const Scene cap{{Sphere{Vec3(0, 0, 1.0 + 0.3 + eps / 2), 0.3}}};
  const ContactSet tip = detect_contacts(st, cap, eps, 5e-3);
  CHECK(tip.tip_in_contact);
  REQUIRE(tip.size() == 1);
  CHECK(tip.contacts[0].node == 10);
  CHECK(tip.contacts[0].gap == doctest::Approx(eps / 2).epsilon(1e-9));

  // Too deep.
  const Scene deep{{Sphere{Vec3(0.29, 0, 0.5), 0.3}}};
  try {
    detect_contacts(st, deep, 1e-4, 5e-3);
    FAIL("expected PenetrationExceeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PenetrationExceeded);
  }
}

TEST_CASE("assemble_constraints: hand quadrature on three nodes") {
  ThreeNode f;
  const ConstraintSystem sys = assemble_constraints(f.st, f.contacts, f.law, 0.2, f.ds);
  REQUIRE(sys.rows.size() == 1);
  // Free velocity of node 1: ds * (-e2) x (0.5 ds e1) = 0.5 ds^2 e3, into the ceiling.
  CHECK(sys.rows[0].free_rate == doctest::Approx(-0.5 * f.ds * f.ds).epsilon(1e-13));
  CHECK(sys.rows[0].rhs == doctest::Approx(0.5 * f.ds * f.ds).epsilon(1e-13));
  CHECK(sys.support(0) == 1);
  CHECK((sys.coefficient(0, 0) - Vec3(0, 0.5 * f.ds, 0)).norm() < 1e-15);
  CHECK(sys.coefficient(0, 1).norm() == 0.0);

  // Zero law, no penetration: homogeneous row.
  GrowthLaw zero;
  zero.kind = LawKind::Zero;
  const ConstraintSystem h = assemble_constraints(f.st, f.contacts, zero, 0.2, f.ds);
  CHECK(h.rows[0].rhs == 0.0);

  ContactSet none;
  try {
    assemble_constraints(f.st, none, f.law, 0.2, f.ds);
    FAIL("expected EmptyContactSet");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyContactSet);
  }
}

TEST_CASE("assemble_constraints: oblique tip contact carries cos(theta)") {
  const double theta = 0.5, ds = 0.1;
  const StemState st = straight(Vec3(std::sin(theta), 0, std::cos(theta)), 5, ds, 10);
  ContactSet c;
  c.contacts.push_back({5, 0.5, -Vec3::UnitZ(), 0.0});
  c.tip_in_contact = true;
  GrowthLaw zero;
  zero.kind = LawKind::Zero;
  const ConstraintSystem sys = assemble_constraints(st, c, zero, 0.2, ds);
  REQUIRE(sys.rows.size() == 1);
  CHECK(sys.rows[0].kind == RowKind::Tip);
  CHECK(sys.rows[0].growth == doctest::Approx(std::cos(theta)).epsilon(1e-14));
  CHECK(sys.rows[0].rhs == doctest::Approx(std::cos(theta)).epsilon(1e-14));
}

TEST_CASE("solve_reaction: single contact closed form") {
  ThreeNode f;
  const ConstraintSystem sys = assemble_constraints(f.st, f.contacts, f.law, 0.2, f.ds);
  for (const ReactionSolution& r : {solve_reaction(sys), oracle_solve_reaction(sys)}) {
    // G11 = ds |a(0)|^2 = ds^3 / 4, b = ds^2 / 2.
    CHECK(r.mu[0] == doctest::Approx(2.0 / f.ds).epsilon(1e-12));
    CHECK((r.omega[0] - Vec3::UnitY()).norm() < 1e-12);
    CHECK(r.omega[1].norm() == 0.0);
    CHECK(std::abs(r.slack[0]) < 1e-15);
  }
  // Node 1 stops moving: free lift cancelled by the reaction.
  const ReactionSolution r = solve_reaction(sys);
  const Vec3 v = reaction_velocity(f.st, r.omega, f.ds);
  CHECK((v - Vec3(0, 0, -0.5 * f.ds * f.ds)).norm() < 1e-12);
  CHECK(reaction_velocity(f.st, r.omega, 0.0).norm() == 0.0);
  CHECK(reaction_velocity(f.st, std::vector<Vec3>(2, Vec3::Zero()), 0.15).norm() == 0.0);
}

TEST_CASE("solve_reaction: nonpositive right-hand sides give the zero reaction") {
  std::mt19937_64 rng(5);
  const StemState st = fixtures::random_stem(rng, 30, 1.0 / 30);
  GrowthLaw law;
  ConstraintSystem sys = base_system(st, law);
  for (std::size_t n : {4u, 11u, 20u}) {
    ConstraintRow row;
    row.node = n;
    row.normal = fixtures::random_unit(rng);
    row.free_rate = 0.1 * static_cast<double>(n);
    sys.add_row(row);
  }
  const ReactionSolution r = solve_reaction(sys);
  for (const Vec3& w : r.omega) CHECK(w.norm() == 0.0);
  for (double m : r.mu) CHECK(m == 0.0);
  CHECK(r.energy == 0.0);
  const ReactionSolution o = oracle_solve_reaction(sys);
  CHECK(o.energy == 0.0);
}

TEST_CASE("oracle: empty system, non-binding row, limits") {
  std::mt19937_64 rng(9);
  const StemState st = fixtures::random_stem(rng, 25, 0.04);
  GrowthLaw law;
  const ConstraintSystem empty = base_system(st, law);
  const ReactionSolution e = oracle_solve_reaction(empty);
  for (const Vec3& w : e.omega) CHECK(w.norm() == 0.0);

  ConstraintSystem sys = base_system(st, law);
  const Vec3 n = fixtures::random_unit(rng);
  ConstraintRow a;
  a.node = 15;
  a.normal = n;
  a.free_rate = -0.4;
  sys.add_row(a);
  ConstraintRow implied = a;  // neighbouring node, demand already met
  implied.node = 14;
  implied.free_rate = 0.5;
  sys.add_row(implied);
  ConstraintRow other;
  other.node = 22;
  other.normal = fixtures::random_unit(rng);
  other.free_rate = -0.3;
  sys.add_row(other);
  const ReactionSolution o = oracle_solve_reaction(sys);
  const ReactionSolution s = solve_reaction(sys);
  std::size_t idx = 0;
  while (sys.rows[idx].node != 14) ++idx;
  CHECK(o.mu[idx] == 0.0);
  CHECK(s.mu[idx] == 0.0);
  CHECK((fixtures::flatten(o.omega) - fixtures::flatten(s.omega)).norm() < 1e-9);
  for (std::size_t j = 0; j < 3; ++j) CHECK(o.mu[j] == doctest::Approx(s.mu[j]).epsilon(1e-8));

  ConstraintSystem big = base_system(fixtures::random_stem(rng, 40, 0.025), law);
  for (std::size_t j = 1; j <= 13; ++j) {
    ConstraintRow r;
    r.node = 2 * j;
    big.add_row(r);
  }
  try {
    oracle_solve_reaction(big);
    FAIL("expected TooManyContacts");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::TooManyContacts);
  }
}

TEST_CASE("infeasible demand at a row without lever") {
  // A straight stem cannot move a node along its own axis.
  const StemState st = straight(Vec3::UnitZ(), 10, 0.1, 12);
  GrowthLaw law;
  ConstraintSystem sys = base_system(st, law);
  ConstraintRow r;
  r.node = 6;
  r.normal = -Vec3::UnitZ();
  r.free_rate = -1.0;
  sys.add_row(r);
  try {
    solve_reaction(sys);
    FAIL("expected Infeasible");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Infeasible);
  }
}

TEST_CASE("property: solver agrees with the oracle and satisfies KKT") {
  std::mt19937_64 rng(424242);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = 20 + static_cast<std::size_t>(trial % 60);
    const StemState st = fixtures::random_stem(rng, n, 1.0 / static_cast<double>(n));
    const double beta = 0.02 * (trial % 100);
    const std::size_t m = 1 + static_cast<std::size_t>(trial % 5);
    const ConstraintSystem sys = fixtures::random_system(rng, st, beta, m);
    const ReactionSolution a = solve_reaction(sys);
    const ReactionSolution o = oracle_solve_reaction(sys);
    const double ref = fixtures::flatten(o.omega).norm();
    CHECK((fixtures::flatten(a.omega) - fixtures::flatten(o.omega)).norm() <= 1e-8 * (1.0 + ref));
    const fixtures::Kkt k = fixtures::kkt(sys, a.omega, a.mu);
    CHECK(k.min_mu >= 0.0);
    CHECK(k.min_slack >= -1e-9);
    CHECK(k.stationarity <= 1e-9 * (1.0 + k.omega_norm));
    CHECK(k.complementarity <= 1e-8 * (1.0 + k.b_norm));
    // Energy matches 1/2 sum d |omega|^2 and never exceeds any feasible point's, e.g. the oracle's.
    CHECK(a.energy <= o.energy * (1.0 + 1e-9) + 1e-15);
    // Operator adjointness: <A w, mu> = sum d_i <w_i, A^T mu / decay_i>.
    const std::vector<double> aw = apply_rows(sys, a.omega);
    for (std::size_t j = 0; j < m; ++j) CHECK(aw[j] - sys.rows[j].rhs == doctest::Approx(a.slack[j]).epsilon(1e-6));
  }
}

TEST_CASE("property: unit-scale demands near the root stay within the floating-point floor") {
  // Rows a few cells from the root have Gram diagonals ~ ds^3 and need multipliers
  // up to ~1e9; complementarity is then bounded relative to mu, not absolutely.
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = 20 + static_cast<std::size_t>(trial % 80);
    const StemState st = fixtures::random_stem(rng, n, 1.0 / static_cast<double>(n));
    const ConstraintSystem sys = fixtures::stress_system(rng, st, 0.02 * (trial % 150), 1 + trial % 5);
    ReactionSolution a;
    try {
      a = solve_reaction(sys);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Infeasible);
      continue;
    }
    const fixtures::Kkt k = fixtures::kkt(sys, a.omega, a.mu);
    double mu_max = 0.0;
    for (double v : a.mu) mu_max = std::max(mu_max, v);
    CHECK(k.min_mu >= 0.0);
    CHECK(k.stationarity <= 1e-9 * (1.0 + k.omega_norm));
    CHECK(k.complementarity <= 1e-12 * (1.0 + mu_max) * (1.0 + k.b_norm));
  }
}

TEST_CASE("warm start does not change the solution") {
  std::mt19937_64 rng(31);
  const StemState st = fixtures::random_stem(rng, 60, 1.0 / 60);
  const ConstraintSystem sys = fixtures::random_system(rng, st, 1.0, 5);
  const ReactionSolution cold = solve_reaction(sys);
  std::vector<std::size_t> warm;
  for (const auto& r : sys.rows) warm.push_back(r.node);
  const ReactionSolution hot = solve_reaction(sys, {}, warm);
  CHECK((fixtures::flatten(cold.omega) - fixtures::flatten(hot.omega)).norm() < 1e-10);
}
