#include "stemgrow/reaction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stemgrow/error.hpp"

namespace stemgrow {

const char* to_string(RowKind kind) {
  switch (kind) {
    case RowKind::Contact: return "contact";
    case RowKind::Tip: return "tip";
    case RowKind::Approach: return "approach";
  }
  return "unknown";
}

ContactSet detect_contacts(const StemState& stem, const Scene& scene, double eps_contact,
                           double eps_penetration) {
  ContactSet out;
  if (scene.empty()) return out;
  // Normals are requested down to the penetration tolerance, so the band must reach it.
  const double band = std::max(10.0 * eps_contact, 2.0 * eps_penetration);
  for (std::size_t j = 0; j <= stem.tip; ++j) {
    const double gap = signed_distance(scene, stem.gamma[j]);
    if (gap < -eps_penetration) {
      throw Error(ErrorKind::PenetrationExceeded,
                  "node " + std::to_string(j) + " is " + std::to_string(-gap) + " inside the obstacle");
    }
    if (j == 0 || gap > eps_contact) continue;
    out.contacts.push_back({j, stem.grid.node(j), outer_normal(scene, stem.gamma[j], band), gap});
    if (j == stem.tip) out.tip_in_contact = true;
  }
  return out;
}

std::size_t ConstraintSystem::support(std::size_t row) const {
  return std::min(rows[row].node, cells);
}

Vec3 ConstraintSystem::coefficient(std::size_t row, std::size_t cell) const {
  if (cell >= support(row)) return Vec3::Zero();
  return (rows[row].point - gamma[cell]).cross(rows[row].normal);
}

void ConstraintSystem::add_row(ConstraintRow row) {
  const auto pos = std::lower_bound(rows.begin(), rows.end(), row.node,
                                    [](const ConstraintRow& r, std::size_t n) { return r.node < n; });
  if (pos != rows.end() && pos->node == row.node) {
    throw Error(ErrorKind::InvalidConfig, "duplicate constraint row at node " + std::to_string(row.node));
  }
  row.rhs = -row.free_rate + row.bias + row.growth;
  rows.insert(pos, row);
}

ConstraintSystem base_system(const StemState& stem, const GrowthLaw& law) {
  ConstraintSystem sys;
  sys.spacing = stem.grid.spacing;
  sys.cells = stem.tip;
  sys.gamma.resize(stem.tip);
  for (std::size_t i = 0; i < stem.tip; ++i) sys.gamma[i] = cell_midpoint(stem, i);
  sys.decay.resize(stem.tip);
  sys.weights.resize(stem.tip);
  const double t = stem.time();
  for (std::size_t i = 0; i < stem.tip; ++i) {
    const double age = t - stem.grid.node(i);
    sys.decay[i] = std::exp(-law.beta * age);
    sys.weights[i] = sys.spacing * std::exp(law.beta * age);
  }
  return sys;
}

std::vector<Vec3> free_density(const StemState& stem, const GrowthLaw& law) {
  std::vector<Vec3> psi(stem.tip);
  const double t = stem.time();
  for (std::size_t i = 0; i < stem.tip; ++i) {
    psi[i] = eval_psi(law, t, stem.grid.node(i), stem.gamma[i], stem.k[i]);
  }
  return psi;
}

std::vector<Vec3> velocity_field(const StemState& stem, std::span<const Vec3> density) {
  const std::size_t n = stem.gamma.size();
  const std::size_t cells = std::min(density.size(), stem.tip);
  const double ds = stem.grid.spacing;
  std::vector<Vec3> v(n, Vec3::Zero());
  // Prefix sums about the root keep the per-node cost O(1).
  Vec3 s1 = Vec3::Zero();
  Vec3 s2 = Vec3::Zero();
  for (std::size_t j = 0; j < n; ++j) {
    if (j > 0 && j - 1 < cells) {
      s1 += ds * density[j - 1];
      s2 += ds * density[j - 1].cross(cell_midpoint(stem, j - 1));
    }
    v[j] = s1.cross(stem.gamma[j]) - s2;
  }
  return v;
}

ConstraintSystem assemble_constraints(const StemState& stem, const ContactSet& contacts,
                                      const GrowthLaw& law, double kappa, double dt) {
  if (contacts.empty()) throw Error(ErrorKind::EmptyContactSet, "no contacts to constrain");
  ConstraintSystem sys = base_system(stem, law);
  const std::vector<Vec3> psi = free_density(stem, law);
  const std::vector<Vec3> v_free = velocity_field(stem, psi);
  for (const Contact& c : contacts.contacts) {
    ConstraintRow row;
    row.node = c.node;
    row.kind = c.node == stem.tip ? RowKind::Tip : RowKind::Contact;
    row.point = stem.gamma[c.node];
    row.normal = c.normal;
    row.gap = c.gap;
    row.free_rate = v_free[c.node].dot(c.normal);
    row.bias = kappa * std::max(0.0, -c.gap) / dt;
    if (row.kind == RowKind::Tip) row.growth = std::max(0.0, -stem.k[stem.tip].dot(c.normal));
    sys.add_row(row);
  }
  return sys;
}

std::vector<double> apply_rows(const ConstraintSystem& system, std::span<const Vec3> omega) {
  const std::size_t m = system.rows.size();
  std::vector<double> out(m, 0.0);
  if (m == 0) return out;
  const Vec3 origin = system.rows.front().point;
  const double ds = system.spacing;
  Vec3 s1 = Vec3::Zero();
  Vec3 s2 = Vec3::Zero();
  std::size_t i = 0;
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t p = system.support(r);
    for (; i < p; ++i) {
      s1 += ds * omega[i];
      s2 += ds * omega[i].cross(system.gamma[i] - origin);
    }
    const Vec3 v = s1.cross(system.rows[r].point - origin) - s2;
    out[r] = v.dot(system.rows[r].normal);
  }
  return out;
}

std::vector<Vec3> apply_rows_transpose(const ConstraintSystem& system, std::span<const double> mu) {
  std::vector<Vec3> omega(system.cells, Vec3::Zero());
  const std::size_t m = system.rows.size();
  if (m == 0 || std::all_of(mu.begin(), mu.end(), [](double x) { return x == 0.0; })) return omega;
  const Vec3 origin = system.rows.front().point;
  Vec3 acc_c = Vec3::Zero();
  Vec3 acc_n = Vec3::Zero();
  std::size_t pending = m;  // rows [pending, m) already accumulated
  for (std::size_t i = system.cells; i-- > 0;) {
    while (pending > 0 && system.support(pending - 1) > i) {
      --pending;
      const auto& row = system.rows[pending];
      acc_c += mu[pending] * (row.point - origin).cross(row.normal);
      acc_n += mu[pending] * row.normal;
    }
    omega[i] = system.decay[i] * (acc_c - (system.gamma[i] - origin).cross(acc_n));
  }
  return omega;
}

double reaction_energy(const ConstraintSystem& system, std::span<const Vec3> omega) {
  double e = 0.0;
  for (std::size_t i = 0; i < system.cells; ++i) e += system.weights[i] * omega[i].squaredNorm();
  return 0.5 * e;
}

Vec3 reaction_velocity(const StemState& stem, std::span<const Vec3> omega, double s) {
  if (s <= 0.0) return Vec3::Zero();
  const double ds = stem.grid.spacing;
  const std::size_t last = stem.gamma.size() - 1;
  const auto j = std::min(static_cast<std::size_t>(std::floor(s / ds)), last);
  const Vec3 at = stem.gamma[j] + (s - stem.grid.node(j)) * stem.k[j];
  Vec3 v = Vec3::Zero();
  const std::size_t cells = std::min(omega.size(), stem.tip);
  for (std::size_t i = 0; i < cells; ++i) {
    const double lo = stem.grid.node(i);
    if (s <= lo) break;
    const double len = std::min(ds, s - lo);
    const Vec3 mid = len == ds ? cell_midpoint(stem, i) : Vec3(stem.gamma[i] + (0.5 * len) * stem.k[i]);
    v += len * omega[i].cross(at - mid);
  }
  return v;
}

namespace {

// Prefix moments of the Gram kernel, so any entry
// G_jl = sum_{i < p} ds decay_i <a_j(s_i), a_l(s_i)> costs O(1).
class GramMoments {
 public:
  explicit GramMoments(const ConstraintSystem& sys) : sys_(sys) {
    origin_ = sys.rows.empty() ? Vec3::Zero() : sys.rows.front().point;
    const std::size_t n = sys.cells;
    m0_.assign(n + 1, 0.0);
    m1_.assign(n + 1, Vec3::Zero());
    m2_.assign(n + 1, Mat3::Zero());
    for (std::size_t i = 0; i < n; ++i) {
      const double w = sys.spacing * sys.decay[i];
      const Vec3 g = sys.gamma[i] - origin_;
      m0_[i + 1] = m0_[i] + w;
      m1_[i + 1] = m1_[i] + w * g;
      m2_[i + 1] = m2_[i] + w * (g.squaredNorm() * Mat3::Identity() - g * g.transpose());
    }
    for (const auto& row : sys.rows) c_.push_back((row.point - origin_).cross(row.normal));
  }

  double operator()(std::size_t j, std::size_t l) const {
    const std::size_t p = std::min(sys_.support(j), sys_.support(l));
    const Vec3& nj = sys_.rows[j].normal;
    const Vec3& nl = sys_.rows[l].normal;
    return m0_[p] * c_[j].dot(c_[l]) - c_[j].dot(m1_[p].cross(nl)) - c_[l].dot(m1_[p].cross(nj)) +
           nj.dot(m2_[p] * nl);
  }

  double mass(std::size_t j) const { return m0_[sys_.support(j)]; }

 private:
  const ConstraintSystem& sys_;
  Vec3 origin_;
  std::vector<double> m0_;
  std::vector<Vec3> m1_;
  std::vector<Mat3> m2_;
  std::vector<Vec3> c_;
};

// Face solve with a ridge relative to each diagonal entry (the ridge of the
// Jacobi-scaled dual), plus one refinement step against the unridged block.
Eigen::VectorXd solve_block(const GramMoments& gram, const std::vector<std::size_t>& set,
                            const ConstraintSystem& sys, double ridge) {
  const auto k = static_cast<Eigen::Index>(set.size());
  Eigen::MatrixXd g(k, k);
  Eigen::VectorXd b(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    b(a) = sys.rows[set[a]].rhs;
    for (Eigen::Index c = a; c < k; ++c) {
      g(a, c) = gram(set[a], set[c]);
      g(c, a) = g(a, c);
    }
  }
  Eigen::MatrixXd reg = g;
  for (Eigen::Index a = 0; a < k; ++a) reg(a, a) += ridge * g(a, a);
  const Eigen::LDLT<Eigen::MatrixXd> f(reg);
  Eigen::VectorXd z = f.solve(b);
  z += f.solve(b - g * z);
  return z;
}

}  // namespace

ReactionSolution solve_reaction(const ConstraintSystem& system, const SolverOptions& options,
                                std::span<const std::size_t> warm_nodes) {
  const std::size_t m = system.rows.size();
  ReactionSolution sol;
  sol.omega.assign(system.cells, Vec3::Zero());
  sol.mu.assign(m, 0.0);
  if (m == 0) return sol;

  const GramMoments gram(system);
  double b_max = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    b_max = std::max(b_max, std::abs(system.rows[j].rhs));
  }
  const double tol = options.tolerance * (1.0 + b_max);
  const double ridge = options.ridge;

  // A row with no lever arm cannot be satisfied by any bending.
  for (std::size_t j = 0; j < m; ++j) {
    const double lever = static_cast<double>(system.support(j)) * system.spacing;
    if (gram(j, j) <= 1e-24 * gram.mass(j) * lever * lever && system.rows[j].rhs > tol) {
      throw Error(ErrorKind::Infeasible,
                  "constraint at node " + std::to_string(system.rows[j].node) + " has no admissible bending");
    }
  }

  std::vector<char> passive(m, 0);
  std::vector<double>& mu = sol.mu;
  auto members = [&] {
    std::vector<std::size_t> set;
    for (std::size_t j = 0; j < m; ++j)
      if (passive[j]) set.push_back(j);
    return set;
  };

  // Warm start: shrink the guessed set until its face minimizer is positive.
  for (std::size_t node : warm_nodes) {
    for (std::size_t j = 0; j < m; ++j)
      if (system.rows[j].node == node) passive[j] = 1;
  }
  while (true) {
    const auto set = members();
    if (set.empty()) break;
    const Eigen::VectorXd z = solve_block(gram, set, system, ridge);
    bool positive = true;
    for (Eigen::Index a = 0; a < z.size(); ++a) {
      if (!(z(a) > 0.0)) {
        passive[set[a]] = 0;
        positive = false;
      }
    }
    if (positive) {
      for (Eigen::Index a = 0; a < z.size(); ++a) mu[set[a]] = z(a);
      break;
    }
  }

  auto refresh = [&] {
    sol.omega = apply_rows_transpose(system, mu);
    const std::vector<double> rate = apply_rows(system, sol.omega);
    sol.slack.resize(m);
    for (std::size_t j = 0; j < m; ++j) sol.slack[j] = rate[j] - system.rows[j].rhs;
  };
  refresh();

  std::vector<char> blocked(m, 0);
  for (;;) {
    std::size_t pick = m;
    double worst = -tol;
    for (std::size_t j = 0; j < m; ++j) {
      if (passive[j] || blocked[j]) continue;
      if (sol.slack[j] < worst) {
        worst = sol.slack[j];
        pick = j;
      }
    }
    if (pick == m) break;
    if (++sol.iterations > options.max_iterations) {
      throw Error(ErrorKind::MaxIterations, "dual active set did not converge; worst slack " +
                                                std::to_string(worst) + " after " +
                                                std::to_string(options.max_iterations) + " iterations");
    }

    passive[pick] = 1;
    bool first = true;
    for (;;) {
      const auto set = members();
      const Eigen::VectorXd z = solve_block(gram, set, system, ridge);
      if (first) {
        const auto at = std::find(set.begin(), set.end(), pick) - set.begin();
        if (!(z(at) > 0.0)) {
          // Adding the row cannot move the multipliers; stop proposing it until they change.
          passive[pick] = 0;
          blocked[pick] = 1;
          break;
        }
        first = false;
      }
      bool positive = true;
      double alpha = 1.0;
      std::size_t blocking = m;
      for (Eigen::Index a = 0; a < z.size(); ++a) {
        if (!(z(a) > 0.0)) {
          positive = false;
          const double cur = mu[set[a]];
          const double step = cur / (cur - z(a));
          if (step < alpha || blocking == m) {
            alpha = std::min(alpha, step);
            blocking = set[a];
          }
        }
      }
      if (positive) {
        for (Eigen::Index a = 0; a < z.size(); ++a) mu[set[a]] = z(a);
        std::fill(blocked.begin(), blocked.end(), 0);
        break;
      }
      for (Eigen::Index a = 0; a < z.size(); ++a) {
        const std::size_t j = set[a];
        mu[j] += alpha * (z(a) - mu[j]);
        if (j == blocking || !(mu[j] > 0.0)) {
          mu[j] = 0.0;
          passive[j] = 0;
        }
      }
    }
    refresh();
  }

  // Primal feasibility is the certificate; a stalled dual on an empty feasible set ends here.
  const double feas_tol = 1e-9 * (1.0 + b_max);
  for (std::size_t j = 0; j < m; ++j) {
    if (sol.slack[j] < -feas_tol) {
      throw Error(ErrorKind::Infeasible, "constraint at node " + std::to_string(system.rows[j].node) +
                                             " violated by " + std::to_string(-sol.slack[j]));
    }
  }

  for (std::size_t j = 0; j < m; ++j)
    if (mu[j] > 0.0) sol.active.push_back(j);
  sol.energy = reaction_energy(system, sol.omega);

  if (!sol.active.empty()) {
    const auto k = static_cast<Eigen::Index>(sol.active.size());
    Eigen::MatrixXd g(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index c = 0; c < k; ++c) g(a, c) = gram(sol.active[a], sol.active[c]);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g, Eigen::EigenvaluesOnly).eigenvalues();
    sol.degenerate = ev(0) <= 1e-10 * ev(k - 1);
  }
  return sol;
}

}  // namespace stemgrow
