#include "stemgrow/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "stemgrow/diagnostics.hpp"
#include "stemgrow/error.hpp"

namespace stemgrow {

namespace {

constexpr double kIntegralTol = 1e-6;
constexpr std::size_t kMaxApproachRounds = 64;

// n with n * ds == length, or throws naming `field`.
std::size_t whole_cells(double length, double ds, const char* field) {
  const double ratio = length / ds;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > kIntegralTol || n < 0.0) {
    throw Error(ErrorKind::InvalidConfig,
                std::string(field) + " must be a whole multiple of dt (got " + std::to_string(ratio) + " cells)");
  }
  return static_cast<std::size_t>(n);
}

Vec3 arc_point(const Vec3& d, const Vec3& b, double radius, double s) {
  const double a = s / radius;
  return radius * std::sin(a) * d + radius * (1.0 - std::cos(a)) * b;
}

// Unit vector orthogonal to d in the plane of (d, b).
Vec3 bend_axis(const Vec3& d, const Vec3& b) {
  return (b - b.dot(d) * d).normalized();
}

std::vector<double> polyline_lengths(const std::vector<Vec3>& pts) {
  std::vector<double> acc(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) acc[i] = acc[i - 1] + (pts[i] - pts[i - 1]).norm();
  return acc;
}

}  // namespace

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::ContactOnset: return "ContactOnset";
    case EventKind::ContactRelease: return "ContactRelease";
    case EventKind::Breakdown: return "Breakdown";
    case EventKind::HorizonReached: return "HorizonReached";
    case EventKind::IntegrityFailure: return "IntegrityFailure";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// Seed curve

double SeedCurve::arclength() const {
  if (kind == Kind::Polyline) return points.size() < 2 ? 0.0 : polyline_lengths(points).back();
  return length;
}

void SeedCurve::validate() const {
  switch (kind) {
    case Kind::Segment:
    case Kind::Arc:
      if (!(length > 0.0)) throw Error(ErrorKind::InvalidConfig, "seed_curve.length must be positive");
      if (direction.norm() < 1e-12) throw Error(ErrorKind::InvalidConfig, "seed_curve.direction is zero");
      if (kind == Kind::Arc) {
        if (!(radius > 0.0)) throw Error(ErrorKind::InvalidConfig, "seed_curve.radius must be positive");
        const Vec3 d = direction.normalized();
        if ((bend - bend.dot(d) * d).norm() < 1e-9)
          throw Error(ErrorKind::InvalidConfig, "seed_curve.bend must not be parallel to seed_curve.direction");
      }
      break;
    case Kind::Polyline:
      if (points.size() < 2) throw Error(ErrorKind::InvalidConfig, "seed_curve.points needs at least two points");
      if (points.front().norm() > 1e-12)
        throw Error(ErrorKind::InvalidConfig, "seed_curve.points must start at the origin");
      if (!(arclength() > 0.0)) throw Error(ErrorKind::InvalidConfig, "seed_curve.points has zero length");
      break;
  }
  const Mat3 q = orientation;
  if ((q.transpose() * q - Mat3::Identity()).norm() > 1e-9 || q.determinant() < 0.0)
    throw Error(ErrorKind::InvalidConfig, "seed orientation must be a rotation");
}

std::vector<Vec3> SeedCurve::sample(std::size_t count, double ds) const {
  std::vector<Vec3> out(count);
  const Vec3 d = direction.normalized();
  if (kind == Kind::Segment) {
    for (std::size_t i = 0; i < count; ++i) out[i] = (static_cast<double>(i) * ds) * d;
  } else if (kind == Kind::Arc) {
    const Vec3 b = bend_axis(d, bend);
    for (std::size_t i = 0; i < count; ++i) out[i] = arc_point(d, b, radius, static_cast<double>(i) * ds);
  } else {
    const std::vector<double> acc = polyline_lengths(points);
    std::size_t seg = 1;
    for (std::size_t i = 0; i < count; ++i) {
      const double s = std::min(static_cast<double>(i) * ds, acc.back());
      while (seg + 1 < points.size() && acc[seg] < s) ++seg;
      const double len = acc[seg] - acc[seg - 1];
      const double w = len > 0.0 ? (s - acc[seg - 1]) / len : 0.0;
      out[i] = (1.0 - w) * points[seg - 1] + w * points[seg];
    }
  }
  for (auto& p : out) p = orientation * p;
  return out;
}

Vec3 SeedCurve::end_tangent() const {
  Vec3 t;
  const Vec3 d = direction.normalized();
  if (kind == Kind::Segment) {
    t = d;
  } else if (kind == Kind::Arc) {
    const double a = length / radius;
    t = std::cos(a) * d + std::sin(a) * bend_axis(d, bend);
  } else {
    t = Vec3::Zero();
    for (std::size_t i = points.size() - 1; i > 0 && t.norm() == 0.0; --i) t = points[i] - points[i - 1];
    t.normalize();
  }
  return (orientation * t).normalized();
}

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::InvalidConfig, "numerics.dt must be positive");
  seed.validate();
  const double t0 = seed.arclength();
  if (!(horizon > t0)) throw Error(ErrorKind::InvalidConfig, "numerics.horizon must exceed the seed length");
  whole_cells(t0, dt, "seed_curve length");
  whole_cells(horizon, dt, "numerics.horizon");
  if (!(tol.contact > 0.0)) throw Error(ErrorKind::InvalidConfig, "numerics.eps_contact must be positive");
  if (!(tol.penetration > 0.0)) throw Error(ErrorKind::InvalidConfig, "numerics.eps_penetration must be positive");
  if (!(tol.breakdown_angle >= 0.0)) throw Error(ErrorKind::InvalidConfig, "numerics.eps_breakdown_angle must be >= 0");
  if (!(tol.breakdown_curvature >= 0.0))
    throw Error(ErrorKind::InvalidConfig, "numerics.eps_breakdown_curvature must be >= 0");
  if (!(kappa >= 0.0)) throw Error(ErrorKind::InvalidConfig, "numerics.kappa must be >= 0");
  if (stride == 0) throw Error(ErrorKind::InvalidConfig, "output.stride must be >= 1");
  law.validate();
  try {
    scene.validate(tol.contact);
  } catch (const Error& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("scene: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// State

StemState init_state(const SimConfig& config) {
  config.validate();
  const double ds = config.ds();
  const std::size_t grown = whole_cells(config.seed.arclength(), ds, "seed_curve length");
  const std::size_t last = whole_cells(config.horizon, ds, "numerics.horizon");

  StemState st;
  st.grid = {ds, last + 1};
  st.tip = grown;
  const std::vector<Vec3> nodes = config.seed.sample(grown + 1, ds);
  st.k.assign(last + 1, Vec3::Zero());
  for (std::size_t i = 0; i < grown; ++i) {
    const Vec3 chord = nodes[i + 1] - nodes[i];
    if (chord.norm() < 1e-3 * ds) {
      throw Error(ErrorKind::InvalidConfig, "seed_curve folds back on itself near s = " + std::to_string(i * ds));
    }
    st.k[i] = chord.normalized();
  }
  st.k[grown] = config.seed.end_tangent();
  st.refresh();

  const Scene& scene = config.scene;
  if (!scene.empty()) {
    if (signed_distance(scene, Vec3::Zero()) <= config.tol.contact) {
      throw Error(ErrorKind::InitialPenetration, "the root lies on or inside the obstacle");
    }
    for (std::size_t i = 0; i <= grown; ++i) {
      const double a = signed_distance(scene, nodes[i]);
      const double b = signed_distance(scene, st.gamma[i]);
      if (std::min(a, b) < -config.tol.penetration) {
        throw Error(ErrorKind::InitialPenetration,
                    "the seed curve enters the obstacle at s = " + std::to_string(st.grid.node(i)));
      }
    }
    const ContactSet contacts = detect_contacts(st, scene, config.tol.contact, config.tol.penetration);
    const BreakdownReport b = detect_breakdown(st, contacts, config);
    if (b.flagged) {
      throw Error(ErrorKind::InitialBreakdown, "the seed tip meets the obstacle perpendicularly on a straight stem");
    }
  }
  return st;
}

BreakdownReport detect_breakdown(const StemState& state, const ContactSet& contacts, const SimConfig& config) {
  BreakdownReport r;
  std::set<std::size_t> touching;
  for (const auto& c : contacts.contacts) touching.insert(c.node);
  const double ds = state.grid.spacing;
  for (std::size_t i = 1; i < state.tip; ++i) {
    if (touching.count(i)) continue;
    const double curv = (state.k[i] - state.k[i - 1]).norm() / ds;
    if (curv > r.max_curvature) {
      r.max_curvature = curv;
      r.curvature_node = i;
    }
  }
  r.tip_in_contact = contacts.tip_in_contact;
  if (!contacts.tip_in_contact) return r;
  const Vec3& n = contacts.contacts.back().normal;
  r.angle_residual = 1.0 - state.k[state.tip].dot(-n);
  r.flagged = r.angle_residual <= config.tol.breakdown_angle &&
              r.max_curvature <= config.tol.breakdown_curvature;
  return r;
}

std::vector<Vec3> advance_tangents(const StemState& state, std::span<const Vec3> density, double h) {
  std::vector<Vec3> k = state.k;
  const double ds = state.grid.spacing;
  Vec3 cumulative = Vec3::Zero();
  for (std::size_t i = 0; i < state.tip; ++i) {
    const Vec3 half = (0.5 * ds) * density[i];
    k[i] = rotate(h * (cumulative + half), state.k[i]);
    cumulative += ds * density[i];
  }
  k[state.tip] = rotate(h * cumulative, state.k[state.tip]);
  for (std::size_t i = state.tip + 1; i < k.size(); ++i) k[i] = k[state.tip];
  return k;
}

std::vector<Vec3> realized_velocity(const StemState& state, std::span<const Vec3> density, double h) {
  const TangentField plus{state.grid, advance_tangents(state, density, h)};
  const TangentField minus{state.grid, advance_tangents(state, density, -h)};
  const std::vector<Vec3> gp = integrate_tangents(plus, Vec3::Zero());
  const std::vector<Vec3> gm = integrate_tangents(minus, Vec3::Zero());
  std::vector<Vec3> v(gp.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (gp[i] - gm[i]) / (2.0 * h);
  return v;
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

Event make_event(EventKind kind, double t, std::string detail = {}) {
  Event e;
  e.kind = kind;
  e.t = t;
  e.detail = std::move(detail);
  return e;
}

void attach(Event& e, const BreakdownReport& b) {
  e.diagnostics = {{"angle_residual", b.angle_residual},
                   {"max_curvature", b.max_curvature},
                   {"curvature_node", static_cast<double>(b.curvature_node)}};
}

Frame snapshot(const StemState& st) {
  Frame f;
  f.t = st.time();
  f.tip = st.tip;
  f.ds = st.grid.spacing;
  f.gamma.assign(st.gamma.begin(), st.gamma.begin() + static_cast<std::ptrdiff_t>(st.tip + 1));
  f.k.assign(st.k.begin(), st.k.begin() + static_cast<std::ptrdiff_t>(st.tip + 1));
  return f;
}

double min_gap(const StemState& st, const Scene& scene) {
  double g = std::numeric_limits<double>::max();
  for (std::size_t i = 0; i <= st.tip; ++i) g = std::min(g, signed_distance(scene, st.gamma[i]));
  return g;
}

struct Reaction {
  ConstraintSystem system;
  ReactionSolution solution;
};

// Solves the reaction for the current contacts, then adds approach rows for
// nodes the resulting motion would carry inside within this step, until no
// such node remains.
Reaction solve_with_approach(const StemState& st, const ContactSet& contacts, const SimConfig& cfg,
                             const std::vector<Vec3>& psi, const std::vector<std::size_t>& warm) {
  Reaction r;
  r.system = contacts.empty() ? base_system(st, cfg.law)
                              : assemble_constraints(st, contacts, cfg.law, cfg.kappa, cfg.dt);
  const std::vector<Vec3> v_free = velocity_field(st, psi);
  const std::size_t last = st.at_horizon() ? st.tip : st.tip + 1;
  std::vector<std::size_t> warm_nodes = warm;

  for (std::size_t round = 0;; ++round) {
    r.solution = solve_reaction(r.system, {}, warm_nodes);
    if (cfg.scene.empty()) break;
    std::vector<Vec3> v = v_free;
    if (!r.solution.active.empty()) {
      const std::vector<Vec3> v_react = velocity_field(st, r.solution.omega);
      for (std::size_t j = 0; j < v.size(); ++j) v[j] += v_react[j];
    }
    std::set<std::size_t> rowed;
    for (const auto& row : r.system.rows) rowed.insert(row.node);
    bool added = false;
    for (std::size_t j = 1; j <= last; ++j) {
      if (rowed.count(j)) continue;
      if (j == st.tip + 1 && contacts.tip_in_contact) continue;  // the tip row already guards growth
      const double gap = signed_distance(cfg.scene, st.gamma[j]);
      if (gap - cfg.dt * v[j].norm() >= 0.0) continue;
      const Vec3 n = sdf_gradient(cfg.scene, st.gamma[j]);
      if (gap + cfg.dt * v[j].dot(n) >= 0.0) continue;
      ConstraintRow row;
      row.node = j;
      row.kind = RowKind::Approach;
      row.point = st.gamma[j];
      row.normal = n;
      row.gap = gap;
      row.free_rate = v_free[j].dot(n);
      row.bias = -gap / cfg.dt;  // land on the boundary at the end of the step
      r.system.add_row(row);
      added = true;
    }
    if (!added) break;
    if (round + 1 >= kMaxApproachRounds) {
      throw Error(ErrorKind::MaxIterations, "approach constraints did not settle");
    }
    warm_nodes.clear();
    for (std::size_t a : r.solution.active) warm_nodes.push_back(r.system.rows[a].node);
  }
  return r;
}

}  // namespace

Simulation::Simulation(SimConfig config) : config_(std::move(config)), state_(init_state(config_)) {}

Simulation::Simulation(SimConfig config, StemState state) : config_(std::move(config)), state_(std::move(state)) {
  config_.validate();
  if (state_.grid.spacing != config_.ds()) throw Error(ErrorKind::GridMismatch, "state spacing differs from dt");
}

StepResult Simulation::step() {
  if (finished_) throw Error(ErrorKind::InvalidConfig, "simulation already finished");
  StepResult out;
  Frame& frame = out.frame;
  frame = snapshot(state_);
  const double t = state_.time();

  auto finish = [&](EventKind kind, Event e) {
    finished_ = true;
    terminal_ = kind;
    out.events.push_back(std::move(e));
  };

  ContactSet contacts;
  try {
    contacts = detect_contacts(state_, config_.scene, config_.tol.contact, config_.tol.penetration);
  } catch (const Error& e) {
    finish(EventKind::IntegrityFailure, make_event(EventKind::IntegrityFailure, t, e.what()));
    return out;
  }
  if (!config_.scene.empty()) frame.min_gap = min_gap(state_, config_.scene);

  std::vector<std::size_t> touching;
  for (const auto& c : contacts.contacts) touching.push_back(c.node);

  auto contact_events = [&](std::vector<std::size_t> now) {
    std::sort(now.begin(), now.end());
    Event onset = make_event(EventKind::ContactOnset, t);
    Event release = make_event(EventKind::ContactRelease, t);
    std::set_difference(now.begin(), now.end(), previous_contacts_.begin(), previous_contacts_.end(),
                        std::back_inserter(onset.nodes));
    std::set_difference(previous_contacts_.begin(), previous_contacts_.end(), now.begin(), now.end(),
                        std::back_inserter(release.nodes));
    if (!onset.nodes.empty()) out.events.push_back(std::move(onset));
    if (!release.nodes.empty()) out.events.push_back(std::move(release));
    previous_contacts_ = now;
    frame.contacts = std::move(now);
  };

  const BreakdownReport breakdown = detect_breakdown(state_, contacts, config_);
  if (breakdown.flagged) {
    contact_events(touching);
    Event e = make_event(EventKind::Breakdown, t, "tip meets the obstacle perpendicularly on a straight stem");
    e.nodes = {state_.tip};
    attach(e, breakdown);
    finish(EventKind::Breakdown, std::move(e));
    return out;
  }

  const std::vector<Vec3> psi = free_density(state_, config_.law);
  Reaction reaction;
  try {
    reaction = solve_with_approach(state_, contacts, config_, psi, warm_);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Infeasible) {
      finish(EventKind::IntegrityFailure, make_event(EventKind::IntegrityFailure, t, e.what()));
      return out;
    }
    // An infeasible step whose tip lands perpendicularly on a straight stem is breakdown reached
    // inside the step rather than a numerical failure.
    ContactSet impending = contacts;
    if (!impending.tip_in_contact && !state_.at_horizon() && !config_.scene.empty()) {
      const Vec3& next = state_.gamma[state_.tip + 1];
      if (signed_distance(config_.scene, next) < 0.0) {
        impending.contacts.push_back({state_.tip, t, sdf_gradient(config_.scene, next), 0.0});
        impending.tip_in_contact = true;
      }
    }
    const BreakdownReport b = detect_breakdown(state_, impending, config_);
    if (b.flagged) {
      contact_events(touching);
      Event ev = make_event(EventKind::Breakdown, t, "tip reaches the obstacle perpendicularly within the step");
      ev.nodes = {state_.tip};
      attach(ev, b);
      finish(EventKind::Breakdown, std::move(ev));
    } else {
      finish(EventKind::IntegrityFailure, make_event(EventKind::IntegrityFailure, t, e.what()));
    }
    return out;
  }

  const ConstraintSystem& sys = reaction.system;
  const ReactionSolution& sol = reaction.solution;
  std::vector<std::size_t> reported = touching;
  for (std::size_t j = 0; j < sys.rows.size(); ++j) {
    const auto& row = sys.rows[j];
    frame.rows.push_back({row.node, row.kind, row.point, row.normal, row.gap, row.free_rate, row.rhs, row.bias,
                          row.growth, sol.mu[j]});
    if (row.kind == RowKind::Approach && sol.mu[j] > 0.0) reported.push_back(row.node);
  }
  contact_events(reported);

  frame.degenerate = sol.degenerate;
  warm_.clear();
  std::vector<Vec3> total;
  if (sol.active.empty()) {
    frame.omega.assign(sys.cells, Vec3::Zero());
    total = psi;
  } else {
    frame.omega = sol.omega;
    frame.energy = sol.energy;
    total.resize(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) total[i] = psi[i] + sol.omega[i];
    for (std::size_t a : sol.active) warm_.push_back(sys.rows[a].node);

    const std::vector<Vec3> rate = realized_velocity(state_, total);
    for (std::size_t a : sol.active) {
      const auto& row = sys.rows[a];
      const Vec3& v = rate[row.node];
      const double residual = std::abs(v.dot(row.normal) - row.bias - row.growth) / (1.0 + v.norm());
      frame.normal_rate_residual = std::max(frame.normal_rate_residual, residual);
    }
  }

  if (state_.at_horizon()) {
    finish(EventKind::HorizonReached, make_event(EventKind::HorizonReached, t));
    return out;
  }

  state_.k = advance_tangents(state_, total, config_.dt);
  state_.tip += 1;
  state_.refresh();

  const AuditReport audit = audit_state(state_, config_.scene, config_.tol);
  if (!audit.ok()) {
    finish(EventKind::IntegrityFailure, make_event(EventKind::IntegrityFailure, state_.time(), audit.failures.front()));
  }
  return out;
}

std::vector<Event> step(StemState& state, const SimConfig& config) {
  Simulation sim(config, state);
  StepResult r = sim.step();
  state = sim.state();
  return std::move(r.events);
}

RunSummary run(const SimConfig& config, const std::function<void(const Frame&)>& on_frame) {
  Simulation sim(config);
  RunSummary summary;
  std::size_t count = 0;
  while (!sim.finished()) {
    StepResult r = sim.step();
    const bool last = sim.finished();
    if (last || count % config.stride == 0) {
      on_frame(r.frame);
      ++summary.frames;
    }
    ++count;
    for (auto& e : r.events) summary.events.push_back(std::move(e));
  }
  summary.terminal = sim.terminal();
  return summary;
}

Trajectory run(const SimConfig& config) {
  Trajectory tr;
  RunSummary s = run(config, [&](const Frame& f) { tr.frames.push_back(f); });
  tr.events = std::move(s.events);
  tr.terminal = s.terminal;
  return tr;
}

}  // namespace stemgrow
