#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stemgrow/curves.hpp"
#include "stemgrow/growth.hpp"
#include "stemgrow/obstacles.hpp"
#include "stemgrow/reaction.hpp"
#include "stemgrow/stem.hpp"

namespace stemgrow {

/// Initial curve gamma-bar on [0, t0], starting at the origin. `orientation`
/// rigidly rotates the whole curve about the origin.
struct SeedCurve {
  enum class Kind { Segment, Arc, Polyline };

  Kind kind = Kind::Segment;
  Vec3 direction = Vec3::UnitZ();  // segment direction; initial tangent of an arc
  double length = 1.0;             // segment and arc
  double radius = 1.0;             // arc
  Vec3 bend = Vec3::UnitX();       // arc: direction the curve turns toward
  std::vector<Vec3> points;        // polyline, any parameterization
  Mat3 orientation = Mat3::Identity();

  double arclength() const;
  /// Points at arclength i * ds, i = 0..count-1 (polylines are resampled by arclength).
  std::vector<Vec3> sample(std::size_t count, double ds) const;
  Vec3 end_tangent() const;
  void validate() const;
};

struct SimConfig {
  double dt = 0.01;  // also the arclength spacing: one cell is born per step
  double horizon = 1.0;
  SeedCurve seed;
  Tolerances tol = Tolerances::defaults(0.01);
  double kappa = 0.2;
  GrowthLaw law;
  Scene scene;
  std::size_t stride = 1;

  double ds() const { return dt; }
  /// Throws InvalidConfig naming the offending field.
  void validate() const;
};

enum class EventKind { ContactOnset, ContactRelease, Breakdown, HorizonReached, IntegrityFailure };

const char* to_string(EventKind kind);

struct Event {
  EventKind kind = EventKind::HorizonReached;
  double t = 0.0;
  std::vector<std::size_t> nodes;
  std::string detail;
  std::vector<std::pair<std::string, double>> diagnostics;
};

/// Builds the state at t0: seed nodes on [0, t0] and the straight extension to the horizon.
/// Throws InitialPenetration or InitialBreakdown.
StemState init_state(const SimConfig& config);

struct BreakdownReport {
  bool flagged = false;
  bool tip_in_contact = false;
  double angle_residual = std::numeric_limits<double>::infinity();  // 1 - <k_tip, -n_tip>
  double max_curvature = 0.0;  // over grown interior nodes not in contact
  std::size_t curvature_node = 0;
};

BreakdownReport detect_breakdown(const StemState& state, const ContactSet& contacts,
                                 const SimConfig& config);

/// Rotates every tangent by h times the cumulative density up to the middle of
/// its cell; the tip and extension use the full integral over [0, t].
std::vector<Vec3> advance_tangents(const StemState& state, std::span<const Vec3> density, double h);

/// Node velocities realized by the tangent update, by central differences in the step size.
std::vector<Vec3> realized_velocity(const StemState& state, std::span<const Vec3> density,
                                    double h = 1e-5);

struct RowRecord {
  std::size_t node = 0;
  RowKind kind = RowKind::Contact;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double gap = 0.0;
  double free_rate = 0.0;
  double rhs = 0.0;
  double bias = 0.0;
  double growth = 0.0;
  double mu = 0.0;
};

/// Snapshot of the state at time t together with the reaction used to leave it.
struct Frame {
  double t = 0.0;
  std::size_t tip = 0;
  double ds = 0.0;
  std::vector<Vec3> gamma;  // grown nodes 0..tip
  std::vector<Vec3> k;
  std::vector<RowRecord> rows;
  std::vector<std::size_t> contacts;  // touching now, or landing on the boundary during this step
  std::vector<Vec3> omega;            // reaction density per cell
  double energy = 0.0;
  double min_gap = std::numeric_limits<double>::max();
  double normal_rate_residual = 0.0;  // max over active rows, relative to 1 + |gamma_t|
  bool degenerate = false;
};

struct StepResult {
  Frame frame;
  std::vector<Event> events;
};

/// Sequential driver; owns the state and the warm start of the reaction solver.
class Simulation {
 public:
  explicit Simulation(SimConfig config);
  /// Resumes from an arbitrary state on the same grid (no warm start).
  Simulation(SimConfig config, StemState state);

  const StemState& state() const { return state_; }
  const SimConfig& config() const { return config_; }
  bool finished() const { return finished_; }
  EventKind terminal() const { return terminal_; }

  /// Analyzes the current state, then advances one step unless the run ends here.
  StepResult step();

 private:
  SimConfig config_;
  StemState state_;
  bool finished_ = false;
  EventKind terminal_ = EventKind::HorizonReached;
  std::vector<std::size_t> warm_;
  std::vector<std::size_t> previous_contacts_;
};

/// Advances `state` by one step and returns the lifecycle events of the step.
std::vector<Event> step(StemState& state, const SimConfig& config);

struct RunSummary {
  EventKind terminal = EventKind::HorizonReached;
  std::vector<Event> events;
  std::size_t frames = 0;
};

/// Runs to the horizon or to breakdown; frames every `stride` steps plus the last one.
RunSummary run(const SimConfig& config, const std::function<void(const Frame&)>& on_frame);

struct Trajectory {
  std::vector<Frame> frames;
  std::vector<Event> events;
  EventKind terminal = EventKind::HorizonReached;
};

Trajectory run(const SimConfig& config);

}  // namespace stemgrow
