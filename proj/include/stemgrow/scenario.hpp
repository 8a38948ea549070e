#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "stemgrow/diagnostics.hpp"
#include "stemgrow/stepper.hpp"

namespace stemgrow {

inline constexpr const char* kToolVersion = "0.1.0";

/// Parses the config document (sections scene, law, seed_curve, numerics,
/// output). Unknown keys are rejected. Throws ParseError or ValidationError
/// whose message names the offending field.
SimConfig config_from_json(const nlohmann::json& doc);

/// Canonical document for `config`; config_from_json(config_to_json(c)) == c.
nlohmann::json config_to_json(const SimConfig& config);

/// Reads a config file, or a run manifest (its "config" member), and checks
/// that the initial state is admissible. Throws IoError, ParseError, ValidationError.
SimConfig load_config(const std::filesystem::path& path);

/// One JSON line (no trailing newline), fixed field order, 17 significant digits.
std::string frame_to_json(const Frame& frame);
std::string event_to_json(const Event& event);
Frame frame_from_json(const nlohmann::json& doc);

/// Grown state stored in a frame, extended straight to `horizon_nodes`.
StemState state_from_frame(const Frame& frame, std::size_t horizon_nodes);

/// The reaction problem a frame was solved for (rows as recorded).
ConstraintSystem system_from_frame(const Frame& frame, const GrowthLaw& law);

int exit_code(EventKind terminal);

struct RunResult {
  EventKind terminal = EventKind::HorizonReached;
  std::size_t frames = 0;
  std::vector<Event> events;
  int exit_status = 0;
};

/// Writes frames.jsonl, events.jsonl and manifest.json into `out`.
RunResult run_scenario(const SimConfig& config, const std::filesystem::path& out);

/// Rigid tilt about the origin: "tilt:<delta>" (axis e2) or "tilt:<delta>:<ax>,<ay>,<az>".
struct Perturbation {
  double angle = 0.0;
  Vec3 axis = Vec3::UnitY();
};

Perturbation parse_perturbation(const std::string& text);
SimConfig perturbed(const SimConfig& config, const Perturbation& p);

struct TwinResult {
  std::vector<double> t;
  std::vector<double> distance;
  EventKind terminal_a = EventKind::HorizonReached;
  EventKind terminal_b = EventKind::HorizonReached;
  bool has_certificate = false;
  GronwallCertificate certificate;
  std::string certificate_note;
};

/// Runs the base and perturbed configs side by side and records the weighted
/// rotation distance per step. Writes distances.jsonl and twin_summary.json
/// when `out` is non-empty.
TwinResult twin_run(const SimConfig& config, const Perturbation& p, const std::filesystem::path& out = {});

struct AuditSummary {
  std::size_t frames = 0;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

/// Re-validates every frame in a run directory (or a frames.jsonl inside one).
AuditSummary audit_frames(const std::filesystem::path& frames);

struct OracleSummary {
  std::size_t frames = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // more than 12 rows
  double max_omega_error = 0.0;
  double max_mu_error = 0.0;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

/// Re-solves each stored reaction with the enumeration oracle.
OracleSummary oracle_check(const std::filesystem::path& frames);

/// 0 quiet, 1 info (default), 2 debug; from STEMGROW_LOG.
int log_level();

}  // namespace stemgrow
