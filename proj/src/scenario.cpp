#include "stemgrow/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <sstream>
#include <fstream>
#include <iostream>
#include <string>

#include "stemgrow/error.hpp"

namespace stemgrow {

using nlohmann::json;
namespace fs = std::filesystem;

int log_level() {
  const char* v = std::getenv("STEMGROW_LOG");
  if (v == nullptr) return 1;
  const std::string s(v);
  if (s == "0" || s == "quiet" || s == "error") return 0;
  if (s == "2" || s == "debug") return 2;
  return 1;
}

namespace {

void log(int level, const std::string& msg) {
  if (level <= log_level()) std::cerr << "[stemgrow] " << msg << '\n';
}

void put(std::string& out, double x) {
  if (!std::isfinite(x)) {
    out += "null";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out += buf;
}

void put(std::string& out, const Vec3& v) {
  out += '[';
  put(out, v.x());
  out += ',';
  put(out, v.y());
  out += ',';
  put(out, v.z());
  out += ']';
}

template <class T, class F>
void put_list(std::string& out, const std::vector<T>& xs, F&& each) {
  out += '[';
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    each(xs[i]);
  }
  out += ']';
}

void put_string(std::string& out, const std::string& s) { out += json(s).dump(); }

Vec3 vec(const json& v) { return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()}; }

RowKind row_kind(const std::string& s) {
  if (s == "contact") return RowKind::Contact;
  if (s == "tip") return RowKind::Tip;
  if (s == "approach") return RowKind::Approach;
  throw Error(ErrorKind::ParseError, "unknown row kind '" + s + "'");
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot write " + p.string());
  return f;
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

// Directory holding frames.jsonl and manifest.json, given either.
fs::path run_dir(const fs::path& p) { return fs::is_directory(p) ? p : p.parent_path(); }
fs::path frames_file(const fs::path& p) { return fs::is_directory(p) ? p / "frames.jsonl" : p; }

SimConfig manifest_config(const fs::path& frames) {
  const fs::path m = run_dir(frames) / "manifest.json";
  if (!fs::exists(m)) throw Error(ErrorKind::IoError, "no manifest.json next to " + frames.string());
  return load_config(m);
}

template <class F>
std::size_t for_each_frame(const fs::path& frames, F&& each) {
  std::ifstream in(frames_file(frames));
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + frames_file(frames).string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::ParseError, "frame " + std::to_string(n) + ": " + e.what());
    }
    each(n, frame_from_json(doc));
    ++n;
  }
  return n;
}

}  // namespace

StemState state_from_frame(const Frame& f, std::size_t horizon_nodes) {
  if (horizon_nodes < f.tip + 1 || f.k.size() != f.tip + 1) throw Error(ErrorKind::GridMismatch, "frame does not fit the grid");
  StemState st;
  st.grid = {f.ds, horizon_nodes};
  st.tip = f.tip;
  st.k = f.k;
  st.k.resize(horizon_nodes);
  st.refresh();
  return st;
}

ConstraintSystem system_from_frame(const Frame& f, const GrowthLaw& law) {
  StemState stem;
  stem.grid = {f.ds, f.tip + 1};
  stem.tip = f.tip;
  stem.gamma = f.gamma;
  stem.k = f.k;
  ConstraintSystem sys = base_system(stem, law);
  for (const auto& rec : f.rows) {
    ConstraintRow row;
    row.node = rec.node;
    row.kind = rec.kind;
    row.point = rec.point;
    row.normal = rec.normal;
    row.gap = rec.gap;
    row.free_rate = rec.free_rate;
    row.bias = rec.bias;
    row.growth = rec.growth;
    sys.add_row(row);
  }
  return sys;
}

int exit_code(EventKind terminal) {
  switch (terminal) {
    case EventKind::HorizonReached: return 0;
    case EventKind::Breakdown: return 10;
    default: return 20;
  }
}

std::string frame_to_json(const Frame& f) {
  std::string out;
  out.reserve(64 * (f.gamma.size() + 4));
  out += "{\"t\":";
  put(out, f.t);
  out += ",\"tip\":" + std::to_string(f.tip) + ",\"ds\":";
  put(out, f.ds);
  out += ",\"s\":[";
  for (std::size_t i = 0; i < f.gamma.size(); ++i) {
    if (i) out += ',';
    put(out, static_cast<double>(i) * f.ds);
  }
  out += "],\"gamma\":";
  put_list(out, f.gamma, [&](const Vec3& v) { put(out, v); });
  out += ",\"k\":";
  put_list(out, f.k, [&](const Vec3& v) { put(out, v); });
  out += ",\"contacts\":";
  put_list(out, f.contacts, [&](std::size_t j) { out += std::to_string(j); });
  out += ",\"rows\":";
  put_list(out, f.rows, [&](const RowRecord& r) {
    out += "{\"node\":" + std::to_string(r.node) + ",\"kind\":\"" + to_string(r.kind) + "\",\"point\":";
    put(out, r.point);
    out += ",\"normal\":";
    put(out, r.normal);
    out += ",\"gap\":";
    put(out, r.gap);
    out += ",\"free_rate\":";
    put(out, r.free_rate);
    out += ",\"bias\":";
    put(out, r.bias);
    out += ",\"growth\":";
    put(out, r.growth);
    out += ",\"rhs\":";
    put(out, r.rhs);
    out += ",\"mu\":";
    put(out, r.mu);
    out += '}';
  });
  // omega is zero past its last nonzero cell; only the prefix is stored.
  std::size_t support = f.omega.size();
  while (support > 0 && f.omega[support - 1].isZero(0.0)) --support;
  out += ",\"omega\":[";
  for (std::size_t i = 0; i < support; ++i) {
    if (i) out += ',';
    put(out, f.omega[i]);
  }
  out += "],\"energy\":";
  put(out, f.energy);
  out += ",\"min_gap\":";
  put(out, f.min_gap);
  out += ",\"normal_rate_residual\":";
  put(out, f.normal_rate_residual);
  out += ",\"degenerate\":";
  out += f.degenerate ? "true" : "false";
  out += '}';
  return out;
}

Frame frame_from_json(const json& d) {
  try {
    Frame f;
    f.t = d.at("t").get<double>();
    f.tip = d.at("tip").get<std::size_t>();
    f.ds = d.at("ds").get<double>();
    for (const auto& v : d.at("gamma")) f.gamma.push_back(vec(v));
    for (const auto& v : d.at("k")) f.k.push_back(vec(v));
    for (const auto& j : d.at("contacts")) f.contacts.push_back(j.get<std::size_t>());
    for (const auto& r : d.at("rows")) {
      RowRecord rec;
      rec.node = r.at("node").get<std::size_t>();
      rec.kind = row_kind(r.at("kind").get<std::string>());
      rec.point = vec(r.at("point"));
      rec.normal = vec(r.at("normal"));
      rec.gap = r.at("gap").get<double>();
      rec.free_rate = r.at("free_rate").get<double>();
      rec.bias = r.at("bias").get<double>();
      rec.growth = r.at("growth").get<double>();
      rec.rhs = r.at("rhs").get<double>();
      rec.mu = r.at("mu").get<double>();
      f.rows.push_back(rec);
    }
    f.omega.assign(f.tip, Vec3::Zero());
    const json& om = d.at("omega");
    if (om.size() > f.tip) throw Error(ErrorKind::ParseError, "omega longer than the grown stem");
    for (std::size_t i = 0; i < om.size(); ++i) f.omega[i] = vec(om[i]);
    f.energy = d.at("energy").get<double>();
    f.min_gap = d.at("min_gap").get<double>();
    f.normal_rate_residual = d.at("normal_rate_residual").get<double>();
    f.degenerate = d.at("degenerate").get<bool>();
    return f;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed frame: ") + e.what());
  }
}

std::string event_to_json(const Event& e) {
  std::string out = "{\"kind\":\"";
  out += to_string(e.kind);
  out += "\",\"t\":";
  put(out, e.t);
  out += ",\"nodes\":";
  put_list(out, e.nodes, [&](std::size_t j) { out += std::to_string(j); });
  out += ",\"detail\":";
  put_string(out, e.detail);
  out += ",\"diagnostics\":{";
  for (std::size_t i = 0; i < e.diagnostics.size(); ++i) {
    if (i) out += ',';
    put_string(out, e.diagnostics[i].first);
    out += ':';
    put(out, e.diagnostics[i].second);
  }
  out += "}}";
  return out;
}

RunResult run_scenario(const SimConfig& config, const fs::path& out) {
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(out);
  std::ofstream frames = open_out(out / "frames.jsonl");
  std::ofstream events = open_out(out / "events.jsonl");

  RunResult result;
  Simulation sim(config);
  std::size_t count = 0;
  while (!sim.finished()) {
    StepResult r = sim.step();
    if (sim.finished() || count % config.stride == 0) {
      const AuditReport audit = audit_snapshot(r.frame.gamma, r.frame.k, r.frame.ds, config.scene, config.tol);
      if (!audit.ok()) {
        Event e;
        e.kind = EventKind::IntegrityFailure;
        e.t = r.frame.t;
        e.detail = "frame audit: " + audit.failures.front();
        r.events.push_back(e);
        result.terminal = EventKind::IntegrityFailure;
      }
      frames << frame_to_json(r.frame) << '\n';
      ++result.frames;
    }
    ++count;
    for (auto& e : r.events) {
      log(e.kind == EventKind::ContactOnset || e.kind == EventKind::ContactRelease ? 2 : 1,
          std::string(to_string(e.kind)) + " at t=" + std::to_string(e.t) + (e.detail.empty() ? "" : ": " + e.detail));
      events << event_to_json(e) << '\n';
      result.events.push_back(std::move(e));
    }
    if (result.terminal == EventKind::IntegrityFailure) break;
  }
  if (result.terminal != EventKind::IntegrityFailure) result.terminal = sim.terminal();
  result.exit_status = exit_code(result.terminal);
  if (!frames || !events) throw Error(ErrorKind::IoError, "failed writing to " + out.string());

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest = {{"tool_version", kToolVersion},
                   {"config", config_to_json(config)},
                   {"created_utc", utc_now()},
                   {"wall_seconds", wall},
                   {"outputs", {{"frames", "frames.jsonl"}, {"events", "events.jsonl"}}},
                   {"frames", result.frames},
                   {"terminal", to_string(result.terminal)},
                   {"exit_status", result.exit_status}};
  open_out(out / "manifest.json") << manifest.dump(2) << '\n';
  log(1, "wrote " + std::to_string(result.frames) + " frames to " + out.string());
  return result;
}

Perturbation parse_perturbation(const std::string& text) {
  Perturbation p;
  const auto bad = [&] { return Error(ErrorKind::ValidationError, "perturb: expected tilt:<delta>[:ax,ay,az], got '" + text + "'"); };
  if (text.rfind("tilt:", 0) != 0) throw bad();
  const std::string rest = text.substr(5);
  const auto colon = rest.find(':');
  try {
    std::size_t used = 0;
    const std::string angle = rest.substr(0, colon);
    p.angle = std::stod(angle, &used);
    if (used != angle.size()) throw bad();
    if (colon != std::string::npos) {
      std::stringstream ss(rest.substr(colon + 1));
      std::string part;
      for (int i = 0; i < 3; ++i) {
        if (!std::getline(ss, part, ',')) throw bad();
        p.axis[i] = std::stod(part, &used);
        if (used != part.size()) throw bad();
      }
      if (std::getline(ss, part, ',')) throw bad();
    }
  } catch (const std::logic_error&) {
    throw bad();
  }
  if (!std::isfinite(p.angle) || !(p.axis.norm() > 0.0)) throw bad();
  p.axis.normalize();
  return p;
}

SimConfig perturbed(const SimConfig& config, const Perturbation& p) {
  SimConfig c = config;
  if (p.angle != 0.0) c.seed.orientation = rodrigues(p.angle * p.axis) * config.seed.orientation;
  return c;
}

TwinResult twin_run(const SimConfig& config, const Perturbation& p, const fs::path& out) {
  const SimConfig other = perturbed(config, p);
  Simulation a(config);
  Simulation b(other);
  if (!(a.state().grid == b.state().grid) || a.state().tip != b.state().tip) {
    throw Error(ErrorKind::GridMismatch, "perturbation changes the grid");
  }
  TwinResult r;
  const WeightedNorm norm{config.law.beta};
  // A terminal step leaves the state in place, so the last sample is the final state.
  while (!a.finished() && !b.finished()) {
    r.t.push_back(a.state().time());
    r.distance.push_back(weighted_norm(rotation_field(a.state(), b.state()), norm));
    a.step();
    b.step();
  }
  r.terminal_a = a.terminal();
  r.terminal_b = b.terminal();
  try {
    r.certificate = gronwall_certificate(r.distance, config.dt);
    r.has_certificate = true;
  } catch (const Error& e) {
    r.certificate_note = e.kind() == ErrorKind::NonPositiveDistance ? "exact coincidence" : e.what();
  }

  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream d = open_out(out / "distances.jsonl");
    for (std::size_t i = 0; i < r.t.size(); ++i) {
      std::string line = "{\"t\":";
      put(line, r.t[i]);
      line += ",\"distance\":";
      put(line, r.distance[i]);
      d << line << "}\n";
    }
    json summary = {{"tool_version", kToolVersion},
                    {"config", config_to_json(config)},
                    {"perturbation", {{"kind", "tilt"}, {"angle", p.angle}, {"axis", {p.axis.x(), p.axis.y(), p.axis.z()}}}},
                    {"samples", r.distance.size()},
                    {"initial_distance", r.distance.front()},
                    {"terminal_distance", r.distance.back()},
                    {"terminal_base", to_string(r.terminal_a)},
                    {"terminal_perturbed", to_string(r.terminal_b)}};
    if (r.has_certificate) {
      summary["gronwall"] = {{"rate", r.certificate.rate}, {"max_step_log_rate", r.certificate.max_step_log_rate}};
    } else {
      summary["gronwall"] = {{"note", r.certificate_note}};
    }
    open_out(out / "twin_summary.json") << summary.dump(2) << '\n';
  }
  return r;
}

AuditSummary audit_frames(const fs::path& frames) {
  const SimConfig config = manifest_config(frames);
  AuditSummary s;
  double last_t = -std::numeric_limits<double>::infinity();
  s.frames = for_each_frame(frames, [&](std::size_t n, const Frame& f) {
    const std::string at = "frame " + std::to_string(n) + " (t=" + std::to_string(f.t) + "): ";
    const AuditReport r = audit_snapshot(f.gamma, f.k, f.ds, config.scene, config.tol);
    for (const auto& msg : r.failures) s.failures.push_back(at + msg);
    if (f.gamma.size() != f.tip + 1) s.failures.push_back(at + "node count differs from tip + 1");
    if (f.t != static_cast<double>(f.tip) * f.ds) s.failures.push_back(at + "grown length differs from t");
    if (!(f.t > last_t)) s.failures.push_back(at + "time does not increase");
    last_t = f.t;
    bool any_mu = false;
    for (const auto& row : f.rows) any_mu = any_mu || row.mu > 0.0;
    if (!any_mu) {
      bool zero = f.energy == 0.0;
      for (const auto& w : f.omega) zero = zero && w.isZero(0.0);
      if (!zero) s.failures.push_back(at + "reaction without active contacts");
    }
    for (const auto& row : f.rows) {
      if (row.mu < 0.0) s.failures.push_back(at + "negative multiplier at node " + std::to_string(row.node));
    }
  });
  return s;
}

OracleSummary oracle_check(const fs::path& frames) {
  const SimConfig config = manifest_config(frames);
  OracleSummary s;
  s.frames = for_each_frame(frames, [&](std::size_t n, const Frame& f) {
    if (f.rows.empty()) return;
    if (f.rows.size() > 12) {
      ++s.skipped;
      return;
    }
    const std::string at = "frame " + std::to_string(n) + " (t=" + std::to_string(f.t) + "): ";
    const ConstraintSystem sys = system_from_frame(f, config.law);
    ReactionSolution ref;
    try {
      ref = oracle_solve_reaction(sys);
    } catch (const Error& e) {
      s.failures.push_back(at + e.what());
      return;
    }
    ++s.checked;
    double ref_norm = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < sys.cells; ++i) {
      ref_norm += ref.omega[i].squaredNorm();
      diff += (ref.omega[i] - f.omega[i]).squaredNorm();
    }
    const double err = std::sqrt(diff) / (1.0 + std::sqrt(ref_norm));
    s.max_omega_error = std::max(s.max_omega_error, err);
    if (err > 1e-8) s.failures.push_back(at + "omega differs from the oracle by " + std::to_string(err));
    if (!f.degenerate) {
      double mu_err = 0.0;
      for (std::size_t j = 0; j < f.rows.size(); ++j) {
        mu_err = std::max(mu_err, std::abs(f.rows[j].mu - ref.mu[j]) / (1.0 + std::abs(ref.mu[j])));
      }
      s.max_mu_error = std::max(s.max_mu_error, mu_err);
      if (mu_err > 1e-6) s.failures.push_back(at + "multipliers differ from the oracle by " + std::to_string(mu_err));
    }
  });
  return s;
}

}  // namespace stemgrow
