#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stemgrow/error.hpp"
#include "stemgrow/scenario.hpp"

using namespace stemgrow;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kScenarios = STEMGROW_SCENARIO_DIR;
const fs::path kWork = STEMGROW_WORK_DIR;

json minimal() {
  return json::parse(R"({
    "scene": {"obstacles": []},
    "law": {"kind": "zero"},
    "seed_curve": {"kind": "segment", "direction": [0, 0, 1], "length": 0.1},
    "numerics": {"dt": 0.01, "horizon": 1.0}
  })");
}

fs::path write(const std::string& name, const json& doc) {
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p) << doc.dump(2);
  return p;
}

std::string error_of(auto&& f, ErrorKind expected) {
  try {
    f();
  } catch (const Error& e) {
    CHECK(e.kind() == expected);
    return e.what();
  }
  FAIL("no error thrown");
  return {};
}

}  // namespace

TEST_CASE("load_config: minimal config fills defaults") {
  const SimConfig c = load_config(write("minimal.json", minimal()));
  CHECK(c.dt == 0.01);
  CHECK(c.kappa == 0.2);
  CHECK(c.tol.contact == doctest::Approx(1e-5));
  CHECK(c.tol.penetration == doctest::Approx(5e-4));
  CHECK(c.stride == 1);
  CHECK(c.law.kind == LawKind::Zero);
}

TEST_CASE("load_config: errors name the field") {
  json zero_dt = minimal();
  zero_dt["numerics"]["dt"] = 0.0;
  CHECK(error_of([&] { load_config(write("zero_dt.json", zero_dt)); }, ErrorKind::ValidationError).find("dt") !=
        std::string::npos);

  json unknown = minimal();
  unknown["law"]["gian"] = 1.0;
  CHECK(error_of([&] { load_config(write("unknown.json", unknown)); }, ErrorKind::ValidationError).find("gian") !=
        std::string::npos);

  json dip = minimal();
  dip["seed_curve"]["length"] = 0.5;
  dip["scene"]["obstacles"] = json::parse(R"([{"type": "sphere", "center": [0.1, 0, 0.3], "radius": 0.2}])");
  CHECK(error_of([&] { load_config(write("dip.json", dip)); }, ErrorKind::ValidationError).find("non-penetration") !=
        std::string::npos);

  fs::create_directories(kWork);
  std::ofstream(kWork / "broken.json") << "{\"scene\": ";
  error_of([&] { load_config(kWork / "broken.json"); }, ErrorKind::ParseError);
  error_of([&] { load_config(kWork / "missing.json"); }, ErrorKind::IoError);
}

TEST_CASE("config round trip") {
  for (const char* name : {"straight.json", "ceiling.json", "oblique.json", "sphere_twin.json"}) {
    const SimConfig c = load_config(kScenarios / name);
    const json doc = config_to_json(c);
    CHECK(config_to_json(config_from_json(doc)) == doc);
  }
}

TEST_CASE("frame json round trip") {
  SimConfig c = load_config(kScenarios / "ceiling.json");
  c.horizon = 3.0;
  const Trajectory tr = run(c);
  std::size_t with_rows = 0;
  for (const Frame& f : tr.frames) {
    const std::string line = frame_to_json(f);
    const Frame g = frame_from_json(json::parse(line));
    CHECK(frame_to_json(g) == line);
    if (!f.rows.empty()) ++with_rows;
  }
  CHECK(with_rows > 0);
}

TEST_CASE("run_scenario exit codes") {
  const RunResult straight = run_scenario(load_config(kScenarios / "straight.json"), kWork / "straight");
  CHECK(straight.exit_status == 0);
  CHECK(straight.frames == 91);
  CHECK(fs::exists(kWork / "straight" / "manifest.json"));

  const RunResult perp = run_scenario(load_config(kScenarios / "perpendicular.json"), kWork / "perpendicular");
  CHECK(perp.exit_status == 10);
  CHECK(perp.terminal == EventKind::Breakdown);

  // One step is half the obstacle's size: the tip row cannot keep the stem out.
  json huge = json::parse(R"({
    "scene": {"obstacles": [{"type": "sphere", "center": [0.3, 0, 1.0], "radius": 0.35}]},
    "law": {"kind": "gravitropic", "beta": 0.5, "gain": 8.0},
    "seed_curve": {"kind": "segment", "direction": [1, 0, 0.2], "length": 0.5},
    "numerics": {"dt": 0.5, "horizon": 3.0}
  })");
  const RunResult bad = run_scenario(load_config(write("huge_dt.json", huge)), kWork / "huge_dt");
  CHECK(bad.exit_status == 20);
  CHECK(bad.terminal == EventKind::IntegrityFailure);
}

TEST_CASE("audit and oracle-check accept a fresh run") {
  SimConfig c = load_config(kScenarios / "oblique.json");
  run_scenario(c, kWork / "oblique");
  const AuditSummary a = audit_frames(kWork / "oblique");
  CHECK(a.ok());
  CHECK(a.frames > 0);
  const OracleSummary o = oracle_check(kWork / "oblique" / "frames.jsonl");
  CHECK(o.ok());
  CHECK(o.checked > 0);
}

TEST_CASE("twin runs") {
  const SimConfig c = load_config(kScenarios / "free_growth.json");
  const TwinResult same = twin_run(c, parse_perturbation("tilt:0"));
  for (double d : same.distance) CHECK(d == 0.0);

  const TwinResult tilted = twin_run(c, parse_perturbation("tilt:1e-3"), kWork / "twin");
  CHECK(tilted.has_certificate);
  CHECK(std::isfinite(tilted.certificate.rate));
  for (std::size_t i = 0; i < tilted.distance.size(); ++i)
    CHECK(tilted.distance[i] <= tilted.distance.front() * std::exp(tilted.certificate.rate * tilted.t[i]) * (1 + 1e-8));
  CHECK(fs::exists(kWork / "twin" / "distances.jsonl"));

  const Perturbation p = parse_perturbation("tilt:0.01:1,0,0");
  CHECK(p.angle == 0.01);
  CHECK((p.axis - Vec3::UnitX()).norm() == 0.0);
  error_of([] { parse_perturbation("shear:1"); }, ErrorKind::ValidationError);
}
