#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include "stemgrow/error.hpp"
#include "stemgrow/scenario.hpp"

namespace stemgrow {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::ValidationError, field + ": " + what);
}

// Strict view of one JSON object; every lookup names its full path.
class Section {
 public:
  Section(const json& obj, std::string path, std::initializer_list<const char*> allowed) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) invalid(path_, "expected an object");
    for (const auto& [key, _] : obj_.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
        invalid(field(key), "unknown key");
      }
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const char* key) const { return obj_.contains(key); }
  const json& at(const char* key) const {
    if (!has(key)) invalid(field(key), "missing");
    return obj_.at(key);
  }

  double number(const char* key) const {
    const json& v = at(key);
    if (!v.is_number()) invalid(field(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) invalid(field(key), "must be finite");
    return x;
  }
  double number(const char* key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::string text(const char* key) const {
    const json& v = at(key);
    if (!v.is_string()) invalid(field(key), "expected a string");
    return v.get<std::string>();
  }

  Vec3 vec(const char* key) const { return to_vec(at(key), field(key)); }
  Vec3 vec(const char* key, const Vec3& fallback) const { return has(key) ? vec(key) : fallback; }

  static Vec3 to_vec(const json& v, const std::string& name) {
    if (!v.is_array() || v.size() != 3) invalid(name, "expected [x, y, z]");
    Vec3 out;
    for (int i = 0; i < 3; ++i) {
      if (!v[static_cast<std::size_t>(i)].is_number()) invalid(name, "expected [x, y, z]");
      out[i] = v[static_cast<std::size_t>(i)].get<double>();
      if (!std::isfinite(out[i])) invalid(name, "must be finite");
    }
    return out;
  }

 private:
  const json& obj_;
  std::string path_;
};

Vec3 unit(const Vec3& v, const std::string& name) {
  const double n = v.norm();
  if (!(n > 0.0)) invalid(name, "must be nonzero");
  return v / n;
}

Obstacle parse_obstacle(const json& doc, const std::string& path) {
  if (!doc.is_object() || !doc.contains("type") || !doc["type"].is_string()) invalid(path + ".type", "missing");
  const std::string type = doc["type"].get<std::string>();
  if (type == "sphere") {
    Section s(doc, path, {"type", "center", "radius"});
    return Sphere{s.vec("center"), s.number("radius")};
  }
  if (type == "half_space") {
    Section s(doc, path, {"type", "point", "outward_normal"});
    return HalfSpace{s.vec("point"), unit(s.vec("outward_normal"), s.field("outward_normal"))};
  }
  if (type == "cylinder") {
    Section s(doc, path, {"type", "axis_point", "axis_dir", "radius"});
    return Cylinder{s.vec("axis_point"), unit(s.vec("axis_dir"), s.field("axis_dir")), s.number("radius")};
  }
  invalid(path + ".type", "unknown obstacle type '" + type + "'");
}

Scene parse_scene(const json& doc) {
  Section s(doc, "scene", {"obstacles"});
  Scene scene;
  if (!s.has("obstacles")) return scene;
  const json& list = s.at("obstacles");
  if (!list.is_array()) invalid("scene.obstacles", "expected an array");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "scene.obstacles[" + std::to_string(i) + "]";
    Obstacle o = parse_obstacle(list[i], path);
    try {
      validate(o);
    } catch (const Error& e) {
      invalid(path, e.what());
    }
    scene.obstacles.push_back(o);
  }
  return scene;
}

GrowthLaw parse_law(const json& doc) {
  Section s(doc, "law", {"kind", "beta", "gain", "up", "table"});
  GrowthLaw law;
  const std::string kind = s.has("kind") ? s.text("kind") : "gravitropic";
  if (kind == "gravitropic") law.kind = LawKind::Gravitropic;
  else if (kind == "zero") law.kind = LawKind::Zero;
  else if (kind == "tabulated") law.kind = LawKind::Tabulated;
  else invalid("law.kind", "expected gravitropic, zero or tabulated");
  law.beta = s.number("beta", law.beta);
  law.gain = s.number("gain", law.gain);
  law.up = unit(s.vec("up", law.up), "law.up");
  if (s.has("table")) {
    const json& t = s.at("table");
    if (!t.is_array()) invalid("law.table", "expected [[age, coefficient], ...]");
    for (const auto& row : t) {
      if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number())
        invalid("law.table", "expected [[age, coefficient], ...]");
      law.table.emplace_back(row[0].get<double>(), row[1].get<double>());
    }
  }
  if (law.kind == LawKind::Tabulated && law.table.empty()) invalid("law.table", "required for the tabulated law");
  return law;
}

Mat3 parse_orientation(const json& v) {
  if (!v.is_array() || v.size() != 3) invalid("seed_curve.orientation", "expected a 3x3 row-major matrix");
  Mat3 m;
  for (int r = 0; r < 3; ++r) m.row(r) = Section::to_vec(v[static_cast<std::size_t>(r)], "seed_curve.orientation").transpose();
  return m;
}

SeedCurve parse_seed(const json& doc) {
  Section s(doc, "seed_curve",
            {"kind", "direction", "length", "radius", "bend", "points", "rotation", "orientation"});
  SeedCurve seed;
  const std::string kind = s.has("kind") ? s.text("kind") : "segment";
  if (kind == "segment") {
    seed.kind = SeedCurve::Kind::Segment;
  } else if (kind == "arc") {
    seed.kind = SeedCurve::Kind::Arc;
  } else if (kind == "polyline") {
    seed.kind = SeedCurve::Kind::Polyline;
  } else {
    invalid("seed_curve.kind", "expected segment, arc or polyline");
  }
  if (seed.kind == SeedCurve::Kind::Polyline) {
    const json& pts = s.at("points");
    if (!pts.is_array()) invalid("seed_curve.points", "expected an array of [x, y, z]");
    for (const auto& p : pts) seed.points.push_back(Section::to_vec(p, "seed_curve.points"));
  } else {
    seed.direction = unit(s.vec("direction", seed.direction), "seed_curve.direction");
    seed.length = s.number("length");
    if (seed.kind == SeedCurve::Kind::Arc) {
      seed.radius = s.number("radius");
      seed.bend = s.vec("bend", seed.bend);
    }
  }
  if (s.has("rotation") && s.has("orientation")) invalid("seed_curve.rotation", "give rotation or orientation, not both");
  if (s.has("rotation")) seed.orientation = rodrigues(s.vec("rotation"));
  if (s.has("orientation")) seed.orientation = parse_orientation(s.at("orientation"));
  return seed;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

SimConfig config_from_json(const json& doc) {
  Section top(doc, "", {"scene", "law", "seed_curve", "numerics", "output"});
  SimConfig c;
  const json empty = json::object();

  Section num(top.has("numerics") ? top.at("numerics") : empty, "numerics",
              {"dt", "ds", "horizon", "eps_contact", "eps_penetration", "eps_breakdown_angle",
               "eps_breakdown_curvature", "kappa"});
  c.dt = num.number("dt");
  if (!(c.dt > 0.0)) invalid("numerics.dt", "must be positive");
  if (num.has("ds") && num.number("ds") != c.dt) invalid("numerics.ds", "must equal numerics.dt");
  c.horizon = num.number("horizon");
  c.tol = Tolerances::defaults(c.dt);
  c.tol.contact = num.number("eps_contact", c.tol.contact);
  c.tol.penetration = num.number("eps_penetration", c.tol.penetration);
  c.tol.breakdown_angle = num.number("eps_breakdown_angle", c.tol.breakdown_angle);
  c.tol.breakdown_curvature = num.number("eps_breakdown_curvature", c.tol.breakdown_curvature);
  c.kappa = num.number("kappa", c.kappa);

  c.scene = top.has("scene") ? parse_scene(top.at("scene")) : Scene{};
  c.law = top.has("law") ? parse_law(top.at("law")) : GrowthLaw{};
  if (!top.has("seed_curve")) invalid("seed_curve", "missing");
  c.seed = parse_seed(top.at("seed_curve"));

  if (top.has("output")) {
    Section out(top.at("output"), "output", {"stride"});
    if (out.has("stride")) {
      const json& v = out.at("stride");
      if (!v.is_number_integer() || v.get<long long>() < 1) invalid("output.stride", "expected an integer >= 1");
      c.stride = v.get<std::size_t>();
    }
  }

  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ValidationError, e.what());
  }
  return c;
}

json config_to_json(const SimConfig& c) {
  json scene = json::array();
  for (const auto& o : c.scene.obstacles) {
    if (const auto* s = std::get_if<Sphere>(&o)) {
      scene.push_back({{"type", "sphere"}, {"center", vec_json(s->center)}, {"radius", s->radius}});
    } else if (const auto* h = std::get_if<HalfSpace>(&o)) {
      scene.push_back({{"type", "half_space"}, {"point", vec_json(h->point)}, {"outward_normal", vec_json(h->outward_normal)}});
    } else {
      const auto& y = std::get<Cylinder>(o);
      scene.push_back({{"type", "cylinder"},
                       {"axis_point", vec_json(y.axis_point)},
                       {"axis_dir", vec_json(y.axis_dir)},
                       {"radius", y.radius}});
    }
  }

  const char* kinds[] = {"gravitropic", "zero", "tabulated"};
  json law = {{"kind", kinds[static_cast<int>(c.law.kind)]},
              {"beta", c.law.beta},
              {"gain", c.law.gain},
              {"up", vec_json(c.law.up)}};
  if (!c.law.table.empty()) {
    json t = json::array();
    for (const auto& [a, v] : c.law.table) t.push_back({a, v});
    law["table"] = t;
  }

  json seed;
  switch (c.seed.kind) {
    case SeedCurve::Kind::Segment:
      seed = {{"kind", "segment"}, {"direction", vec_json(c.seed.direction)}, {"length", c.seed.length}};
      break;
    case SeedCurve::Kind::Arc:
      seed = {{"kind", "arc"},
              {"direction", vec_json(c.seed.direction)},
              {"length", c.seed.length},
              {"radius", c.seed.radius},
              {"bend", vec_json(c.seed.bend)}};
      break;
    case SeedCurve::Kind::Polyline: {
      json pts = json::array();
      for (const auto& p : c.seed.points) pts.push_back(vec_json(p));
      seed = {{"kind", "polyline"}, {"points", pts}};
      break;
    }
  }
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(vec_json(c.seed.orientation.row(r).transpose()));
  seed["orientation"] = rows;

  return {{"scene", {{"obstacles", scene}}},
          {"law", law},
          {"seed_curve", seed},
          {"numerics",
           {{"dt", c.dt},
            {"horizon", c.horizon},
            {"eps_contact", c.tol.contact},
            {"eps_penetration", c.tol.penetration},
            {"eps_breakdown_angle", c.tol.breakdown_angle},
            {"eps_breakdown_curvature", c.tol.breakdown_curvature},
            {"kappa", c.kappa}}},
          {"output", {{"stride", c.stride}}}};
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  if (doc.is_object() && doc.contains("config") && doc.contains("tool_version")) doc = doc["config"];
  SimConfig c = config_from_json(doc);
  try {
    init_state(c);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InitialPenetration) {
      throw Error(ErrorKind::ValidationError, std::string("seed_curve: violates non-penetration: ") + e.what());
    }
    if (e.kind() == ErrorKind::InitialBreakdown) {
      throw Error(ErrorKind::ValidationError, std::string("seed_curve: ") + e.what());
    }
    throw Error(ErrorKind::ValidationError, e.what());
  }
  return c;
}

}  // namespace stemgrow
