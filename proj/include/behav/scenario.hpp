#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "behav/errors.hpp"
#include "behav/gateway.hpp"
#include "behav/geometry.hpp"
#include "behav/instruction.hpp"
#include "behav/metrics.hpp"
#include "behav/planner.hpp"
#include "behav/simulator.hpp"

namespace behav {

struct PerceptionConfig {
  double blur_sigma = 1.0;
  double noise_amp = 0.0;
  double landmark_noise_px = 0.0;
  double landmark_period_s = 2.0;
  double landmark_latency_s = 0.0;
  double default_range = 10.0;
  int lidar_beams = 360;
  double lidar_max_range = 10.0;
};

// Which implementation serves each backend channel: "oracle" uses simulator
// ground truth (perception) or the built-in grammar and table (language);
// "replay", "record" and "live" go through the model gateway.
struct BackendSelection {
  std::string language = "oracle";
  std::string perception = "oracle";
  std::optional<ModelConfig> llm;
  std::optional<ModelConfig> vlm;
  std::optional<BackendEndpoint> segmentation;
  bool allow_fallback = true;
};

struct Seeds {
  std::uint64_t sim = 0;
  std::uint64_t optimizer = 0;
  std::uint64_t noise = 0;
};

struct ScenarioConfig {
  std::string name;
  std::string instruction;
  PromptSet prompts;
  DesirabilityTable desirability_table;
  CameraModel camera;
  World world;
  Pose2D start;
  double robot_radius = 0.3;
  PlannerConfig planner;
  ParamBounds bounds;
  PerceptionConfig perception;
  BackendSelection backends;
  Seeds seeds;
  double timeout_s = 60.0;
  PathPolyline reference_path;
  MetricsConfig metrics;
  std::string config_digest;
  nlohmann::json effective;  // the document after overrides
};

namespace detail {

// Strict object reader: every key must be consumed, or the document is
// rejected.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("expected an object");
  }

  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, _] : j_.items())
      if (!used_.count(k)) fail("unknown field '" + k + "'");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw InvalidScenario((where_.empty() ? std::string("scenario") : where_) + ": " + msg);
  }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const nlohmann::json& get(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) fail("missing field '" + key + "'");
    return j_.at(key);
  }

  const nlohmann::json* opt(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return nullptr;
    return &j_.at(key);
  }

  double number(const std::string& key) {
    const auto& v = get(key);
    if (!v.is_number()) fail("'" + key + "' must be a number");
    return v.get<double>();
  }
  void number(const std::string& key, double& out) {
    if (auto* v = opt(key)) {
      if (!v->is_number()) fail("'" + key + "' must be a number");
      out = v->get<double>();
    }
  }
  void integer(const std::string& key, int& out) {
    if (auto* v = opt(key)) {
      if (!v->is_number_integer()) fail("'" + key + "' must be an integer");
      out = v->get<int>();
    }
  }
  void u64(const std::string& key, std::uint64_t& out) {
    const auto& v = get(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      fail("'" + key + "' must be a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  std::string string(const std::string& key) {
    const auto& v = get(key);
    if (!v.is_string()) fail("'" + key + "' must be a string");
    return v.get<std::string>();
  }
  void string(const std::string& key, std::string& out) {
    if (auto* v = opt(key)) {
      if (!v->is_string()) fail("'" + key + "' must be a string");
      out = v->get<std::string>();
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (auto* v = opt(key)) {
      if (!v->is_boolean()) fail("'" + key + "' must be a boolean");
      out = v->get<bool>();
    }
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> used_;
};

inline std::vector<double> numbers(const nlohmann::json& j, const std::string& where, std::size_t n = 0) {
  if (!j.is_array()) throw InvalidScenario(where + ": expected an array");
  if (n && j.size() != n) throw InvalidScenario(where + ": expected " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw InvalidScenario(where + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

inline Point2 point(const nlohmann::json& j, const std::string& where) {
  const auto v = numbers(j, where, 2);
  return {v[0], v[1]};
}

inline Polygon polygon(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() < 3) throw InvalidScenario(where + ": polygon needs >= 3 points");
  Polygon p;
  for (std::size_t i = 0; i < j.size(); ++i) p.push_back(point(j[i], where + "[" + std::to_string(i) + "]"));
  return p;
}

inline Box2 box(const nlohmann::json& j, const std::string& where) {
  const auto v = numbers(j, where, 4);
  if (!(v[0] <= v[2] && v[1] <= v[3])) throw InvalidScenario(where + ": box min > max");
  return {v[0], v[1], v[2], v[3]};
}

inline Pose2D pose(const nlohmann::json& j, const std::string& where) {
  const auto v = numbers(j, where, 3);
  return make_pose(v[0], v[1], v[2]);
}

inline CameraModel parse_camera(const nlohmann::json& j) {
  ObjectReader r(j, "camera");
  CameraModel c;
  r.number("fx", c.fx);
  r.number("fy", c.fy);
  r.number("cx", c.cx);
  r.number("cy", c.cy);
  r.integer("width", c.width);
  r.integer("height", c.height);
  r.number("mount_height", c.mount_height);
  r.number("mount_pitch", c.mount_pitch);
  r.number("mount_offset", c.mount_offset);
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw InvalidScenario(e.what());
  }
  return c;
}

inline ActorKind parse_actor_kind(const std::string& s, const std::string& where) {
  if (s == "pedestrian") return ActorKind::pedestrian;
  if (s == "sign") return ActorKind::sign;
  if (s == "gesture") return ActorKind::gesture;
  throw InvalidScenario(where + ": unknown actor kind '" + s + "'");
}

inline World parse_world(const nlohmann::json& j) {
  ObjectReader r(j, "world");
  World w;
  if (auto* b = r.opt("bounds")) w.bounds = box(*b, "world.bounds");
  r.string("default_label", w.default_label);
  if (auto* regions = r.opt("regions")) {
    if (!regions->is_array()) r.fail("'regions' must be an array");
    for (std::size_t i = 0; i < regions->size(); ++i) {
      const std::string where = "world.regions[" + std::to_string(i) + "]";
      ObjectReader rr((*regions)[i], where);
      TerrainRegion t;
      t.label = rr.string("label");
      t.polygon = polygon(rr.get("polygon"), where + ".polygon");
      rr.integer("order", t.order);
      w.terrain_regions.push_back(std::move(t));
    }
  }
  if (auto* obstacles = r.opt("obstacles")) {
    if (!obstacles->is_array()) r.fail("'obstacles' must be an array");
    for (std::size_t i = 0; i < obstacles->size(); ++i) {
      const std::string where = "world.obstacles[" + std::to_string(i) + "]";
      ObjectReader ro((*obstacles)[i], where);
      if (ro.has("polygon")) {
        w.obstacles.push_back(Obstacle::make_polygon(polygon(ro.get("polygon"), where + ".polygon")));
      } else {
        const Point2 c = point(ro.get("center"), where + ".center");
        w.obstacles.push_back(Obstacle::circle(c, ro.number("radius")));
      }
    }
  }
  if (auto* actors = r.opt("actors")) {
    if (!actors->is_array()) r.fail("'actors' must be an array");
    for (std::size_t i = 0; i < actors->size(); ++i) {
      const std::string where = "world.actors[" + std::to_string(i) + "]";
      ObjectReader ra((*actors)[i], where);
      ScriptedActor a;
      std::string kind = "pedestrian";
      ra.string("kind", kind);
      a.kind = parse_actor_kind(kind, where);
      a.label = ra.string("label");
      const auto& wps = ra.get("waypoints");
      if (!wps.is_array() || wps.empty()) ra.fail("'waypoints' must be a non-empty array");
      for (std::size_t k = 0; k < wps.size(); ++k) {
        const auto v = numbers(wps[k], where + ".waypoints[" + std::to_string(k) + "]", 3);
        a.waypoints.push_back({v[0], {v[1], v[2]}});
      }
      if (auto* act = ra.opt("active")) {
        const auto v = numbers(*act, where + ".active", 2);
        a.t_start = v[0];
        a.t_end = v[1];
      }
      ra.number("radius", a.footprint_radius);
      w.actors.push_back(std::move(a));
    }
  }
  if (auto* lms = r.opt("landmarks")) {
    if (!lms->is_array()) r.fail("'landmarks' must be an array");
    for (std::size_t i = 0; i < lms->size(); ++i) {
      const std::string where = "world.landmarks[" + std::to_string(i) + "]";
      ObjectReader rl((*lms)[i], where);
      Landmark l;
      l.text = rl.string("text");
      l.position = point(rl.get("position"), where + ".position");
      if (auto* fp = rl.opt("footprint")) l.footprint = box(*fp, where + ".footprint");
      else l.footprint = {l.position.x - 0.25, l.position.y - 0.25, l.position.x + 0.25, l.position.y + 0.25};
      w.landmarks.push_back(std::move(l));
    }
  }
  try {
    w.finalize();
  } catch (const InvalidArgument& e) {
    throw InvalidScenario(std::string("world: ") + e.what());
  }
  return w;
}

inline void parse_planner(const nlohmann::json& j, PlannerConfig& p) {
  ObjectReader r(j, "planner");
  r.number("k1", p.k1);
  r.number("k2", p.k2);
  r.integer("horizon_steps", p.horizon_steps);
  r.number("dt", p.dt);
  r.number("lambda", p.lambda);
  r.number("d_safe", p.d_safe);
  r.number("c_th", p.c_th);
  r.number("d_th", p.d_th);
  r.number("w_goal", p.w_goal);
  r.number("w_obs", p.w_obs);
  r.number("w_behav", p.w_behav);
  r.integer("budget", p.budget);
  r.number("arrival_tolerance", p.arrival_tolerance);
  r.number("obstacle_cost_clamp", p.obstacle_cost_clamp);
  std::string agg = "sum";
  r.string("behav_aggregate", agg);
  if (agg == "sum") p.behav_aggregate = BehaviorAggregate::sum;
  else if (agg == "max") p.behav_aggregate = BehaviorAggregate::max;
  else r.fail("behav_aggregate must be 'sum' or 'max'");
  if (auto* roi = r.opt("cap_roi")) {
    const auto v = numbers(*roi, "planner.cap_roi", 4);
    p.cap_roi = PixelRect{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]),
                          static_cast<int>(v[3])};
  }
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw InvalidScenario(e.what());
  }
}

inline ParamBounds parse_bounds(const nlohmann::json& j) {
  ObjectReader r(j, "bounds");
  ParamBounds b;
  auto range = [&](const char* key, double& lo, double& hi) {
    if (auto* v = r.opt(key)) {
      const auto n = numbers(*v, std::string("bounds.") + key, 2);
      lo = n[0];
      hi = n[1];
    }
  };
  range("r", b.lower.r, b.upper.r);
  range("theta", b.lower.theta, b.upper.theta);
  range("delta", b.lower.delta, b.upper.delta);
  range("v_max", b.lower.v_max, b.upper.v_max);
  try {
    b.validate();
  } catch (const InvalidArgument& e) {
    throw InvalidScenario(e.what());
  }
  if (b.lower.r <= 1e-6) throw InvalidScenario("bounds: r lower bound must be positive");
  return b;
}

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return p;
  const std::filesystem::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

inline BackendEndpoint parse_endpoint(ObjectReader& r, const std::filesystem::path& base) {
  BackendEndpoint ep;
  r.string("url", ep.url);
  r.string("token_env", ep.token_env);
  r.number("timeout_s", ep.timeout_s);
  r.integer("retries", ep.retries);
  std::string fixture;
  r.string("fixture", fixture);
  ep.fixture_path = resolve(base, fixture);
  return ep;
}

inline ModelConfig parse_model(const nlohmann::json& j, const std::string& where,
                               const std::filesystem::path& base) {
  ObjectReader r(j, where);
  ModelConfig m;
  m.endpoint = parse_endpoint(r, base);
  std::string provider = "chat";
  r.string("provider", provider);
  try {
    m.provider = parse_provider(provider);
  } catch (const InvalidArgument& e) {
    r.fail(e.what());
  }
  r.string("model", m.model);
  return m;
}

inline BackendSelection parse_backends(const nlohmann::json& j, const std::filesystem::path& base) {
  ObjectReader r(j, "backends");
  BackendSelection b;
  r.string("language", b.language);
  r.string("perception", b.perception);
  for (const auto* mode : {&b.language, &b.perception})
    if (*mode != "oracle" && *mode != "replay" && *mode != "record" && *mode != "live")
      r.fail("backend mode must be oracle, replay, record or live, got '" + *mode + "'");
  if (auto* v = r.opt("llm")) b.llm = parse_model(*v, "backends.llm", base);
  if (auto* v = r.opt("vlm")) b.vlm = parse_model(*v, "backends.vlm", base);
  if (auto* v = r.opt("segmentation")) {
    ObjectReader rs(*v, "backends.segmentation");
    b.segmentation = parse_endpoint(rs, base);
  }
  r.boolean("allow_fallback", b.allow_fallback);
  return b;
}

}  // namespace detail

// Sets a value at a dotted path ("planner.w_behav", "world.actors.0.radius").
// The value is parsed as JSON when possible, else taken as a string.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InvalidScenario("override needs key=value: " + assignment);
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  auto value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw InvalidScenario("override has an empty path segment: " + key);
    nlohmann::json* next = nullptr;
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(part);
      } catch (const std::exception&) {
        throw InvalidScenario("override: '" + part + "' is not an array index");
      }
      if (idx >= node->size()) throw InvalidScenario("override: index " + part + " out of range");
      next = &(*node)[idx];
    } else {
      if (node->is_null()) *node = nlohmann::json::object();
      if (!node->is_object()) throw InvalidScenario("override: '" + part + "' is not inside an object");
      next = &(*node)[part];
    }
    if (dot == std::string::npos) {
      *next = value;
      return;
    }
    node = next;
    start = dot + 1;
  }
}

// Parses a scenario document. Relative paths resolve against `base_dir`.
inline ScenarioConfig parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  using namespace detail;
  ScenarioConfig s;
  s.effective = doc;
  {
    ObjectReader r(doc, "");
    const auto& version = r.get("version");
    if (!version.is_number_integer() || version.get<int>() != 1) r.fail("unsupported version");
    s.name = r.string("name");
    s.instruction = r.string("instruction");
    s.prompts.instruction = s.instruction;

    const auto& prompts = r.get("prompts");
    {
      ObjectReader rp(prompts, "prompts");
      try {
        s.prompts.decompose_prompt = read_text_file(resolve(base_dir, rp.string("decompose")));
        s.prompts.action_prompt = read_text_file(resolve(base_dir, rp.string("action")));
        s.prompts.frontier_prompt = read_text_file(resolve(base_dir, rp.string("frontier")));
      } catch (const InvalidArgument& e) {
        rp.fail(e.what());
      }
    }
    if (auto* t = r.opt("desirability_table")) {
      ObjectReader rt(*t, "desirability_table");
      if (auto* e = rt.opt("entries")) {
        if (!e->is_object()) rt.fail("'entries' must be an object");
        for (const auto& [k, v] : e->items())
          if (!v.is_number()) rt.fail("entry '" + k + "' must be a number");
      }
      rt.opt("unknown");
      s.desirability_table = DesirabilityTable::from_json(*t);
    }

    s.camera = parse_camera(r.get("camera"));
    s.world = parse_world(r.get("world"));
    {
      ObjectReader rr(r.get("robot"), "robot");
      s.start = pose(rr.get("start"), "robot.start");
      rr.number("radius", s.robot_radius);
    }
    if (auto* p = r.opt("planner")) parse_planner(*p, s.planner);
    if (auto* b = r.opt("bounds")) s.bounds = parse_bounds(*b);
    if (auto* p = r.opt("perception")) {
      ObjectReader rp(*p, "perception");
      auto& pc = s.perception;
      rp.number("blur_sigma", pc.blur_sigma);
      rp.number("noise_amp", pc.noise_amp);
      rp.number("landmark_noise_px", pc.landmark_noise_px);
      rp.number("landmark_period_s", pc.landmark_period_s);
      rp.number("landmark_latency_s", pc.landmark_latency_s);
      rp.number("default_range", pc.default_range);
      rp.integer("lidar_beams", pc.lidar_beams);
      rp.number("lidar_max_range", pc.lidar_max_range);
      if (!(pc.landmark_period_s > 0)) rp.fail("landmark_period_s must be positive");
      if (pc.lidar_beams < 1) rp.fail("lidar_beams must be >= 1");
    }
    if (auto* b = r.opt("backends")) s.backends = parse_backends(*b, base_dir);
    {
      ObjectReader rs(r.get("seeds"), "seeds");
      rs.u64("sim", s.seeds.sim);
      rs.u64("optimizer", s.seeds.optimizer);
      rs.u64("noise", s.seeds.noise);
    }
    s.timeout_s = r.number("timeout_s");
    if (!(s.timeout_s > 0)) r.fail("timeout_s must be positive");
    if (auto* ref = r.opt("reference_path")) {
      if (!ref->is_array()) r.fail("'reference_path' must be an array");
      for (std::size_t i = 0; i < ref->size(); ++i)
        s.reference_path.push_back(point((*ref)[i], "reference_path[" + std::to_string(i) + "]"));
    }
    if (auto* m = r.opt("metrics")) {
      ObjectReader rm(*m, "metrics");
      rm.number("u_threshold", s.metrics.u_threshold);
      rm.number("violation_u", s.metrics.violation_u);
      rm.number("stop_speed", s.metrics.stop_speed);
      rm.number("resample_spacing", s.metrics.resample_spacing);
    }
  }
  if (s.world.landmarks.empty()) throw InvalidScenario("world: at least one landmark is required");
  s.config_digest = request_digest(doc);
  return s;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidScenario("cannot read " + path);
  const auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw InvalidScenario(path + ": not valid JSON");
  return doc;
}

inline ScenarioConfig load_scenario(const std::string& path, const std::vector<std::string>& overrides = {}) {
  auto doc = read_json_file(path);
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_scenario(doc, std::filesystem::path(path).parent_path());
}

}  // namespace behav
