#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "behav/errors.hpp"
#include "behav/metrics.hpp"
#include "behav/text.hpp"

namespace behav {

// Run log: line-delimited JSON. First line {"type":"header",...}, then one
// {"type":"tick",...} per control tick, then {"type":"end",...}.

inline nlohmann::json header_to_json(const RunLog& log) {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : log.rules)
    rules.push_back({{"action", r.action},
                     {"target", r.target},
                     {"desirability", r.desirability},
                     {"undesirability", r.undesirability}});
  nlohmann::json ref = nlohmann::json::array();
  for (auto p : log.reference_path) ref.push_back({p.x, p.y});
  return {{"type", "header"},         {"version", 1},
          {"scenario", log.scenario}, {"config_digest", log.config_digest},
          {"rules", rules},           {"landmark_count", log.landmark_count},
          {"d_th", log.d_th},         {"timeout", log.timeout},
          {"dt", log.dt},             {"reference_path", ref},
          {"metrics",
           {{"u_threshold", log.metrics.u_threshold},
            {"violation_u", log.metrics.violation_u},
            {"stop_speed", log.metrics.stop_speed},
            {"resample_spacing", log.metrics.resample_spacing}}}};
}

inline nlohmann::json tick_to_json(const TickRecord& t) {
  nlohmann::json j{{"type", "tick"},
                   {"tick", t.tick},
                   {"t", t.t},
                   {"x", t.pose.x},
                   {"y", t.pose.y},
                   {"heading", t.pose.heading},
                   {"v", t.v},
                   {"omega", t.omega},
                   {"cost",
                    {{"goal", t.cost.goal},
                     {"obstacle", t.cost.obstacle},
                     {"behavior", t.cost.behavior},
                     {"total", t.cost.total}}},
                   {"max_c", t.max_c},
                   {"capped_v_max", t.capped_v_max},
                   {"gait_caution", t.gait_caution},
                   {"collision", t.collision},
                   {"stop_active", t.stop_active},
                   {"terrain", t.terrain},
                   {"landmark_index", t.landmark_index}};
  j["goal"] = t.goal ? nlohmann::json{t.goal->x, t.goal->y} : nlohmann::json(nullptr);
  return j;
}

class RunLogWriter {
 public:
  explicit RunLogWriter(std::ostream& out) : out_(out) {}

  void header(const RunLog& log) { out_ << header_to_json(log).dump() << '\n'; }
  void tick(const TickRecord& t) { out_ << tick_to_json(t).dump() << '\n'; }
  void end(const std::string& reason, std::size_t ticks) {
    out_ << nlohmann::json{{"type", "end"}, {"reason", reason}, {"ticks", ticks}}.dump() << '\n';
    out_.flush();
  }

 private:
  std::ostream& out_;
};

inline void write_run_log(std::ostream& out, const RunLog& log) {
  RunLogWriter w(out);
  w.header(log);
  for (const auto& t : log.ticks) w.tick(t);
  w.end(log.end_reason, log.ticks.size());
}

namespace detail {

template <class T>
T field(const nlohmann::json& j, const char* key, std::size_t lineno) {
  if (!j.contains(key)) throw CorruptLog("line " + std::to_string(lineno) + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw CorruptLog("line " + std::to_string(lineno) + ": bad '" + key + "'");
  }
}

}  // namespace detail

inline RunLog read_run_log(std::istream& in) {
  RunLog log;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false, have_end = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (have_end) {
      if (text::trim(line).empty()) continue;
      throw CorruptLog("line " + std::to_string(lineno) + ": data after end record");
    }
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw CorruptLog("line " + std::to_string(lineno) + ": not JSON");
    const auto type = detail::field<std::string>(j, "type", lineno);
    if (!have_header) {
      if (type != "header") throw CorruptLog("first record is not a header");
      have_header = true;
      log.scenario = detail::field<std::string>(j, "scenario", lineno);
      log.config_digest = detail::field<std::string>(j, "config_digest", lineno);
      log.landmark_count = detail::field<std::size_t>(j, "landmark_count", lineno);
      log.d_th = detail::field<double>(j, "d_th", lineno);
      log.timeout = detail::field<double>(j, "timeout", lineno);
      log.dt = detail::field<double>(j, "dt", lineno);
      for (const auto& r : detail::field<nlohmann::json>(j, "rules", lineno))
        log.rules.push_back({detail::field<std::string>(r, "action", lineno),
                             detail::field<std::string>(r, "target", lineno),
                             detail::field<double>(r, "desirability", lineno),
                             detail::field<double>(r, "undesirability", lineno)});
      for (const auto& p : detail::field<nlohmann::json>(j, "reference_path", lineno)) {
        if (!p.is_array() || p.size() != 2) throw CorruptLog("bad reference path point");
        log.reference_path.push_back({p[0].get<double>(), p[1].get<double>()});
      }
      const auto m = detail::field<nlohmann::json>(j, "metrics", lineno);
      log.metrics = {detail::field<double>(m, "u_threshold", lineno), detail::field<double>(m, "violation_u", lineno),
                     detail::field<double>(m, "stop_speed", lineno),
                     detail::field<double>(m, "resample_spacing", lineno)};
      continue;
    }
    if (type == "tick") {
      TickRecord t;
      t.tick = detail::field<int>(j, "tick", lineno);
      t.t = detail::field<double>(j, "t", lineno);
      t.pose = {detail::field<double>(j, "x", lineno), detail::field<double>(j, "y", lineno),
                detail::field<double>(j, "heading", lineno)};
      t.v = detail::field<double>(j, "v", lineno);
      t.omega = detail::field<double>(j, "omega", lineno);
      const auto c = detail::field<nlohmann::json>(j, "cost", lineno);
      t.cost = {detail::field<double>(c, "goal", lineno), detail::field<double>(c, "obstacle", lineno),
                detail::field<double>(c, "behavior", lineno), detail::field<double>(c, "total", lineno)};
      t.max_c = detail::field<double>(j, "max_c", lineno);
      t.capped_v_max = detail::field<double>(j, "capped_v_max", lineno);
      t.gait_caution = detail::field<bool>(j, "gait_caution", lineno);
      t.collision = detail::field<bool>(j, "collision", lineno);
      t.stop_active = detail::field<bool>(j, "stop_active", lineno);
      t.terrain = detail::field<std::string>(j, "terrain", lineno);
      t.landmark_index = detail::field<std::size_t>(j, "landmark_index", lineno);
      const auto g = detail::field<nlohmann::json>(j, "goal", lineno);
      if (!g.is_null()) {
        if (!g.is_array() || g.size() != 2) throw CorruptLog("line " + std::to_string(lineno) + ": bad goal");
        t.goal = Point2{g[0].get<double>(), g[1].get<double>()};
      }
      log.ticks.push_back(std::move(t));
    } else if (type == "end") {
      log.end_reason = detail::field<std::string>(j, "reason", lineno);
      if (detail::field<std::size_t>(j, "ticks", lineno) != log.ticks.size())
        throw CorruptLog("end record tick count does not match");
      have_end = true;
    } else {
      throw CorruptLog("line " + std::to_string(lineno) + ": unknown record type '" + type + "'");
    }
  }
  if (!have_header) throw CorruptLog("empty log");
  if (!have_end) throw CorruptLog("log is truncated: no end record");
  return log;
}

inline RunLog read_run_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorruptLog("cannot read " + path);
  return read_run_log(in);
}

inline void write_run_log(const std::string& path, const RunLog& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write " + path);
  write_run_log(out, log);
}

inline std::string format_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Plot-ready trajectory: one row per tick.
inline void export_csv(std::ostream& out, const RunLog& log) {
  out << "t,x,y,heading,v,omega,max_c,gait_caution\n";
  for (const auto& t : log.ticks)
    out << format_g9(t.t) << ',' << format_g9(t.pose.x) << ',' << format_g9(t.pose.y) << ','
        << format_g9(t.pose.heading) << ',' << format_g9(t.v) << ',' << format_g9(t.omega) << ','
        << format_g9(t.max_c) << ',' << (t.gait_caution ? 1 : 0) << '\n';
}

inline nlohmann::json summary_to_json(const RunSummary& s) {
  nlohmann::json j{{"success", s.success},
                   {"reached", s.reached},
                   {"bfa", s.bfa},
                   {"heading_error", s.heading_error},
                   {"path_length", s.path_length},
                   {"ticks", s.ticks},
                   {"collision_ticks", s.collision_ticks},
                   {"violation_ticks", s.violation_ticks},
                   {"stop_ticks", s.stop_ticks},
                   {"mean_tick_wall_ms", s.mean_tick_wall_ms}};
  j["frechet"] = s.frechet ? nlohmann::json(*s.frechet) : nlohmann::json(nullptr);
  return j;
}

inline RunSummary summary_from_json(const nlohmann::json& j) {
  RunSummary s;
  s.success = j.at("success").get<bool>();
  s.reached = j.at("reached").get<bool>();
  s.bfa = j.at("bfa").get<double>();
  s.heading_error = j.at("heading_error").get<double>();
  s.path_length = j.at("path_length").get<double>();
  s.ticks = j.at("ticks").get<int>();
  s.collision_ticks = j.at("collision_ticks").get<int>();
  s.violation_ticks = j.at("violation_ticks").get<int>();
  s.stop_ticks = j.at("stop_ticks").get<int>();
  s.mean_tick_wall_ms = j.value("mean_tick_wall_ms", 0.0);
  if (!j.at("frechet").is_null()) s.frechet = j.at("frechet").get<double>();
  return s;
}

}  // namespace behav
