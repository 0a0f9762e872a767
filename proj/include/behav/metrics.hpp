#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "behav/errors.hpp"
#include "behav/geometry.hpp"
#include "behav/instruction.hpp"
#include "behav/planner.hpp"
#include "behav/text.hpp"

namespace behav {

using PathPolyline = std::vector<Point2>;

// Discrete Fréchet distance, O(nm) dynamic program.
inline double frechet(const PathPolyline& a, const PathPolyline& b) {
  if (a.empty() || b.empty()) throw EmptyPath("frechet: empty path");
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> prev(m), cur(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = distance(a[i], b[j]);
      if (i == 0 && j == 0) cur[j] = d;
      else if (i == 0) cur[j] = std::max(cur[j - 1], d);
      else if (j == 0) cur[j] = std::max(prev[j], d);
      else cur[j] = std::max(std::min({prev[j], prev[j - 1], cur[j - 1]}), d);
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

inline double path_length(const PathPolyline& p) {
  double len = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) len += distance(p[i - 1], p[i]);
  return len;
}

// Points every `spacing` meters of arc length, endpoints included.
inline PathPolyline resample(const PathPolyline& p, double spacing) {
  if (p.size() < 2 || !(spacing > 0)) return p;
  PathPolyline out{p.front()};
  double carry = 0.0;  // arc length since the last emitted point
  for (std::size_t i = 1; i < p.size(); ++i) {
    const Point2 a = p[i - 1], b = p[i];
    const double seg = distance(a, b);
    double s = spacing - carry;
    while (s <= seg) {
      out.push_back(a + (s / seg) * (b - a));
      s += spacing;
    }
    carry = seg - (s - spacing);
  }
  if (distance(out.back(), p.back()) > 1e-12) out.push_back(p.back());
  return out;
}

struct TickRecord {
  int tick = 0;
  double t = 0.0;
  Pose2D pose;
  double v = 0.0;
  double omega = 0.0;
  CostBreakdown cost;
  double max_c = 0.0;
  double capped_v_max = 0.0;
  bool gait_caution = false;
  bool collision = false;
  bool stop_active = false;
  std::string terrain;
  std::optional<Point2> goal;
  std::size_t landmark_index = 0;
};

struct MetricsConfig {
  double u_threshold = 0.5;  // compliant terrain: undesirability <= this
  double violation_u = 0.8;  // terrain at or above this breaks success
  double stop_speed = 0.05;  // m/s, moving while a stop is active
  double resample_spacing = 0.05;
};

struct RunLog {
  std::string scenario;
  std::string config_digest;
  std::vector<BehaviorRule> rules;
  std::size_t landmark_count = 1;
  double d_th = 0.5;
  double timeout = 60.0;
  double dt = 0.1;
  PathPolyline reference_path;
  MetricsConfig metrics;
  std::vector<TickRecord> ticks;
  std::string end_reason;
};

// Highest undesirability among rules whose target names this terrain; 0 when
// no rule mentions it.
inline double terrain_undesirability(const std::string& terrain, const std::vector<BehaviorRule>& rules) {
  double u = 0.0;
  for (const auto& r : rules)
    if (text::labels_match(terrain, r.target)) u = std::max(u, r.undesirability);
  return u;
}

inline bool stop_violation(const TickRecord& t, const MetricsConfig& cfg) {
  return t.stop_active && t.v > cfg.stop_speed;
}

// Percent of traveled length that complied with the rules. Segment i runs
// from tick i to tick i+1 and is judged by tick i.
inline double bfa(const RunLog& log, const std::vector<BehaviorRule>& rules, const MetricsConfig& cfg = {}) {
  double total = 0.0, ok = 0.0;
  for (std::size_t i = 0; i + 1 < log.ticks.size(); ++i) {
    const auto& t = log.ticks[i];
    const double seg = distance(t.pose.position(), log.ticks[i + 1].pose.position());
    total += seg;
    const bool compliant =
        terrain_undesirability(t.terrain, rules) <= cfg.u_threshold && !stop_violation(t, cfg);
    if (compliant) ok += seg;
  }
  if (total < 1e-6) throw ZeroLength("bfa: robot did not move");
  return 100.0 * ok / total;
}

// Mean |heading - bearing to goal| over ticks that have a goal.
inline double heading_error(const RunLog& log) {
  double sum = 0.0;
  int n = 0;
  for (const auto& t : log.ticks) {
    if (!t.goal) continue;
    const Point2 d = *t.goal - t.pose.position();
    if (norm(d) < 1e-9) continue;
    sum += std::abs(wrap_angle(t.pose.heading - std::atan2(d.y, d.x)));
    ++n;
  }
  return n ? sum / n : 0.0;
}

inline bool reached_final(const RunLog& log, double timeout) {
  if (log.ticks.empty()) return false;
  const auto& last = log.ticks.back();
  return last.landmark_index >= log.landmark_count && last.t <= timeout + 1e-9;
}

inline int violation_ticks(const RunLog& log, const std::vector<BehaviorRule>& rules, const MetricsConfig& cfg) {
  int n = 0;
  for (const auto& t : log.ticks)
    if (terrain_undesirability(t.terrain, rules) >= cfg.violation_u || stop_violation(t, cfg)) ++n;
  return n;
}

inline bool success(const RunLog& log, const std::vector<BehaviorRule>& rules, double timeout,
                    const MetricsConfig& cfg = {}) {
  if (!reached_final(log, timeout)) return false;
  for (const auto& t : log.ticks)
    if (t.collision) return false;
  return violation_ticks(log, rules, cfg) == 0;
}

inline PathPolyline executed_path(const RunLog& log) {
  PathPolyline p;
  for (const auto& t : log.ticks) p.push_back(t.pose.position());
  return p;
}

struct RunSummary {
  bool success = false;
  bool reached = false;
  double bfa = 0.0;  // percent; 0 when the robot never moved
  double heading_error = 0.0;
  std::optional<double> frechet;
  double path_length = 0.0;
  int ticks = 0;
  int collision_ticks = 0;
  int violation_ticks = 0;
  int stop_ticks = 0;  // ticks with a stop active and v == 0
  double mean_tick_wall_ms = 0.0;

  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

// Every field except wall-time is a pure function of the log.
inline RunSummary summarize(const RunLog& log, const MetricsConfig& cfg) {
  RunSummary s;
  s.ticks = static_cast<int>(log.ticks.size());
  s.reached = reached_final(log, log.timeout);
  s.success = success(log, log.rules, log.timeout, cfg);
  const auto path = executed_path(log);
  s.path_length = path_length(path);
  try {
    s.bfa = bfa(log, log.rules, cfg);
  } catch (const ZeroLength&) {
    s.bfa = 0.0;
  }
  s.heading_error = heading_error(log);
  if (!log.reference_path.empty() && !path.empty())
    s.frechet = frechet(resample(path, cfg.resample_spacing), resample(log.reference_path, cfg.resample_spacing));
  for (const auto& t : log.ticks) {
    if (t.collision) ++s.collision_ticks;
    if (t.stop_active && t.v == 0.0) ++s.stop_ticks;
  }
  s.violation_ticks = violation_ticks(log, log.rules, cfg);
  return s;
}

// Uses the thresholds recorded in the log.
inline RunSummary summarize(const RunLog& log) { return summarize(log, log.metrics); }

}  // namespace behav
