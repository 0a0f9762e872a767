#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "behav/costmap.hpp"
#include "behav/errors.hpp"
#include "behav/gateway.hpp"
#include "behav/instruction.hpp"
#include "behav/landmark.hpp"
#include "behav/metrics.hpp"
#include "behav/planner.hpp"
#include "behav/runlog.hpp"
#include "behav/scenario.hpp"
#include "behav/simulator.hpp"

namespace behav {

struct Backends {
  std::unique_ptr<LanguageModel> language;  // null: built-in grammar and table
  std::unique_ptr<SegmentationBackend> segmentation;
  std::unique_ptr<LandmarkBackend> landmark;
};

namespace detail {

inline BackendEndpoint with_mode(BackendEndpoint ep, const std::string& mode, std::uint64_t seed) {
  ep.mode = parse_backend_mode(mode);
  ep.jitter_seed = seed;
  return ep;
}

}  // namespace detail

// Instantiates the backends a scenario asks for. `world` must outlive the
// returned oracle backends.
inline Backends make_backends(const ScenarioConfig& s, const World& world) {
  Backends b;
  const auto& sel = s.backends;
  try {
    if (sel.language != "oracle") {
      if (!sel.llm) throw InvalidScenario("backends.llm is required for language mode '" + sel.language + "'");
      auto cfg = *sel.llm;
      cfg.endpoint = detail::with_mode(cfg.endpoint, sel.language, mix_seed(s.seeds.sim, 11));
      b.language = std::make_unique<RemoteLanguageModel>(cfg);
    }
    if (sel.perception == "oracle") {
      b.segmentation = std::make_unique<OracleSegmenter>(s.perception.blur_sigma, s.perception.noise_amp,
                                                         mix_seed(s.seeds.noise, 1));
      b.landmark = std::make_unique<OracleLandmarkDetector>(&world, s.camera, s.perception.landmark_noise_px,
                                                            mix_seed(s.seeds.noise, 2));
    } else {
      if (!sel.vlm || !sel.segmentation)
        throw InvalidScenario("backends.vlm and backends.segmentation are required for perception mode '" +
                              sel.perception + "'");
      auto vlm = *sel.vlm;
      vlm.endpoint = detail::with_mode(vlm.endpoint, sel.perception, mix_seed(s.seeds.sim, 12));
      b.landmark = std::make_unique<RemoteLandmarkDetector>(vlm);
      b.segmentation = std::make_unique<RemoteSegmenter>(
          detail::with_mode(*sel.segmentation, sel.perception, mix_seed(s.seeds.sim, 13)));
    }
  } catch (const InvalidArgument& e) {
    throw InvalidScenario(e.what());
  }
  return b;
}

// True when an active actor that some "stop" rule targets is visible in the
// frame.
inline bool stop_visible(const World& world, const SensorFrame& frame, const std::vector<BehaviorRule>& rules,
                         double t) {
  std::vector<LabelId> ids;
  for (std::size_t i = 0; i < world.actors.size(); ++i) {
    const auto& a = world.actors[i];
    if (!a.active_at(t)) continue;
    for (const auto& r : rules)
      if (text::normalize(r.action).find("stop") != std::string::npos && text::labels_match(a.label, r.target))
        ids.push_back(world.actor_label_ids[i]);
  }
  if (ids.empty()) return false;
  for (auto id : frame.label_image.values())
    if (std::find(ids.begin(), ids.end(), id) != ids.end()) return true;
  return false;
}

struct TickDetail {
  const SensorFrame* frame = nullptr;
  const CostMap* costmap = nullptr;
  const PlanResult* plan = nullptr;  // null while no goal is locked
  double wall_ms = 0.0;
};

struct RunResult {
  RunLog log;
  RunSummary summary;
  MissionRules mission;
  std::vector<double> tick_wall_ms;
};

struct RunOptions {
  std::function<void(const TickRecord&, const TickDetail&)> on_tick;
};

// Landmark query issued at `issued` and delivered `latency` seconds later in
// sim-time, tagged with the landmark it was asked about.
struct PendingQuery {
  double ready_at = 0.0;
  std::size_t landmark_index = 0;
  std::optional<OdomGoal> result;
};

inline RunResult run_scenario(const ScenarioConfig& s, Backends& backends, const RunOptions& options = {}) {
  RunResult out;
  out.mission = prepare_mission(s.prompts, backends.language.get(), s.desirability_table,
                                s.backends.allow_fallback);
  const auto& bundle = out.mission.bundle;
  const auto& rules = out.mission.rules;
  if (bundle.nav_landmarks.empty()) throw InvalidScenario("instruction names no landmark");

  auto& log = out.log;
  log.scenario = s.name;
  log.config_digest = s.config_digest;
  log.rules = rules;
  log.landmark_count = bundle.nav_landmarks.size();
  log.d_th = s.planner.d_th;
  log.timeout = s.timeout_s;
  log.dt = s.planner.dt;
  log.reference_path = s.reference_path;
  log.metrics = s.metrics;

  GoalLock lock;
  lock.landmark_count = bundle.nav_landmarks.size();
  lock.reached_threshold = s.planner.d_th;

  RobotState robot{s.start, 0.0, 0.0, 0.0};
  PendingQuery pending;
  bool has_pending = false;
  double next_query_at = 0.0;
  const double reach = s.bounds.upper.r + s.planner.d_safe + 0.5;
  const bool gait = gait_caution_flag(bundle.behav_actions);
  const auto* remote_landmark = dynamic_cast<RemoteLandmarkDetector*>(backends.landmark.get());

  for (int k = 0;; ++k) {
    const auto wall0 = std::chrono::steady_clock::now();
    const double t = k * s.planner.dt;
    const World world = actors_update(s.world, t);
    const SensorFrame frame =
        capture(world, robot.pose, s.camera, t, s.perception.lidar_beams, s.perception.lidar_max_range);

    // Landmark channel: deliver a finished query, then maybe issue the next.
    std::optional<OdomGoal> delivered;
    if (has_pending && pending.ready_at <= t + 1e-9) {
      if (pending.landmark_index == lock.landmark_index) delivered = pending.result;
      has_pending = false;
    }
    if (!has_pending && !lock.finished() && t + 1e-9 >= next_query_at) {
      PendingQuery q;
      q.landmark_index = lock.landmark_index;
      double latency = s.perception.landmark_latency_s;
      try {
        if (auto px = detect(frame, bundle.nav_landmarks[lock.landmark_index], s.prompts, *backends.landmark))
          q.result = pixel_goal_to_odom(*px, s.camera, frame.pose, s.perception.default_range);
        if (remote_landmark) latency = std::max(latency, remote_landmark->last_latency());
      } catch (const BackendUnavailable&) {
        if (!s.backends.allow_fallback) throw;
      } catch (const MalformedResponse&) {
        if (!s.backends.allow_fallback) throw;
      }
      q.ready_at = t + latency;
      next_query_at = t + s.perception.landmark_period_s;
      if (q.ready_at <= t + 1e-9) {
        delivered = q.result;
      } else {
        pending = std::move(q);
        has_pending = true;
      }
    }
    lock = update_goal_lock(lock, delivered, robot.pose);

    TickRecord rec;
    rec.tick = k;
    rec.t = t;
    rec.pose = robot.pose;
    rec.gait_caution = gait;
    rec.collision = in_collision(world, robot.pose.position(), t, s.robot_radius);
    rec.stop_active = stop_visible(world, frame, rules, t);
    rec.terrain = world.terrain_label_at(robot.pose.position());
    rec.landmark_index = lock.landmark_index;
    if (lock.current) rec.goal = lock.current->position;

    const bool done = lock.finished();
    const bool timed_out = !done && t > s.timeout_s + 1e-9;
    CostMap costmap;
    std::optional<PlanResult> plan;
    if (!done && !timed_out) {
      costmap = behavior_costmap(frame, rules, *backends.segmentation);
      if (lock.current) {
        const auto obstacles = relevant_obstacles(frame.lidar_points, robot.pose, reach);
        plan = plan_step(robot.pose, lock.current, costmap, obstacles, bundle, s.planner, s.bounds,
                         mix_seed(s.seeds.optimizer, static_cast<std::uint64_t>(k)), s.camera);
        rec.v = plan->v;
        rec.omega = plan->omega;
        rec.cost = plan->cost_breakdown;
        rec.max_c = plan->max_c;
        rec.capped_v_max = plan->capped_v_max;
      } else {
        rec.max_c = max_cost(costmap, s.planner.cap_roi);
        rec.capped_v_max = apply_velocity_cap(s.bounds, rec.max_c, s.planner.c_th, s.bounds.upper.v_max).upper.v_max;
      }
    }
    log.ticks.push_back(rec);
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall0).count();
    out.tick_wall_ms.push_back(wall_ms);
    if (options.on_tick) options.on_tick(rec, {&frame, &costmap, plan ? &*plan : nullptr, wall_ms});

    if (done) {
      log.end_reason = "reached";
      break;
    }
    if (timed_out) {
      log.end_reason = "timeout";
      break;
    }
    robot = step(robot, rec.v, rec.omega, s.planner.dt);
  }

  out.summary = summarize(log);
  double sum = 0.0;
  for (double w : out.tick_wall_ms) sum += w;
  out.summary.mean_tick_wall_ms = out.tick_wall_ms.empty() ? 0.0 : sum / out.tick_wall_ms.size();
  return out;
}

inline RunResult run_scenario(const ScenarioConfig& s, const RunOptions& options = {}) {
  auto backends = make_backends(s, s.world);
  return run_scenario(s, backends, options);
}

// Writes log.jsonl and summary.json into `dir`.
inline void write_run_outputs(const RunResult& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_run_log((std::filesystem::path(dir) / "log.jsonl").string(), r.log);
  std::ofstream out(std::filesystem::path(dir) / "summary.json", std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write summary in " + dir);
  out << summary_to_json(r.summary).dump(2) << '\n';
}

}  // namespace behav
