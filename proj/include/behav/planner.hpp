#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "behav/costmap.hpp"
#include "behav/errors.hpp"
#include "behav/geometry.hpp"
#include "behav/instruction.hpp"
#include "behav/landmark.hpp"
#include "behav/optimizer.hpp"
#include "behav/simulator.hpp"

namespace behav {

// z = (r, theta, delta, v_max): a virtual target in egocentric coordinates
// plus the speed used to reach it.
struct TrajectoryParams {
  double r = 0.0;
  double theta = 0.0;
  double delta = 0.0;
  double v_max = 0.0;

  Vec<4> to_vec() const { return {r, theta, delta, v_max}; }
  static TrajectoryParams from_vec(const Vec<4>& v) { return {v[0], v[1], v[2], v[3]}; }
  EgocentricGoal ego() const { return {r, theta, delta}; }
  friend bool operator==(const TrajectoryParams&, const TrajectoryParams&) = default;
};

struct ParamBounds {
  TrajectoryParams lower{0.5, -kPi / 2, -kPi / 2, 0.0};
  TrajectoryParams upper{6.0, kPi / 2, kPi / 2, 1.0};

  void validate() const {
    const auto lo = lower.to_vec(), hi = upper.to_vec();
    for (std::size_t i = 0; i < 4; ++i)
      if (!(lo[i] <= hi[i])) throw InvalidArgument("param bounds: lower > upper");
    if (lower.v_max < 0) throw InvalidArgument("param bounds: v_min must be >= 0");
  }

  BoxBounds<4> box() const { return {lower.to_vec(), upper.to_vec()}; }
};

enum class BehaviorAggregate { sum, max };

struct PlannerConfig {
  double k1 = 1.0;
  double k2 = 3.0;
  int horizon_steps = 30;
  double dt = 0.1;
  double lambda = 0.5;
  double d_safe = 0.7;
  double c_th = 0.8;
  double d_th = 0.5;
  double w_goal = 1.0;
  double w_obs = 1.0;
  double w_behav = 2.0;
  BehaviorAggregate behav_aggregate = BehaviorAggregate::sum;
  double obstacle_cost_clamp = 1e3;
  int budget = 256;
  double arrival_tolerance = 0.05;
  std::optional<PixelRect> cap_roi;

  void validate() const {
    if (!(k1 > 0 && k2 > 0)) throw InvalidArgument("planner: gains must be positive");
    if (horizon_steps < 1) throw InvalidArgument("planner: horizon_steps must be >= 1");
    if (!(dt > 0)) throw InvalidArgument("planner: dt must be positive");
    if (!(lambda >= 0)) throw InvalidArgument("planner: lambda must be >= 0");
    if (!(d_safe > 0)) throw InvalidArgument("planner: d_safe must be positive");
    if (!(c_th > 0 && c_th <= 1)) throw InvalidArgument("planner: c_th must be in (0, 1]");
    if (!(w_goal >= 0 && w_obs >= 0 && w_behav >= 0))
      throw InvalidArgument("planner: weights must be >= 0");
    if (budget < 16) throw InvalidArgument("planner: budget must be >= 16");
  }
};

// Pose-following law: turn rate for egocentric target (r, theta, delta) at
// speed v. Angles here are taken clockwise from the line of sight.
inline double control_law(const EgocentricGoal& ego, double v, double k1, double k2) {
  if (ego.r <= 1e-6) throw DegenerateRange("control_law: r too small");
  const double th = ego.theta, de = ego.delta;
  return (v / ego.r) *
         (k2 * (de - std::atan(-k1 * th)) + (1.0 + k1) / (1.0 + k1 * k1 * th * th) * std::sin(de));
}

// Counter-clockwise yaw rate for the angle convention of to_egocentric().
// The law is odd in (theta, delta), so flipping the convention flips the sign.
inline double yaw_rate(const EgocentricGoal& ego, double v, double k1, double k2) {
  if (ego.r <= 1e-6) return 0.0;
  return -control_law(ego, v, k1, k2);
}

struct TrajectorySample {
  double t = 0.0;
  Pose2D pose;
  double speed = 0.0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  TrajectoryParams params;
};

// Rolls the control law forward from `start` toward the virtual target
// encoded by z, at constant speed z.v_max. Once within arrival tolerance
// the robot holds position for the rest of the horizon.
inline Trajectory rollout(const TrajectoryParams& z, const Pose2D& start, const PlannerConfig& cfg) {
  Trajectory traj;
  traj.params = z;
  traj.samples.reserve(static_cast<std::size_t>(cfg.horizon_steps));
  const Pose2D target = from_egocentric(start, z.ego());
  RobotState s{start, 0.0, 0.0, 0.0};
  bool arrived = false;
  for (int k = 1; k <= cfg.horizon_steps; ++k) {
    const double t = k * cfg.dt;
    if (arrived) {
      traj.samples.push_back({t, s.pose, 0.0});
      continue;
    }
    const auto ego = to_egocentric(s.pose, target);
    const double w = yaw_rate(ego, z.v_max, cfg.k1, cfg.k2);
    s = step(s, z.v_max, w, cfg.dt);
    traj.samples.push_back({t, s.pose, z.v_max});
    if (distance(s.pose.position(), target.position()) < cfg.arrival_tolerance) arrived = true;
  }
  return traj;
}

inline double goal_cost(const Trajectory& traj, Point2 goal, double d_tot) {
  if (d_tot <= 1e-9) throw ZeroBaseline("goal_cost: zero baseline distance");
  double sum = 0.0;
  for (const auto& s : traj.samples) sum += distance(s.pose.position(), goal) / d_tot;
  return sum;
}

inline double obstacle_cost(const Trajectory& traj, const std::vector<Point2>& obstacles,
                            double d_safe, double clamp = 1e3) {
  if (!(d_safe > 0)) throw InvalidArgument("obstacle_cost: d_safe must be positive");
  if (obstacles.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : traj.samples) {
    double d_min = std::numeric_limits<double>::infinity();
    const Point2 p = s.pose.position();
    for (const auto& o : obstacles) d_min = std::min(d_min, distance(p, o));
    if (d_min < d_safe) sum += d_min > 0 ? std::min(1.0 / d_min - 1.0 / d_safe, clamp) : clamp;
  }
  return sum;
}

// Cost-map value along the projected trajectory, discounted by distance from
// the robot. Samples outside the image contribute nothing.
inline double behavior_cost(const Trajectory& traj, const CostMap& c, const CameraModel& cam,
                            const Pose2D& robot, double lambda,
                            BehaviorAggregate mode = BehaviorAggregate::sum) {
  if (!(lambda >= 0)) throw InvalidArgument("behavior_cost: lambda must be >= 0");
  double acc = 0.0;
  for (const auto& s : traj.samples) {
    const Point2 p = s.pose.position();
    const auto px = ground_to_pixel(cam, robot, p);
    if (!px) continue;
    const double term = sample(c, *px) * std::exp(-lambda * distance(p, robot.position()));
    acc = mode == BehaviorAggregate::sum ? acc + term : std::max(acc, term);
  }
  return acc;
}

struct CostBreakdown {
  double goal = 0.0;
  double obstacle = 0.0;
  double behavior = 0.0;
  double total = 0.0;
};

// Everything one planning cycle evaluates trajectories against.
struct PlanningContext {
  Pose2D robot;
  Point2 goal;
  double d_tot = 0.0;  // robot -> goal at this cycle
  std::vector<Point2> obstacles;  // odom frame
  const CostMap* costmap = nullptr;
  CameraModel camera;
};

inline CostBreakdown total_cost(const Trajectory& traj, const PlanningContext& ctx,
                                const PlannerConfig& cfg) {
  CostBreakdown b;
  b.goal = goal_cost(traj, ctx.goal, ctx.d_tot);
  b.obstacle = obstacle_cost(traj, ctx.obstacles, cfg.d_safe, cfg.obstacle_cost_clamp);
  b.behavior = ctx.costmap ? behavior_cost(traj, *ctx.costmap, ctx.camera, ctx.robot, cfg.lambda,
                                           cfg.behav_aggregate)
                           : 0.0;
  b.total = cfg.w_goal * b.goal + cfg.w_obs * b.obstacle + cfg.w_behav * b.behavior;
  return b;
}

// Shrinks the speed bound when the cost map holds something the rules say
// must be strongly avoided.
inline ParamBounds apply_velocity_cap(ParamBounds bounds, double max_c, double c_th,
                                      double v_max_nominal) {
  if (max_c >= c_th) {
    bounds.upper.v_max = (1.0 - max_c) * v_max_nominal;
    bounds.lower.v_max = std::min(bounds.lower.v_max, bounds.upper.v_max);
  } else {
    bounds.upper.v_max = v_max_nominal;
  }
  return bounds;
}

struct PlanResult {
  double v = 0.0;
  double omega = 0.0;
  TrajectoryParams best_params;
  Trajectory best_trajectory;
  CostBreakdown cost_breakdown;
  bool gait_caution = false;
  double capped_v_max = 0.0;
  double max_c = 0.0;
  int evaluations = 0;
};

// Lidar returns within reach of any trajectory this cycle, in odom.
inline std::vector<Point2> relevant_obstacles(const std::vector<Point2>& lidar_robot_frame,
                                              const Pose2D& robot, double reach) {
  std::vector<Point2> out;
  for (auto p : lidar_robot_frame)
    if (norm(p) <= reach) out.push_back(robot_to_odom(robot, p));
  return out;
}

// One planning cycle: cap, optimize, command.
inline PlanResult plan_step(const Pose2D& robot, const std::optional<OdomGoal>& goal,
                            const CostMap& costmap, const std::vector<Point2>& obstacles_odom,
                            const InstructionBundle& bundle, const PlannerConfig& cfg,
                            const ParamBounds& bounds, std::uint64_t seed, const CameraModel& cam) {
  if (!goal) throw NoGoal("plan_step: no locked goal");
  PlanResult res;
  res.gait_caution = gait_caution_flag(bundle.behav_actions);
  res.max_c = max_cost(costmap, cfg.cap_roi);
  const ParamBounds capped = apply_velocity_cap(bounds, res.max_c, cfg.c_th, bounds.upper.v_max);
  res.capped_v_max = capped.upper.v_max;

  PlanningContext ctx{robot, goal->position, distance(robot.position(), goal->position),
                      obstacles_odom, &costmap, cam};
  if (ctx.d_tot <= 1e-9) {
    res.best_params = TrajectoryParams::from_vec(capped.box().clip({0, 0, 0, 0}));
    return res;
  }

  auto objective = [&](const Vec<4>& x) {
    return total_cost(rollout(TrajectoryParams::from_vec(x), robot, cfg), ctx, cfg).total;
  };
  const auto opt = optimize<4>(objective, capped.box(), seed, cfg.budget);
  res.evaluations = opt.evaluations;
  res.best_params = TrajectoryParams::from_vec(opt.x);
  res.best_trajectory = rollout(res.best_params, robot, cfg);
  res.cost_breakdown = total_cost(res.best_trajectory, ctx, cfg);
  res.v = std::clamp(res.best_params.v_max, 0.0, capped.upper.v_max);
  res.omega = yaw_rate(res.best_params.ego(), res.v, cfg.k1, cfg.k2);
  return res;
}

}  // namespace behav
