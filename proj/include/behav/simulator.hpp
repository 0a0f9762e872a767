#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "behav/costmap.hpp"
#include "behav/errors.hpp"
#include "behav/geometry.hpp"
#include "behav/random.hpp"
#include "behav/raster.hpp"
#include "behav/sensor.hpp"
#include "behav/text.hpp"

namespace behav {

using Polygon = std::vector<Point2>;

struct Box2 {
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;

  bool contains(Point2 p) const { return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax; }
};

inline Box2 bounding_box(const Polygon& poly) {
  Box2 b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (auto p : poly) {
    b.xmin = std::min(b.xmin, p.x);
    b.ymin = std::min(b.ymin, p.y);
    b.xmax = std::max(b.xmax, p.x);
    b.ymax = std::max(b.ymax, p.y);
  }
  return b;
}

// Crossing-number test. Points exactly on an edge may land on either side.
inline bool point_in_polygon(const Polygon& poly, Point2 p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

inline double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a, ap = p - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  const double t = len2 > 0 ? std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0) : 0.0;
  return distance(p, a + t * ab);
}

namespace detail {

inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }

inline bool segments_intersect(Point2 p1, Point2 p2, Point2 q1, Point2 q2) {
  const double d1 = cross(q2 - q1, p1 - q1), d2 = cross(q2 - q1, p2 - q1);
  const double d3 = cross(p2 - p1, q1 - p1), d4 = cross(p2 - p1, q2 - p1);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 &&
         d4 != 0;
}

}  // namespace detail

// True when no two non-adjacent edges cross.
inline bool is_simple_polygon(const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (detail::segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]))
        return false;
    }
  return true;
}

inline double point_polygon_distance(const Polygon& poly, Point2 p) {
  if (point_in_polygon(poly, p)) return 0.0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
    d = std::min(d, point_segment_distance(p, poly[j], poly[i]));
  return d;
}

struct TerrainRegion {
  std::string label;
  Polygon polygon;
  int order = 0;  // higher draws on top
};

struct Obstacle {
  enum class Shape { circle, polygon };
  Shape shape = Shape::circle;
  Point2 center{};
  double radius = 0.0;
  Polygon polygon;

  static Obstacle circle(Point2 c, double r) { return {Shape::circle, c, r, {}}; }
  static Obstacle make_polygon(Polygon p) { return {Shape::polygon, {}, 0.0, std::move(p)}; }

  double distance_to(Point2 p) const {
    if (shape == Shape::circle) return std::max(0.0, distance(p, center) - radius);
    return point_polygon_distance(polygon, p);
  }
};

struct Waypoint {
  double t = 0.0;
  Point2 position{};
};

enum class ActorKind { pedestrian, sign, gesture };

struct ScriptedActor {
  ActorKind kind = ActorKind::pedestrian;
  std::string label;
  std::vector<Waypoint> waypoints;
  double t_start = 0.0;
  double t_end = std::numeric_limits<double>::infinity();
  double footprint_radius = 0.3;

  Point2 position_at(double t) const {
    if (waypoints.empty()) return {};
    if (t <= waypoints.front().t) return waypoints.front().position;
    if (t >= waypoints.back().t) return waypoints.back().position;
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
      if (t <= waypoints[i].t) {
        const auto& a = waypoints[i - 1];
        const auto& b = waypoints[i];
        const double s = (t - a.t) / (b.t - a.t);
        return a.position + s * (b.position - a.position);
      }
    }
    return waypoints.back().position;
  }

  bool active_at(double t) const { return t >= t_start && t <= t_end; }
};

struct Landmark {
  std::string text;
  Point2 position{};
  Box2 footprint{};  // world rectangle used as detection ground truth
};

struct ActorState {
  Point2 position{};
  bool active = false;
};

struct World {
  Box2 bounds{-50, -50, 50, 50};
  std::string default_label = "ground";
  std::vector<TerrainRegion> terrain_regions;
  std::vector<Obstacle> obstacles;
  std::vector<ScriptedActor> actors;
  std::vector<Landmark> landmarks;

  // Filled by finalize() / actors_update().
  std::shared_ptr<const std::vector<std::string>> labels;
  std::vector<LabelId> region_label_ids;
  std::vector<LabelId> actor_label_ids;
  std::vector<Box2> region_boxes;
  std::vector<std::size_t> draw_order;  // region indices, topmost first
  std::vector<ActorState> actor_states;
  double time = 0.0;

  // Validates and builds the label table: 0 = sky, 1 = default label, then
  // region and actor labels in first-seen order.
  void finalize() {
    for (const auto& r : terrain_regions)
      if (!is_simple_polygon(r.polygon))
        throw InvalidArgument("terrain region '" + r.label + "' is not a simple polygon");
    for (const auto& o : obstacles) {
      if (o.shape == Obstacle::Shape::circle && !(o.radius > 0))
        throw InvalidArgument("obstacle radius must be positive");
      if (o.shape == Obstacle::Shape::polygon && !is_simple_polygon(o.polygon))
        throw InvalidArgument("obstacle polygon is not simple");
    }
    for (const auto& a : actors) {
      if (a.waypoints.empty()) throw InvalidArgument("actor '" + a.label + "' has no waypoints");
      for (std::size_t i = 1; i < a.waypoints.size(); ++i)
        if (!(a.waypoints[i].t > a.waypoints[i - 1].t))
          throw InvalidArgument("actor '" + a.label + "' waypoint times not increasing");
      if (!(a.t_start <= a.t_end)) throw InvalidArgument("actor '" + a.label + "' bad active window");
    }
    auto table = std::make_shared<std::vector<std::string>>();
    table->push_back("sky");
    table->push_back(default_label);
    auto intern = [&](const std::string& s) -> LabelId {
      for (std::size_t i = 1; i < table->size(); ++i)
        if ((*table)[i] == s) return static_cast<LabelId>(i);
      table->push_back(s);
      return static_cast<LabelId>(table->size() - 1);
    };
    region_label_ids.clear();
    region_boxes.clear();
    for (const auto& r : terrain_regions) {
      region_label_ids.push_back(intern(r.label));
      region_boxes.push_back(bounding_box(r.polygon));
    }
    actor_label_ids.clear();
    for (const auto& a : actors) actor_label_ids.push_back(intern(a.label));
    labels = std::move(table);

    draw_order.resize(terrain_regions.size());
    for (std::size_t i = 0; i < draw_order.size(); ++i) draw_order[i] = i;
    // Topmost first; among equal orders the later region wins.
    std::sort(draw_order.begin(), draw_order.end(), [&](std::size_t a, std::size_t b) {
      const int oa = terrain_regions[a].order, ob = terrain_regions[b].order;
      return oa != ob ? oa > ob : a > b;
    });
    actor_states.assign(actors.size(), {});
    for (std::size_t i = 0; i < actors.size(); ++i)
      actor_states[i] = {actors[i].position_at(time), actors[i].active_at(time)};
  }

  void require_finalized() const {
    if (!labels) throw InvalidArgument("world not finalized");
  }

  LabelId terrain_label_id_at(Point2 p) const {
    require_finalized();
    for (auto i : draw_order)
      if (region_boxes[i].contains(p) && point_in_polygon(terrain_regions[i].polygon, p))
        return region_label_ids[i];
    return 1;
  }

  const std::string& terrain_label_at(Point2 p) const { return (*labels)[terrain_label_id_at(p)]; }

  // Label id at a ground point including active actors, which occlude terrain.
  LabelId label_id_at(Point2 p, double t) const {
    for (std::size_t i = 0; i < actors.size(); ++i) {
      const auto& a = actors[i];
      if (a.active_at(t) && distance(a.position_at(t), p) <= a.footprint_radius)
        return actor_label_ids[i];
    }
    return terrain_label_id_at(p);
  }
};

// Positions and activity of every actor at time t.
inline World actors_update(const World& world, double t) {
  World w = world;
  w.time = t;
  w.actor_states.assign(w.actors.size(), {});
  for (std::size_t i = 0; i < w.actors.size(); ++i)
    w.actor_states[i] = {w.actors[i].position_at(t), w.actors[i].active_at(t)};
  return w;
}

struct RobotState {
  Pose2D pose;
  double v = 0.0;
  double omega = 0.0;
  double t = 0.0;
};

// Exact unicycle arc over dt under constant (v, omega).
inline RobotState step(const RobotState& s, double v, double omega, double dt) {
  if (!(dt > 0)) throw InvalidArgument("step: dt must be positive");
  const double psi = s.pose.heading;
  RobotState n = s;
  if (std::abs(omega) < 1e-9) {
    n.pose.x += v * std::cos(psi) * dt;
    n.pose.y += v * std::sin(psi) * dt;
  } else {
    n.pose.x += (v / omega) * (std::sin(psi + omega * dt) - std::sin(psi));
    n.pose.y += (v / omega) * (std::cos(psi) - std::cos(psi + omega * dt));
  }
  n.pose.heading = wrap_angle(psi + omega * dt);
  n.v = v;
  n.omega = omega;
  n.t = s.t + dt;
  return n;
}

inline Raster<LabelId> render_label_image(const World& world, const Pose2D& robot,
                                          const CameraModel& cam, double t) {
  world.require_finalized();
  Raster<LabelId> img(cam.width, cam.height, kSkyLabel);
  for (int row = 0; row < cam.height; ++row)
    for (int col = 0; col < cam.width; ++col) {
      const auto g = pixel_to_ground(cam, robot, Pixel{static_cast<double>(col), static_cast<double>(row)});
      if (g) img.at(col, row) = world.label_id_at(*g, t);
    }
  return img;
}

namespace detail {

// Smallest s >= 0 with |origin + s*dir - c| = r, dir unit length.
inline std::optional<double> ray_circle(Point2 origin, Point2 dir, Point2 c, double r) {
  const Point2 oc = origin - c;
  const double b = oc.x * dir.x + oc.y * dir.y;
  const double cc = oc.x * oc.x + oc.y * oc.y - r * r;
  const double disc = b * b - cc;
  if (disc < 0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double s1 = -b - sq, s2 = -b + sq;
  if (s1 >= 0) return s1;
  if (s2 >= 0) return s2;
  return std::nullopt;
}

inline std::optional<double> ray_segment(Point2 origin, Point2 dir, Point2 a, Point2 b) {
  const Point2 e = b - a;
  const double den = cross(dir, e);
  if (std::abs(den) < 1e-15) return std::nullopt;
  const Point2 ao = a - origin;
  const double s = cross(ao, e) / den;
  const double u = cross(ao, dir) / den;
  if (s < 0 || u < 0 || u > 1) return std::nullopt;
  return s;
}

}  // namespace detail

// Evenly spaced beams starting at azimuth 0 (robot forward). Terrain is not
// lidar-visible; obstacles and active actors are.
inline std::vector<Point2> lidar_scan(const World& world, const Pose2D& robot, double t, int beams,
                                      double max_range) {
  if (beams < 1) throw InvalidArgument("lidar_scan: beams must be >= 1");
  std::vector<Point2> points;
  const Point2 origin = robot.position();
  std::vector<std::pair<Point2, double>> circles;
  for (const auto& o : world.obstacles)
    if (o.shape == Obstacle::Shape::circle && distance(origin, o.center) - o.radius <= max_range)
      circles.emplace_back(o.center, o.radius);
  for (const auto& a : world.actors)
    if (a.active_at(t)) circles.emplace_back(a.position_at(t), a.footprint_radius);
  for (int i = 0; i < beams; ++i) {
    const double az = kTwoPi * i / beams;
    const double world_az = robot.heading + az;
    const Point2 dir{std::cos(world_az), std::sin(world_az)};
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [c, r] : circles)
      if (auto s = detail::ray_circle(origin, dir, c, r)) best = std::min(best, *s);
    for (const auto& o : world.obstacles) {
      if (o.shape != Obstacle::Shape::polygon) continue;
      const auto& p = o.polygon;
      for (std::size_t k = 0, j = p.size() - 1; k < p.size(); j = k++)
        if (auto s = detail::ray_segment(origin, dir, p[j], p[k])) best = std::min(best, *s);
    }
    if (best <= max_range) points.push_back({best * std::cos(az), best * std::sin(az)});
  }
  return points;
}

// Clearance between the robot disc and the nearest obstacle or active actor
// (negative when overlapping).
inline double clearance(const World& world, Point2 p, double t, double robot_radius) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& o : world.obstacles) d = std::min(d, o.distance_to(p));
  for (const auto& a : world.actors)
    if (a.active_at(t)) d = std::min(d, distance(p, a.position_at(t)) - a.footprint_radius);
  return d - robot_radius;
}

inline bool in_collision(const World& world, Point2 p, double t, double robot_radius) {
  return clearance(world, p, t, robot_radius) < 0.0;
}

inline SensorFrame capture(const World& world, const Pose2D& robot, const CameraModel& cam, double t,
                           int beams, double max_range) {
  SensorFrame f;
  f.label_image = render_label_image(world, robot, cam, t);
  f.label_names = world.labels;
  f.lidar_points = lidar_scan(world, robot, t, beams, max_range);
  f.pose = robot;
  f.t = t;
  return f;
}

// Ground-truth segmentation: indicator of matching labels, blurred, plus
// seeded uniform noise, clamped to [0, 1]. Sky never matches.
inline SegmentationMap oracle_segment(const Raster<LabelId>& labels,
                                      const std::vector<std::string>& label_names,
                                      const std::string& query, double blur_sigma, double noise_amp,
                                      std::uint64_t seed) {
  std::vector<char> match(label_names.size(), 0);
  for (std::size_t i = 1; i < label_names.size(); ++i)
    match[i] = text::labels_match(label_names[i], query) ? 1 : 0;
  ProbRaster mask(labels.width(), labels.height());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto id = labels[i];
    mask[i] = id < match.size() && match[id] ? 1.0 : 0.0;
  }
  if (blur_sigma > 0) mask = gaussian_blur(mask, blur_sigma);
  if (noise_amp > 0) {
    Rng rng(seed);
    for (auto& v : mask.values()) v += rng.uniform(-noise_amp, noise_amp);
  }
  for (auto& v : mask.values()) v = std::clamp(v, 0.0, 1.0);
  return {std::move(mask), query};
}

class OracleSegmenter : public SegmentationBackend {
 public:
  OracleSegmenter(double blur_sigma = 0.0, double noise_amp = 0.0, std::uint64_t seed = 0)
      : sigma_(blur_sigma), noise_(noise_amp), seed_(seed) {}

  std::vector<SegmentationMap> segment(const SensorFrame& frame,
                                       const std::vector<std::string>& labels) override {
    std::vector<SegmentationMap> out;
    const auto stamp = static_cast<std::uint64_t>(std::llround(frame.t * 1000.0));
    for (std::size_t i = 0; i < labels.size(); ++i)
      out.push_back(oracle_segment(frame.label_image, *frame.label_names, labels[i], sigma_, noise_,
                                   mix_seed(mix_seed(seed_, stamp), i)));
    return out;
  }

 private:
  double sigma_;
  double noise_;
  std::uint64_t seed_;
};

}  // namespace behav
