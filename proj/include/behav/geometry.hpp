#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "behav/errors.hpp"

namespace behav {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  if (w > kPi) w -= kTwoPi;
  return w;
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point2, Point2) = default;
};

inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

// Planar pose in the odometry frame. Heading is kept in (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Point2 position() const { return {x, y}; }
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

inline Pose2D make_pose(double x, double y, double heading) {
  return {x, y, wrap_angle(heading)};
}

// Robot-frame point -> odom-frame point.
inline Point2 robot_to_odom(const Pose2D& robot, Point2 p) {
  const double c = std::cos(robot.heading), s = std::sin(robot.heading);
  return {robot.x + c * p.x - s * p.y, robot.y + s * p.x + c * p.y};
}

inline Point2 odom_to_robot(const Pose2D& robot, Point2 p) {
  const double c = std::cos(robot.heading), s = std::sin(robot.heading);
  const double dx = p.x - robot.x, dy = p.y - robot.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

// (r, theta, delta): range to the target, target orientation and robot
// heading, both measured from the robot->target line of sight.
struct EgocentricGoal {
  double r = 0.0;
  double theta = 0.0;
  double delta = 0.0;
};

inline EgocentricGoal to_egocentric(const Pose2D& robot, const Pose2D& target) {
  const double dx = target.x - robot.x, dy = target.y - robot.y;
  const double r = std::hypot(dx, dy);
  if (r < 1e-9) return {r, 0.0, 0.0};
  const double bearing = std::atan2(dy, dx);
  return {r, wrap_angle(target.heading - bearing), wrap_angle(robot.heading - bearing)};
}

// Inverse of to_egocentric: the target pose that (r, theta, delta) describes
// relative to `robot`.
inline Pose2D from_egocentric(const Pose2D& robot, const EgocentricGoal& ego) {
  const double bearing = robot.heading - ego.delta;
  return make_pose(robot.x + ego.r * std::cos(bearing), robot.y + ego.r * std::sin(bearing),
                   bearing + ego.theta);
}

// Rigid 2D transform from `source` frame to `target` frame.
struct FrameTransform {
  double rotation = 0.0;
  Point2 translation{};
  std::string source;
  std::string target;

  Point2 apply(Point2 p) const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    return {c * p.x - s * p.y + translation.x, s * p.x + c * p.y + translation.y};
  }

  Pose2D apply(const Pose2D& p) const {
    const Point2 q = apply(p.position());
    return make_pose(q.x, q.y, p.heading + rotation);
  }

  FrameTransform inverse() const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    return {wrap_angle(-rotation),
            {-(c * translation.x + s * translation.y), -(-s * translation.x + c * translation.y)},
            target,
            source};
  }

  static FrameTransform from_pose(const Pose2D& pose, std::string source, std::string target) {
    return {pose.heading, pose.position(), std::move(source), std::move(target)};
  }
};

// outer ∘ inner: applies `inner` first. Frame tags must chain.
inline FrameTransform compose(const FrameTransform& outer, const FrameTransform& inner) {
  if (!inner.target.empty() && !outer.source.empty() && inner.target != outer.source)
    throw InvalidArgument("frame mismatch: " + inner.target + " -> " + outer.source);
  return {wrap_angle(outer.rotation + inner.rotation), outer.apply(inner.translation),
          inner.source, outer.target};
}

struct Pixel {
  double x = 0.0;  // column
  double y = 0.0;  // row
};

// Axis-aligned pixel rectangle [x, x+w) x [y, y+h).
struct PixelRect {
  int x = 0, y = 0, w = 0, h = 0;

  bool contains(double px, double py) const { return px >= x && px < x + w && py >= y && py < y + h; }
};

// Pitched pinhole camera mounted on the robot. Optical frame: x right,
// y down, z forward. Pitch tilts the optical axis toward the ground.
struct CameraModel {
  double fx = 80.0;
  double fy = 80.0;
  double cx = 80.0;
  double cy = 60.0;
  int width = 160;
  int height = 120;
  double mount_height = 0.6;
  double mount_pitch = 0.35;
  double mount_offset = 0.0;  // forward offset in the robot frame

  void validate() const {
    if (!(fx > 0 && fy > 0)) throw InvalidArgument("camera: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InvalidArgument("camera: empty image");
    if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
      throw InvalidArgument("camera: principal point outside the image");
    if (!(mount_height > 0)) throw InvalidArgument("camera: mount_height must be positive");
  }

  bool contains(Pixel p) const { return p.x >= 0 && p.x < width && p.y >= 0 && p.y < height; }
};

namespace detail {

// Robot-frame ground point -> optical-frame coordinates.
struct CameraPoint {
  double x, y, z;
};

inline CameraPoint ground_to_camera(const CameraModel& cam, Point2 robot_pt) {
  const double cp = std::cos(cam.mount_pitch), sp = std::sin(cam.mount_pitch);
  const double fwd = robot_pt.x - cam.mount_offset;
  const double up = -cam.mount_height;
  return {-robot_pt.y, -sp * fwd - cp * up, cp * fwd - sp * up};
}

// Direction of the pixel ray in the robot frame (x fwd, y left, z up).
struct Ray3 {
  double x, y, z;
};

inline Ray3 pixel_ray(const CameraModel& cam, Pixel px) {
  const double cp = std::cos(cam.mount_pitch), sp = std::sin(cam.mount_pitch);
  const double a = (px.x - cam.cx) / cam.fx;
  const double b = (px.y - cam.cy) / cam.fy;
  return {cp - b * sp, -a, -b * cp - sp};
}

}  // namespace detail

// Ground point (robot frame) to pixel; nullopt when behind the camera or
// outside the image.
inline std::optional<Pixel> robot_ground_to_pixel(const CameraModel& cam, Point2 robot_pt) {
  const auto c = detail::ground_to_camera(cam, robot_pt);
  if (c.z <= 1e-9) return std::nullopt;
  const Pixel px{cam.cx + cam.fx * c.x / c.z, cam.cy + cam.fy * c.y / c.z};
  if (!cam.contains(px)) return std::nullopt;
  return px;
}

inline std::optional<Pixel> ground_to_pixel(const CameraModel& cam, const Pose2D& robot, Point2 p) {
  return robot_ground_to_pixel(cam, odom_to_robot(robot, p));
}

// Intersection of the pixel ray with the ground, robot frame. nullopt when
// the ray points at or above the horizon.
inline std::optional<Point2> pixel_to_robot_ground(const CameraModel& cam, Pixel px) {
  const auto d = detail::pixel_ray(cam, px);
  if (d.z >= -1e-9) return std::nullopt;
  const double t = cam.mount_height / -d.z;
  return Point2{cam.mount_offset + t * d.x, t * d.y};
}

inline std::optional<Point2> pixel_to_ground(const CameraModel& cam, const Pose2D& robot, Pixel px) {
  const auto p = pixel_to_robot_ground(cam, px);
  if (!p) return std::nullopt;
  return robot_to_odom(robot, *p);
}

// Azimuth of the pixel ray projected onto the ground plane, robot frame.
inline double pixel_azimuth(const CameraModel& cam, Pixel px) {
  const auto d = detail::pixel_ray(cam, px);
  return std::atan2(d.y, d.x);
}

}  // namespace behav
