#include <cmath>

#include <gtest/gtest.h>

#include "behav/geometry.hpp"
#include "behav/random.hpp"

using namespace behav;

TEST(WrapAngle, MapsIntoHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_angle(0.0), 0.0);
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi), kPi, 1e-12);
  EXPECT_NEAR(wrap_angle(2 * kPi + 0.25), 0.25, 1e-12);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-100, 100);
    const double w = wrap_angle(a);
    EXPECT_GT(w, -kPi);
    EXPECT_LE(w, kPi);
    EXPECT_NEAR(std::remainder(a - w, kTwoPi), 0.0, 1e-9);
  }
}

TEST(Egocentric, CollinearIdentity) {
  const auto e = to_egocentric({0, 0, 0}, {1, 0, 0});
  EXPECT_DOUBLE_EQ(e.r, 1.0);
  EXPECT_DOUBLE_EQ(e.theta, 0.0);
  EXPECT_DOUBLE_EQ(e.delta, 0.0);
}

TEST(Egocentric, TargetToTheLeftFacingAlongLineOfSight) {
  const auto e = to_egocentric({0, 0, 0}, {0, 1, kPi / 2});
  EXPECT_NEAR(e.r, 1.0, 1e-12);
  EXPECT_NEAR(e.theta, 0.0, 1e-12);
  EXPECT_NEAR(e.delta, -kPi / 2, 1e-12);
}

TEST(Egocentric, GeneralPoseMatchesHandComputation) {
  const auto e = to_egocentric({2, 1, 0.3}, {5, 4, 1.0});
  const double bearing = std::atan2(3.0, 3.0);
  EXPECT_NEAR(e.r, std::sqrt(18.0), 1e-12);
  EXPECT_NEAR(e.theta, 1.0 - bearing, 1e-12);
  EXPECT_NEAR(e.delta, 0.3 - bearing, 1e-12);
  EXPECT_NEAR(e.r, 4.2426, 1e-4);
  EXPECT_NEAR(e.theta, 0.2146, 1e-4);
  EXPECT_NEAR(e.delta, -0.4854, 1e-4);
}

TEST(Egocentric, RoundTripRandomPoses) {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const Pose2D robot = make_pose(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-kPi, kPi));
    const Pose2D target = make_pose(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-kPi, kPi));
    const auto back = from_egocentric(robot, to_egocentric(robot, target));
    EXPECT_NEAR(back.x, target.x, 1e-9);
    EXPECT_NEAR(back.y, target.y, 1e-9);
    EXPECT_NEAR(wrap_angle(back.heading - target.heading), 0.0, 1e-9);
  }
}

TEST(FrameTransform, ComposeAndInverse) {
  const auto a = FrameTransform::from_pose({1, 2, 0.5}, "robot", "odom");
  const auto inv = a.inverse();
  const Point2 p{0.3, -1.2};
  const Point2 q = inv.apply(a.apply(p));
  EXPECT_NEAR(q.x, p.x, 1e-12);
  EXPECT_NEAR(q.y, p.y, 1e-12);
  const auto id = compose(inv, a);
  EXPECT_EQ(id.source, "robot");
  EXPECT_EQ(id.target, "robot");
  EXPECT_NEAR(id.rotation, 0.0, 1e-12);
  EXPECT_THROW(compose(a, a), InvalidArgument);
}

TEST(FrameTransform, MatchesRobotToOdom) {
  const Pose2D robot{1.5, -2.0, 1.1};
  const auto tf = FrameTransform::from_pose(robot, "robot", "odom");
  const Point2 a = tf.apply(Point2{2, 1}), b = robot_to_odom(robot, {2, 1});
  EXPECT_NEAR(a.x, b.x, 1e-12);
  EXPECT_NEAR(a.y, b.y, 1e-12);
  const Point2 c = odom_to_robot(robot, b);
  EXPECT_NEAR(c.x, 2.0, 1e-12);
  EXPECT_NEAR(c.y, 1.0, 1e-12);
}

namespace {

CameraModel default_camera() { return CameraModel{}; }

}  // namespace

TEST(Projection, OpticalAxisGroundPointMapsToPrincipalPoint) {
  const auto cam = default_camera();
  const double d = cam.mount_height / std::tan(cam.mount_pitch);
  const auto px = ground_to_pixel(cam, {0, 0, 0}, {d, 0});
  ASSERT_TRUE(px);
  EXPECT_NEAR(px->x, cam.cx, 0.5);
  EXPECT_NEAR(px->y, cam.cy, 0.5);
  const auto g = pixel_to_ground(cam, {0, 0, 0}, {cam.cx, cam.cy});
  ASSERT_TRUE(g);
  EXPECT_NEAR(g->x, d, 1e-9);
  EXPECT_NEAR(g->y, 0.0, 1e-9);
}

TEST(Projection, PointBehindRobotIsOutOfView) {
  EXPECT_FALSE(ground_to_pixel(default_camera(), {0, 0, 0}, {-1, 0}));
}

TEST(Projection, TopRowWithSmallPitchIsAboveHorizon) {
  auto cam = default_camera();
  cam.mount_pitch = 0.05;
  EXPECT_FALSE(pixel_to_ground(cam, {0, 0, 0}, {cam.cx, 0.0}));
}

TEST(Projection, MatchesIndependentPinholeComputation) {
  CameraModel cam;
  cam.fx = cam.fy = 300;
  cam.cx = 320;
  cam.cy = 240;
  cam.width = 640;
  cam.height = 480;
  cam.mount_height = 0.5;
  cam.mount_pitch = 0.3;
  // Camera at (0, 0, 0.5) looking along +x, pitched down by 0.3 rad. Optical
  // axis (c, 0, -s); image-down axis (-s, 0, -c); image-right axis (0, -1, 0).
  const double px = 3.0, py = 0.0, pz = -0.5;
  const double c = std::cos(0.3), s = std::sin(0.3);
  const double zc = c * px - s * pz;
  const double yc = -s * px - c * pz;
  const double xc = -py;
  const double u = 320 + 300 * xc / zc, v = 240 + 300 * yc / zc;
  const auto got = ground_to_pixel(cam, {0, 0, 0}, {3, 0});
  ASSERT_TRUE(got);
  EXPECT_NEAR(got->x, u, 1e-6);
  EXPECT_NEAR(got->y, v, 1e-6);
}

TEST(Projection, RoundTripRandomPoints) {
  Rng rng(5);
  for (int k = 0; k < 10; ++k) {
    CameraModel cam;
    cam.fx = rng.uniform(50, 400);
    cam.fy = rng.uniform(50, 400);
    cam.width = 320;
    cam.height = 240;
    cam.cx = rng.uniform(100, 220);
    cam.cy = rng.uniform(80, 160);
    cam.mount_height = rng.uniform(0.3, 1.5);
    cam.mount_pitch = rng.uniform(0.1, 0.8);
    cam.mount_offset = rng.uniform(-0.2, 0.3);
    const Pose2D robot = make_pose(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-kPi, kPi));
    int n = 0;
    while (n < 100) {
      const Pixel px{rng.uniform(0, cam.width), rng.uniform(0, cam.height)};
      const auto g = pixel_to_ground(cam, robot, px);
      if (!g) continue;
      const auto back = ground_to_pixel(cam, robot, *g);
      ASSERT_TRUE(back);
      const auto g2 = pixel_to_ground(cam, robot, *back);
      ASSERT_TRUE(g2);
      EXPECT_LT(distance(*g, *g2), 1e-6);
      ++n;
    }
  }
}

TEST(Camera, ValidateRejectsBadModels) {
  CameraModel cam;
  EXPECT_NO_THROW(cam.validate());
  cam.fx = 0;
  EXPECT_THROW(cam.validate(), InvalidArgument);
  cam = {};
  cam.cx = 500;
  EXPECT_THROW(cam.validate(), InvalidArgument);
  cam = {};
  cam.mount_height = 0;
  EXPECT_THROW(cam.validate(), InvalidArgument);
}
