#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "behav/landmark.hpp"
#include "behav/simulator.hpp"

using namespace behav;

namespace {

World door_world(Point2 door) {
  World w;
  w.default_label = "concrete";
  w.landmarks.push_back({"red door", door, {door.x - 0.25, door.y - 0.25, door.x + 0.25, door.y + 0.25}});
  w.finalize();
  return w;
}

SensorFrame frame_at(const World& w, const Pose2D& pose, const CameraModel& cam, double t = 0.0) {
  return capture(w, pose, cam, t, 8, 10.0);
}

PromptSet prompts() {
  PromptSet p;
  p.frontier_prompt = "Where is the {landmark}?";
  return p;
}

}  // namespace

TEST(Detect, OracleInViewGivesExactProjection) {
  const CameraModel cam;
  const auto w = door_world({4, 0.5});
  OracleLandmarkDetector det(&w, cam);
  const auto f = frame_at(w, {0, 0, 0}, cam, 1.5);
  const auto px = detect(f, "the red door", prompts(), det);
  ASSERT_TRUE(px);
  const auto truth = ground_to_pixel(cam, {0, 0, 0}, {4, 0.5});
  EXPECT_DOUBLE_EQ(px->x_img, truth->x);
  EXPECT_DOUBLE_EQ(px->y_img, truth->y);
  EXPECT_DOUBLE_EQ(px->timestamp, 1.5);
}

TEST(Detect, BehindRobotIsNotFound) {
  const CameraModel cam;
  const auto w = door_world({-4, 0});
  OracleLandmarkDetector det(&w, cam);
  EXPECT_FALSE(detect(frame_at(w, {0, 0, 0}, cam), "red door", prompts(), det));
  EXPECT_FALSE(detect(frame_at(w, {0, 0, 0}, cam), "blue window", prompts(), det));
  EXPECT_THROW(detect(frame_at(w, {0, 0, 0}, cam), "  ", prompts(), det), InvalidArgument);
}

TEST(Detect, SeededNoiseIsReproducible) {
  const CameraModel cam;
  const auto w = door_world({4, 0});
  OracleLandmarkDetector a(&w, cam, 5.0, 42), b(&w, cam, 5.0, 42);
  const auto f = frame_at(w, {0, 0, 0}, cam);
  const auto pa = detect(f, "red door", prompts(), a), pb = detect(f, "red door", prompts(), b);
  ASSERT_TRUE(pa && pb);
  EXPECT_EQ(pa->x_img, pb->x_img);
  EXPECT_EQ(pa->y_img, pb->y_img);
  // Offset equals the first two draws of the seeded generator.
  Rng rng(42);
  const double dx = 5.0 * rng.normal(), dy = 5.0 * rng.normal();
  const auto truth = ground_to_pixel(cam, {0, 0, 0}, {4, 0});
  EXPECT_NEAR(pa->x_img, std::clamp(truth->x + dx, 0.0, 160.0), 1e-12);
  EXPECT_NEAR(pa->y_img, std::clamp(truth->y + dy, 0.0, 120.0), 1e-12);
}

namespace {

class BadBackend : public LandmarkBackend {
 public:
  std::optional<Pixel> locate(const SensorFrame&, const std::string&, const std::string& prompt) override {
    last_prompt = prompt;
    return Pixel{500, 10};
  }
  std::string last_prompt;
};

}  // namespace

TEST(Detect, OutOfImagePixelIsMalformed) {
  const CameraModel cam;
  const auto w = door_world({4, 0});
  BadBackend be;
  EXPECT_THROW(detect(frame_at(w, {0, 0, 0}, cam), "red door", prompts(), be), MalformedResponse);
  EXPECT_EQ(be.last_prompt, "Where is the red door?");
}

TEST(PixelGoalToOdom, AxisPixelGivesAxisGroundPoint) {
  const CameraModel cam;
  const auto g = pixel_goal_to_odom({cam.cx, cam.cy, 0.0}, cam, {0, 0, 0});
  EXPECT_FALSE(g.bearing_only);
  EXPECT_NEAR(g.position.x, cam.mount_height / std::tan(cam.mount_pitch), 1e-9);
  EXPECT_NEAR(g.position.y, 0.0, 1e-9);
}

TEST(PixelGoalToOdom, AboveHorizonGivesBearingOnlyGoal) {
  CameraModel cam;
  cam.mount_pitch = 0.05;
  const auto g = pixel_goal_to_odom({20.0, 0.0, 3.0}, cam, {1, 2, 0.5}, 10.0);
  EXPECT_TRUE(g.bearing_only);
  EXPECT_NEAR(distance(g.position, {1, 2}), 10.0, 1e-9);
  const double az = pixel_azimuth(cam, {20.0, 0.0});
  EXPECT_NEAR(std::atan2(g.position.y - 2, g.position.x - 1), 0.5 + az, 1e-9);
  EXPECT_EQ(g.source_timestamp, 3.0);
}

TEST(PixelGoalToOdom, MatchesPixelToGround) {
  const CameraModel cam;
  const Pose2D robot{3, -1, 2.0};
  for (double x : {10.0, 80.0, 150.0})
    for (double y : {70.0, 100.0, 119.0}) {
      const auto g = pixel_goal_to_odom({x, y, 0}, cam, robot);
      const auto ref = pixel_to_ground(cam, robot, {x, y});
      ASSERT_TRUE(ref);
      EXPECT_EQ(g.position, *ref);
    }
}

TEST(GoalLock, Transitions) {
  GoalLock lock;
  lock.landmark_count = 2;
  const OdomGoal g{{5, 0}, false, 0};
  lock = update_goal_lock(lock, g, {0, 0, 0});
  ASSERT_TRUE(lock.current);
  EXPECT_EQ(lock.current->position, (Point2{5, 0}));
  lock = update_goal_lock(lock, std::nullopt, {1, 0, 0});
  ASSERT_TRUE(lock.current);
  EXPECT_EQ(lock.current->position, (Point2{5, 0}));
  lock = update_goal_lock(lock, std::nullopt, {4.8, 0, 0});
  EXPECT_EQ(lock.landmark_index, 1u);
  EXPECT_FALSE(lock.current);
  EXPECT_FALSE(lock.finished());
}

TEST(GoalLock, BearingOnlyGoalNeverCountsAsReached) {
  GoalLock lock;
  lock = update_goal_lock(lock, OdomGoal{{0.1, 0}, true, 0}, {0, 0, 0});
  EXPECT_EQ(lock.landmark_index, 0u);
  EXPECT_TRUE(lock.current);
}

TEST(EvalPixelError, Examples) {
  EXPECT_EQ(eval_pixel_error({{1, 2, 0}}, {{1, 2}}), 0.0);
  EXPECT_DOUBLE_EQ(eval_pixel_error({{0, 0, 0}}, {{3, 4}}), 5.0);
  // Errors 5, 0, 13, 2 -> mean 5.
  EXPECT_DOUBLE_EQ(eval_pixel_error({{0, 0, 0}, {7, 7, 0}, {0, 0, 0}, {1, 1, 0}}, {{3, 4}, {7, 7}, {5, 12}, {1, 3}}),
                   5.0);
  EXPECT_THROW(eval_pixel_error({{0, 0, 0}}, {}), LengthMismatch);
}

TEST(EvalFscore, Examples) {
  const PixelRect r{10, 10, 10, 10};
  const PixelGoal in{15, 15, 0}, out{50, 50, 0};
  EXPECT_DOUBLE_EQ(eval_fscore({in, in}, {r, r}), 1.0);
  EXPECT_DOUBLE_EQ(eval_fscore({std::nullopt, std::nullopt}, {r, r}), 0.0);
  EXPECT_NEAR(eval_fscore({in, in, out, std::nullopt}, {r, r, r, r}), 2.0 / 3.0, 1e-12);
}

TEST(LandmarkDataset, LoadsRecordsAndPredictions) {
  std::istringstream ds(R"({"image":"a.png","landmark":"door","rect":[1,2,3,4]}
{"image":"b.png","landmark":"door","rect":null}
)");
  const auto recs = load_landmark_dataset(ds);
  ASSERT_EQ(recs.size(), 2u);
  ASSERT_TRUE(recs[0].rect);
  EXPECT_EQ(recs[0].rect->h, 4);
  EXPECT_FALSE(recs[1].rect);
  std::istringstream pr(R"({"x":2,"y":3}
{"found":false}
)");
  const auto preds = load_landmark_predictions(pr);
  ASSERT_EQ(preds.size(), 2u);
  EXPECT_TRUE(preds[0]);
  EXPECT_FALSE(preds[1]);
}

TEST(LandmarkPixelBox, ContainsProjectedCenter) {
  const CameraModel cam;
  const auto w = door_world({4, 0.3});
  const auto box = landmark_pixel_box(cam, {0, 0, 0}, w.landmarks[0]);
  ASSERT_TRUE(box);
  const auto c = ground_to_pixel(cam, {0, 0, 0}, {4, 0.3});
  EXPECT_TRUE(box->contains(c->x, c->y));
}
