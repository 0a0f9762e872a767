#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "behav/errors.hpp"
#include "behav/geometry.hpp"
#include "behav/instruction.hpp"
#include "behav/random.hpp"
#include "behav/sensor.hpp"
#include "behav/simulator.hpp"
#include "behav/text.hpp"

namespace behav {

struct PixelGoal {
  double x_img = 0.0;
  double y_img = 0.0;
  double timestamp = 0.0;

  Pixel pixel() const { return {x_img, y_img}; }
};

struct OdomGoal {
  Point2 position{};
  bool bearing_only = false;
  double source_timestamp = 0.0;
};

// Committed navigation goal. `current` survives missed detections and is
// cleared only when the robot arrives, which advances `landmark_index`.
struct GoalLock {
  std::optional<OdomGoal> current;
  std::size_t landmark_index = 0;
  std::size_t landmark_count = 1;
  double reached_threshold = 0.5;

  bool finished() const { return landmark_index >= landmark_count; }
};

// Vision-language landmark localizer. Returns nullopt when the landmark is
// not visible; throws BackendUnavailable / MalformedResponse on failure.
class LandmarkBackend {
 public:
  virtual ~LandmarkBackend() = default;
  virtual std::optional<Pixel> locate(const SensorFrame& frame, const std::string& landmark_text,
                                      const std::string& prompt) = 0;
};

inline std::optional<PixelGoal> detect(const SensorFrame& frame, const std::string& landmark_text,
                                       const PromptSet& prompts, LandmarkBackend& backend) {
  if (text::normalize(landmark_text).empty()) throw InvalidArgument("detect: empty landmark text");
  const auto px = backend.locate(frame, landmark_text, render_frontier_prompt(prompts, landmark_text));
  if (!px) return std::nullopt;
  if (!(px->x >= 0 && px->x < frame.width())) throw MalformedResponse("x out of bounds");
  if (!(px->y >= 0 && px->y < frame.height())) throw MalformedResponse("y out of bounds");
  return PixelGoal{px->x, px->y, frame.t};
}

// Ground intersection of the pixel ray; above the horizon, a bearing-only
// goal `default_range` meters along the ray's azimuth.
inline OdomGoal pixel_goal_to_odom(const PixelGoal& px, const CameraModel& cam, const Pose2D& robot,
                                   double default_range = 10.0) {
  if (auto g = pixel_to_ground(cam, robot, px.pixel())) return {*g, false, px.timestamp};
  const double az = pixel_azimuth(cam, px.pixel());
  const Point2 p = robot_to_odom(robot, {default_range * std::cos(az), default_range * std::sin(az)});
  return {p, true, px.timestamp};
}

inline GoalLock update_goal_lock(GoalLock lock, const std::optional<OdomGoal>& detection,
                                 const Pose2D& robot) {
  if (lock.finished()) return lock;
  if (detection) lock.current = detection;
  if (lock.current && !lock.current->bearing_only &&
      distance(robot.position(), lock.current->position) < lock.reached_threshold) {
    ++lock.landmark_index;
    lock.current.reset();
  }
  return lock;
}

// Ground-truth landmark localizer: projects the landmark's world point and
// adds seeded Gaussian pixel noise.
class OracleLandmarkDetector : public LandmarkBackend {
 public:
  OracleLandmarkDetector(const World* world, CameraModel cam, double noise_px = 0.0,
                         std::uint64_t seed = 0)
      : world_(world), cam_(cam), noise_(noise_px), rng_(seed) {}

  std::optional<Pixel> locate(const SensorFrame& frame, const std::string& landmark_text,
                              const std::string& /*prompt*/) override {
    const Landmark* lm = nullptr;
    for (const auto& l : world_->landmarks)
      if (text::labels_match(l.text, landmark_text)) {
        lm = &l;
        break;
      }
    if (!lm) return std::nullopt;
    auto px = ground_to_pixel(cam_, frame.pose, lm->position);
    if (!px) return std::nullopt;
    if (noise_ > 0) {
      px->x += noise_ * rng_.normal();
      px->y += noise_ * rng_.normal();
      px->x = std::clamp(px->x, 0.0, std::nextafter(static_cast<double>(cam_.width), 0.0));
      px->y = std::clamp(px->y, 0.0, std::nextafter(static_cast<double>(cam_.height), 0.0));
    }
    return px;
  }

 private:
  const World* world_;
  CameraModel cam_;
  double noise_;
  Rng rng_;
};

// Pixel bounding box of a landmark's world footprint; nullopt when no
// corner is in view.
inline std::optional<PixelRect> landmark_pixel_box(const CameraModel& cam, const Pose2D& robot,
                                                   const Landmark& lm) {
  const Point2 corners[] = {{lm.footprint.xmin, lm.footprint.ymin},
                            {lm.footprint.xmax, lm.footprint.ymin},
                            {lm.footprint.xmax, lm.footprint.ymax},
                            {lm.footprint.xmin, lm.footprint.ymax}};
  double x0 = 1e18, y0 = 1e18, x1 = -1e18, y1 = -1e18;
  bool any = false;
  for (auto c : corners) {
    if (auto p = ground_to_pixel(cam, robot, c)) {
      any = true;
      x0 = std::min(x0, p->x);
      y0 = std::min(y0, p->y);
      x1 = std::max(x1, p->x);
      y1 = std::max(y1, p->y);
    }
  }
  if (!any) return std::nullopt;
  const int ix = static_cast<int>(std::floor(x0)), iy = static_cast<int>(std::floor(y0));
  return PixelRect{ix, iy, static_cast<int>(std::floor(x1)) - ix + 1,
                   static_cast<int>(std::floor(y1)) - iy + 1};
}

// ---------------------------------------------------------------------------
// Detection quality

inline double eval_pixel_error(const std::vector<PixelGoal>& predictions,
                               const std::vector<Pixel>& ground_truth) {
  if (predictions.size() != ground_truth.size())
    throw LengthMismatch("eval_pixel_error: length mismatch");
  if (predictions.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    sum += std::hypot(predictions[i].x_img - ground_truth[i].x, predictions[i].y_img - ground_truth[i].y);
  return sum / static_cast<double>(predictions.size());
}

struct DetectionCounts {
  int tp = 0, fp = 0, fn = 0;
};

// Per image: a prediction inside the region is a true positive; a prediction
// outside it, or with no region, a false positive; NotFound where a region
// exists, a false negative.
inline DetectionCounts count_detections(const std::vector<std::optional<PixelGoal>>& predictions,
                                        const std::vector<std::optional<PixelRect>>& regions) {
  if (predictions.size() != regions.size()) throw LengthMismatch("eval_fscore: length mismatch");
  DetectionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    const auto& r = regions[i];
    if (p) {
      if (r && r->contains(p->x_img, p->y_img)) ++c.tp;
      else ++c.fp;
    } else if (r) {
      ++c.fn;
    }
  }
  return c;
}

inline double eval_fscore(const std::vector<std::optional<PixelGoal>>& predictions,
                          const std::vector<std::optional<PixelRect>>& regions) {
  const auto c = count_detections(predictions, regions);
  const double p = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
  const double r = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
  return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
}

// Evaluation dataset: one JSON object per line,
// {"image": path, "landmark": text, "rect": [x, y, w, h]}; "rect" may be
// null when the landmark is absent from the image.
struct LandmarkRecord {
  std::string image;
  std::string landmark;
  std::optional<PixelRect> rect;
};

inline std::vector<LandmarkRecord> load_landmark_dataset(std::istream& in) {
  std::vector<LandmarkRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("image") || !j.contains("landmark"))
      throw InvalidArgument("landmark dataset line " + std::to_string(lineno) + ": bad record");
    LandmarkRecord r{j.at("image").get<std::string>(), j.at("landmark").get<std::string>(), {}};
    if (j.contains("rect") && !j.at("rect").is_null()) {
      const auto& a = j.at("rect");
      if (!a.is_array() || a.size() != 4)
        throw InvalidArgument("landmark dataset line " + std::to_string(lineno) + ": rect needs 4 values");
      r.rect = PixelRect{a[0].get<int>(), a[1].get<int>(), a[2].get<int>(), a[3].get<int>()};
    }
    out.push_back(std::move(r));
  }
  return out;
}

// Prediction file: {"image": path, "x": .., "y": ..} or {"image": path, "found": false}.
inline std::vector<std::optional<PixelGoal>> load_landmark_predictions(std::istream& in) {
  std::vector<std::optional<PixelGoal>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto r = validate_landmark(line);
    if (r.pixel) out.push_back(PixelGoal{r.pixel->x, r.pixel->y, 0.0});
    else out.push_back(std::nullopt);
  }
  return out;
}

inline Pixel rect_center(const PixelRect& r) { return {r.x + r.w / 2.0, r.y + r.h / 2.0}; }

}  // namespace behav
