#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "behav/geometry.hpp"
#include "behav/raster.hpp"

namespace behav {

using LabelId = std::uint16_t;
inline constexpr LabelId kSkyLabel = 0;

// One camera + lidar capture. The label image stands in for the RGB frame:
// each pixel holds an index into `label_names`.
struct SensorFrame {
  Raster<LabelId> label_image;
  std::shared_ptr<const std::vector<std::string>> label_names;
  std::vector<Point2> lidar_points;  // robot frame
  Pose2D pose;                       // odom pose at capture
  double t = 0.0;

  int width() const { return label_image.width(); }
  int height() const { return label_image.height(); }
};

}  // namespace behav
