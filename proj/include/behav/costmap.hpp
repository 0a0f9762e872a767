#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "behav/errors.hpp"
#include "behav/geometry.hpp"
#include "behav/instruction.hpp"
#include "behav/raster.hpp"
#include "behav/sensor.hpp"

namespace behav {

// Per-label likelihood that each pixel belongs to `label`.
struct SegmentationMap {
  ProbRaster values;
  std::string label;

  int width() const { return values.width(); }
  int height() const { return values.height(); }
};

// Behavioral cost raster in [0, 1].
struct CostMap {
  ProbRaster values;

  CostMap() = default;
  explicit CostMap(ProbRaster v) : values(std::move(v)) {}
  CostMap(int width, int height, double fill = 0.0) : values(width, height, fill) {}

  int width() const { return values.width(); }
  int height() const { return values.height(); }
  friend bool operator==(const CostMap&, const CostMap&) = default;
};

class SegmentationBackend {
 public:
  virtual ~SegmentationBackend() = default;
  virtual std::vector<SegmentationMap> segment(const SensorFrame& frame,
                                               const std::vector<std::string>& labels) = 0;
};

// Runs the backend and enforces its contract: one map per label, in order,
// matching the frame size, values clamped into [0, 1].
inline std::vector<SegmentationMap> segment(const SensorFrame& frame,
                                            const std::vector<std::string>& labels,
                                            SegmentationBackend& backend) {
  if (labels.empty()) throw EmptyList("segment: no labels");
  auto maps = backend.segment(frame, labels);
  if (maps.size() != labels.size())
    throw DimensionMismatch("segment: expected " + std::to_string(labels.size()) + " maps, got " +
                            std::to_string(maps.size()));
  for (std::size_t i = 0; i < maps.size(); ++i) {
    auto& m = maps[i];
    if (m.width() != frame.width() || m.height() != frame.height())
      throw DimensionMismatch("segment: map '" + labels[i] + "' has wrong dimensions");
    for (auto& v : m.values.values()) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    m.label = labels[i];
  }
  return maps;
}

// Which probability scales a target's likelihood. The default uses the
// probability that the action is undesirable, so prohibitions cost the most.
enum class CostMultiplier { undesirability, desirability };

inline CostMap target_cost(const SegmentationMap& s, const BehaviorRule& rule,
                           CostMultiplier mode = CostMultiplier::undesirability) {
  const double m = mode == CostMultiplier::undesirability ? rule.undesirability : rule.desirability;
  CostMap c(s.width(), s.height());
  auto& out = c.values.values();
  const auto& in = s.values.values();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::clamp(m * in[i], 0.0, 1.0);
  return c;
}

// Pointwise maximum.
inline CostMap fuse(const std::vector<CostMap>& maps) {
  if (maps.empty()) throw EmptyList("fuse: no maps");
  CostMap out = maps.front();
  for (std::size_t k = 1; k < maps.size(); ++k) {
    if (!maps[k].values.same_shape(out.values)) throw DimensionMismatch("fuse: shape mismatch");
    auto& o = out.values.values();
    const auto& m = maps[k].values.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::max(o[i], m[i]);
  }
  return out;
}

inline double max_cost(const CostMap& c, std::optional<PixelRect> roi = std::nullopt) {
  double m = 0.0;
  if (!roi) {
    for (double v : c.values.values()) m = std::max(m, v);
    return m;
  }
  const int x0 = std::max(0, roi->x), y0 = std::max(0, roi->y);
  const int x1 = std::min(c.width(), roi->x + roi->w), y1 = std::min(c.height(), roi->y + roi->h);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m = std::max(m, c.values.at(x, y));
  return m;
}

// Bilinear lookup; pixel centers sit on integer coordinates. Anything
// outside [0, W) x [0, H) costs 0.
inline double sample(const CostMap& c, Pixel px) {
  const int w = c.width(), h = c.height();
  if (!(px.x >= 0 && px.x < w && px.y >= 0 && px.y < h)) return 0.0;
  const int x0 = static_cast<int>(px.x), y0 = static_cast<int>(px.y);
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double ax = px.x - x0, ay = px.y - y0;
  const auto& r = c.values;
  const double top = (1 - ax) * r.at(x0, y0) + ax * r.at(x1, y0);
  const double bot = (1 - ax) * r.at(x0, y1) + ax * r.at(x1, y1);
  return (1 - ay) * top + ay * bot;
}

// Full C_behav for one frame: segment every behavioral target, weight by its
// rule, fuse. Empty rule list gives the zero map.
inline CostMap behavior_costmap(const SensorFrame& frame, const std::vector<BehaviorRule>& rules,
                                SegmentationBackend& backend,
                                CostMultiplier mode = CostMultiplier::undesirability) {
  if (rules.empty()) return CostMap(frame.width(), frame.height());
  std::vector<std::string> labels;
  for (const auto& r : rules) labels.push_back(r.target);
  const auto maps = segment(frame, labels, backend);
  std::vector<CostMap> costs;
  costs.reserve(maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i) costs.push_back(target_cost(maps[i], rules[i], mode));
  return fuse(costs);
}

}  // namespace behav
