#pragma once

#include "behav/codec.hpp"
#include "behav/costmap.hpp"
#include "behav/errors.hpp"
#include "behav/gateway.hpp"
#include "behav/geometry.hpp"
#include "behav/instruction.hpp"
#include "behav/landmark.hpp"
#include "behav/metrics.hpp"
#include "behav/optimizer.hpp"
#include "behav/planner.hpp"
#include "behav/random.hpp"
#include "behav/raster.hpp"
#include "behav/runlog.hpp"
#include "behav/runner.hpp"
#include "behav/scenario.hpp"
#include "behav/schema.hpp"
#include "behav/sensor.hpp"
#include "behav/simulator.hpp"
#include "behav/text.hpp"
