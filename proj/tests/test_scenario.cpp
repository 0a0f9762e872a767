#include <cstdio>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "behav/behav.hpp"

using namespace behav;
namespace fs = std::filesystem;

namespace {

const std::string kScenarioDir = std::string(BEHAV_SOURCE_DIR) + "/scenarios";

std::string scenario_path(const std::string& name) { return kScenarioDir + "/" + name + ".json"; }

RunLog small_log(int ticks) {
  RunLog log;
  log.scenario = "unit";
  log.config_digest = "abc";
  log.rules = {make_rule("stay away from", "grass", 0.1)};
  log.reference_path = {{0, 0}, {1, 0}};
  for (int i = 0; i < ticks; ++i) {
    TickRecord t;
    t.tick = i;
    t.t = 0.1 * i;
    t.pose = {0.123456789012 * i, -0.1 / 3.0 * i, 0.7 / 3.0};
    t.v = 0.987654321;
    t.omega = -1.0 / 7.0;
    t.cost = {1.5, 0.25, 2.0 / 3.0, 2.4166666666666665};
    t.max_c = 0.3;
    t.capped_v_max = 1.0;
    t.gait_caution = i % 2 == 1;
    t.terrain = "sidewalk";
    if (i > 0) t.goal = Point2{5.0, 1.0 / 3.0};
    log.ticks.push_back(t);
  }
  log.end_reason = "timeout";
  return log;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Scenario, ShippedTerrainForkLoads) {
  const auto s = load_scenario(scenario_path("terrain_fork"));
  EXPECT_EQ(s.name, "terrain_fork");
  EXPECT_FALSE(s.world.landmarks.empty());
  EXPECT_FALSE(s.reference_path.empty());
  EXPECT_FALSE(s.prompts.decompose_prompt.empty());
  EXPECT_NO_THROW(s.camera.validate());
  EXPECT_EQ(s.config_digest.size(), 64u);
}

TEST(Scenario, AllShippedScenariosLoad) {
  for (const char* name :
       {"terrain_fork", "crosswalk_stop_gesture", "sand_grass_puddles", "sidewalk_pedestrians", "concrete_stairs_grass"})
    EXPECT_NO_THROW(load_scenario(scenario_path(name))) << name;
}

TEST(Scenario, MissingCameraIsInvalid) {
  auto doc = read_json_file(scenario_path("terrain_fork"));
  doc.erase("camera");
  EXPECT_THROW(parse_scenario(doc, kScenarioDir), InvalidScenario);
}

TEST(Scenario, UnknownFieldsAreRejected) {
  auto doc = read_json_file(scenario_path("terrain_fork"));
  doc["colour"] = "blue";
  EXPECT_THROW(parse_scenario(doc, kScenarioDir), InvalidScenario);
  doc = read_json_file(scenario_path("terrain_fork"));
  doc["planner"]["w_behaviour"] = 1.0;
  EXPECT_THROW(parse_scenario(doc, kScenarioDir), InvalidScenario);
  doc = read_json_file(scenario_path("terrain_fork"));
  doc["version"] = 2;
  EXPECT_THROW(parse_scenario(doc, kScenarioDir), InvalidScenario);
  doc = read_json_file(scenario_path("terrain_fork"));
  doc.erase("seeds");
  EXPECT_THROW(parse_scenario(doc, kScenarioDir), InvalidScenario);
}

TEST(Scenario, OverridesApplyAndChangeDigest) {
  const auto base = load_scenario(scenario_path("terrain_fork"));
  const auto s = load_scenario(scenario_path("terrain_fork"), {"planner.w_behav=0", "seeds.optimizer=99",
                                                               "world.landmarks.0.text=\"blue door\""});
  EXPECT_EQ(s.planner.w_behav, 0.0);
  EXPECT_EQ(s.seeds.optimizer, 99u);
  EXPECT_EQ(s.world.landmarks[0].text, "blue door");
  EXPECT_NE(s.config_digest, base.config_digest);
  EXPECT_THROW(load_scenario(scenario_path("terrain_fork"), {"planner.w_behav"}), InvalidScenario);
  EXPECT_THROW(load_scenario(scenario_path("terrain_fork"), {"world.landmarks.7.text=x"}), InvalidScenario);
  EXPECT_THROW(load_scenario(kScenarioDir + "/does_not_exist.json"), InvalidScenario);
}

TEST(Run, UnreachableLandmarkTimesOut) {
  const auto s = load_scenario(scenario_path("terrain_fork"),
                               {"world.landmarks.0.position=[60,0]", "world.landmarks.0.footprint=[59.7,-0.3,60.3,0.3]",
                                "timeout_s=10"});
  const auto r = run_scenario(s);
  EXPECT_FALSE(r.summary.success);
  EXPECT_FALSE(r.summary.reached);
  EXPECT_EQ(r.log.end_reason, "timeout");
  EXPECT_GT(r.log.ticks.back().t, 10.0 - 1e-9);
}

TEST(Run, TerrainForkSucceedsAndReplaysExactly) {
  const auto s = load_scenario(scenario_path("terrain_fork"));
  const auto r = run_scenario(s);
  EXPECT_TRUE(r.summary.success);
  EXPECT_GE(r.summary.bfa, 90.0);
  EXPECT_EQ(r.log.end_reason, "reached");

  std::stringstream ss;
  write_run_log(ss, r.log);
  const auto back = read_run_log(ss);
  auto expected = r.summary;
  expected.mean_tick_wall_ms = 0.0;
  EXPECT_EQ(summarize(back), expected);

  // A stricter compliance threshold lowers the recomputed BFA.
  auto strict = back.metrics;
  strict.u_threshold = 0.05;
  EXPECT_LT(summarize(back, strict).bfa, expected.bfa);
}

TEST(RunLog, RoundTripPreservesValues) {
  const auto log = small_log(5);
  std::stringstream ss;
  write_run_log(ss, log);
  const auto text = ss.str();
  const auto back = read_run_log(ss);
  EXPECT_EQ(back.scenario, "unit");
  EXPECT_EQ(back.end_reason, "timeout");
  ASSERT_EQ(back.ticks.size(), 5u);
  ASSERT_EQ(back.rules.size(), 1u);
  EXPECT_EQ(back.rules[0].undesirability, log.rules[0].undesirability);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto &a = log.ticks[i], &b = back.ticks[i];
    EXPECT_EQ(a.pose.x, b.pose.x);
    EXPECT_EQ(a.pose.y, b.pose.y);
    EXPECT_EQ(a.pose.heading, b.pose.heading);
    EXPECT_EQ(a.omega, b.omega);
    EXPECT_EQ(a.cost.behavior, b.cost.behavior);
    EXPECT_EQ(a.goal, b.goal);
    EXPECT_EQ(a.gait_caution, b.gait_caution);
  }
  std::stringstream again;
  write_run_log(again, back);
  EXPECT_EQ(again.str(), text);
}

TEST(RunLog, TruncationAndGarbageAreCorrupt) {
  std::stringstream ss;
  write_run_log(ss, small_log(3));
  auto lines = split_lines(ss.str());
  ASSERT_EQ(lines.size(), 5u);  // header, 3 ticks, end

  std::string truncated;
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) truncated += lines[i] + "\n";
  std::istringstream t1(truncated);
  EXPECT_THROW(read_run_log(t1), CorruptLog);

  std::istringstream t2(lines[0] + "\n" + lines[1] + "\n{\"type\":\"tick\",\"tick\":1}\n" + lines[4] + "\n");
  EXPECT_THROW(read_run_log(t2), CorruptLog);
  std::istringstream t3(lines[1] + "\n");
  EXPECT_THROW(read_run_log(t3), CorruptLog);
  std::istringstream t4("");
  EXPECT_THROW(read_run_log(t4), CorruptLog);
  std::istringstream t5(lines[0] + "\n" + lines[1] + "\n" + lines[4] + "\n");  // end count mismatch
  EXPECT_THROW(read_run_log(t5), CorruptLog);
}

TEST(ExportCsv, LineCounts) {
  std::ostringstream three, empty;
  export_csv(three, small_log(3));
  export_csv(empty, small_log(0));
  EXPECT_EQ(split_lines(three.str()).size(), 4u);
  const auto e = split_lines(empty.str());
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0], "t,x,y,heading,v,omega,max_c,gait_caution");
}

TEST(ExportCsv, ValuesRoundTripAtNineDigits) {
  const auto log = small_log(6);
  std::ostringstream out;
  export_csv(out, log);
  const auto lines = split_lines(out.str());
  ASSERT_EQ(lines.size(), 7u);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    double t, x, y, h, v, w, c;
    int g;
    ASSERT_EQ(std::sscanf(lines[i].c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%d", &t, &x, &y, &h, &v, &w, &c, &g), 8);
    const auto& tk = log.ticks[i - 1];
    const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-8 * std::max(1.0, std::abs(b)); };
    EXPECT_TRUE(close(t, tk.t));
    EXPECT_TRUE(close(x, tk.pose.x));
    EXPECT_TRUE(close(y, tk.pose.y));
    EXPECT_TRUE(close(h, tk.pose.heading));
    EXPECT_TRUE(close(v, tk.v));
    EXPECT_TRUE(close(w, tk.omega));
    EXPECT_TRUE(close(c, tk.max_c));
    EXPECT_EQ(g, tk.gait_caution ? 1 : 0);
  }
}

TEST(Summary, JsonRoundTrip) {
  RunSummary s;
  s.success = true;
  s.bfa = 97.25;
  s.frechet = 0.5;
  s.ticks = 12;
  s.stop_ticks = 3;
  EXPECT_EQ(summary_from_json(summary_to_json(s)), s);
  s.frechet.reset();
  EXPECT_EQ(summary_from_json(summary_to_json(s)), s);
}
