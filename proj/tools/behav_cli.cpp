#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "behav/behav.hpp"

namespace fs = std::filesystem;
using behav::ScenarioConfig;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitBackend = 3;

std::vector<std::string> scenario_overrides(const std::vector<std::string>& sets, const std::string& seed,
                                            const std::string& backend, const std::string& perception) {
  std::vector<std::string> out;
  if (!seed.empty())
    for (const char* k : {"sim", "optimizer", "noise"}) out.push_back(std::string("seeds.") + k + "=" + seed);
  if (!backend.empty()) out.push_back("backends.language=\"" + backend + "\"");
  if (!perception.empty()) out.push_back("backends.perception=\"" + perception + "\"");
  out.insert(out.end(), sets.begin(), sets.end());
  return out;
}

void print_summary(const behav::RunSummary& s) { std::cout << behav::summary_to_json(s).dump(2) << '\n'; }

int cmd_run(const std::string& path, const std::string& out_dir, const std::vector<std::string>& overrides,
            bool quiet) {
  const auto scenario = behav::load_scenario(path, overrides);
  behav::RunOptions opts;
  if (!quiet)
    opts.on_tick = [](const behav::TickRecord& t, const behav::TickDetail&) {
      if (t.tick % 50 == 0)
        std::cerr << "t=" << t.t << " x=" << t.pose.x << " y=" << t.pose.y << " v=" << t.v
                  << " terrain=" << t.terrain << '\n';
    };
  const auto result = behav::run_scenario(scenario, opts);
  if (result.mission.decompose_fell_back && scenario.backends.language != "oracle")
    std::cerr << "warning: instruction decomposition fell back to the built-in grammar\n";
  for (const auto& c : result.mission.skipped) std::cerr << "warning: skipped clause '" << c.clause << "'\n";
  behav::write_run_outputs(result, out_dir);
  print_summary(result.summary);
  return 0;
}

int cmd_replay(const std::string& log_path, const std::vector<std::string>& sets) {
  const auto log = behav::read_run_log(log_path);
  auto cfg = log.metrics;
  nlohmann::json m{{"u_threshold", cfg.u_threshold},
                   {"violation_u", cfg.violation_u},
                   {"stop_speed", cfg.stop_speed},
                   {"resample_spacing", cfg.resample_spacing}};
  nlohmann::json doc{{"metrics", m}};
  for (const auto& s : sets) {
    if (!s.starts_with("metrics.")) throw behav::InvalidArgument("replay only accepts metrics.* overrides");
    behav::apply_override(doc, s);
  }
  for (const auto& [k, v] : doc["metrics"].items())
    if (!m.contains(k) || !v.is_number()) throw behav::InvalidArgument("unknown metrics field '" + k + "'");
  cfg = {doc["metrics"]["u_threshold"].get<double>(), doc["metrics"]["violation_u"].get<double>(),
         doc["metrics"]["stop_speed"].get<double>(), doc["metrics"]["resample_spacing"].get<double>()};
  const auto summary = behav::summarize(log, cfg);
  print_summary(summary);

  const auto recorded = fs::path(log_path).parent_path() / "summary.json";
  if (sets.empty() && fs::exists(recorded)) {
    std::ifstream in(recorded);
    auto original = behav::summary_from_json(nlohmann::json::parse(in));
    original.mean_tick_wall_ms = 0.0;
    std::cerr << (original == summary ? "replay matches recorded summary\n" : "replay DIFFERS from recorded summary\n");
    if (!(original == summary)) return kExitInvalid;
  }
  return 0;
}

int cmd_export(const std::string& log_path, const std::string& out_path) {
  const auto log = behav::read_run_log(log_path);
  if (out_path.empty() || out_path == "-") {
    behav::export_csv(std::cout, log);
  } else {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw behav::InvalidArgument("cannot write " + out_path);
    behav::export_csv(out, log);
  }
  return 0;
}

int cmd_eval_landmarks(const std::string& dataset_path, const std::string& predictions_path) {
  std::ifstream ds(dataset_path), pr(predictions_path);
  if (!ds) throw behav::InvalidArgument("cannot read " + dataset_path);
  if (!pr) throw behav::InvalidArgument("cannot read " + predictions_path);
  const auto records = behav::load_landmark_dataset(ds);
  const auto preds = behav::load_landmark_predictions(pr);
  if (records.size() != preds.size()) throw behav::LengthMismatch("dataset and predictions differ in length");
  std::vector<std::optional<behav::PixelRect>> regions;
  std::vector<behav::PixelGoal> found;
  std::vector<behav::Pixel> truth;
  for (std::size_t i = 0; i < records.size(); ++i) {
    regions.push_back(records[i].rect);
    if (preds[i] && records[i].rect) {
      found.push_back(*preds[i]);
      truth.push_back(behav::rect_center(*records[i].rect));
    }
  }
  const auto counts = behav::count_detections(preds, regions);
  nlohmann::json j{{"images", records.size()},
                   {"tp", counts.tp},
                   {"fp", counts.fp},
                   {"fn", counts.fn},
                   {"f_score", behav::eval_fscore(preds, regions)},
                   {"pixel_error", behav::eval_pixel_error(found, truth)}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

// Fixture records for the language channel whose answers come from the
// built-in grammar and desirability table. An authoring aid for offline
// replay fixtures.
int cmd_stub_fixtures(const std::string& path, const std::string& out_path) {
  const auto s = behav::load_scenario(path);
  if (!s.backends.llm) throw behav::InvalidScenario("scenario has no backends.llm section");
  const auto& llm = *s.backends.llm;
  auto chat = [](const std::string& content) {
    return nlohmann::json{{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}}
        .dump();
  };
  const auto fb = behav::decompose_fallback(s.instruction);
  const auto& b = fb.bundle;
  const nlohmann::json decomposed{{"nav_actions", b.nav_actions},
                                  {"nav_landmarks", b.nav_landmarks},
                                  {"behav_actions", b.behav_actions},
                                  {"behav_targets", b.behav_targets}};
  const auto scores = behav::score_desirability_fallback(b.behav_actions, s.desirability_table);
  std::vector<behav::FixtureRecord> records;
  const auto req1 = behav::build_request(llm.provider, llm.model, behav::SchemaId::decompose,
                                         behav::render_decompose_prompt(s.prompts));
  records.push_back({behav::request_digest(req1), req1, chat(decomposed.dump()), 1.2});
  if (!b.behav_actions.empty()) {
    const auto req2 = behav::build_request(llm.provider, llm.model, behav::SchemaId::desirability,
                                           behav::render_action_prompt(s.prompts, b.behav_actions));
    records.push_back(
        {behav::request_digest(req2), req2, chat(nlohmann::json{{"values", scores.values}}.dump()), 0.8});
  }
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw behav::InvalidArgument("cannot write " + out_path);
  for (const auto& r : records) out << behav::Fixture::to_json(r).dump() << '\n';
  std::cout << "wrote " << records.size() << " records to " << out_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instruction-conditioned outdoor navigation: scenario runner and tools"};
  app.require_subcommand(1);

  std::string scenario, out_dir = "out", seed, backend, perception, log_path, csv_out, dataset, predictions,
                        fixture_out;
  std::vector<std::string> sets;
  bool quiet = false, csv = false;

  auto* run = app.add_subcommand("run", "Run a scenario and write log.jsonl + summary.json");
  run->add_option("scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seed", seed, "Set every seed (sim, optimizer, noise)")->check(CLI::NonNegativeNumber);
  run->add_option("--backend", backend, "Language backend")
      ->check(CLI::IsMember({"oracle", "replay", "record", "live"}));
  run->add_option("--perception", perception, "Perception backend")
      ->check(CLI::IsMember({"oracle", "replay", "record", "live"}));
  run->add_option("--set", sets, "Override a scenario field: dotted.key=value");
  run->add_flag("--quiet", quiet, "No progress output");

  auto* replay = app.add_subcommand("replay", "Recompute the summary from a run log");
  replay->add_option("log", log_path, "Run log")->required();
  replay->add_option("--set", sets, "Override a metrics threshold: metrics.key=value");

  auto* exp = app.add_subcommand("export", "Export a run log");
  exp->add_option("log", log_path, "Run log")->required();
  exp->add_flag("--csv", csv, "CSV trajectory")->required();
  exp->add_option("--out", csv_out, "Output file (default: stdout)");

  auto* eval = app.add_subcommand("eval-landmarks", "Score landmark predictions against a labeled dataset");
  eval->add_option("dataset", dataset, "Dataset JSONL")->required();
  eval->add_option("predictions", predictions, "Predictions JSONL")->required();

  auto* stub = app.add_subcommand("stub-fixtures", "Write language replay fixtures from the built-in grammar");
  stub->add_option("scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  stub->add_option("--out", fixture_out, "Fixture JSONL to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInvalid;
  }

  try {
    if (*run) return cmd_run(scenario, out_dir, scenario_overrides(sets, seed, backend, perception), quiet);
    if (*replay) return cmd_replay(log_path, sets);
    if (*exp) return cmd_export(log_path, csv_out);
    if (*eval) return cmd_eval_landmarks(dataset, predictions);
    if (*stub) return cmd_stub_fixtures(scenario, fixture_out);
  } catch (const behav::BackendUnavailable& e) {
    std::cerr << "backend failure: " << e.what() << '\n';
    return kExitBackend;
  } catch (const behav::MalformedResponse& e) {
    std::cerr << "backend failure: " << e.what() << '\n';
    return kExitBackend;
  } catch (const behav::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return 0;
}
