// dtwarn: drive the intersection safety-warning twin from the command line.
//
// Subcommands map onto the library: `generate` (random scenarios), `run`
// (full pipeline over a scenario), `roc` (threshold sweeps over one or more
// scenarios), `uwb-bench` (localization accuracy / query-rate table).
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include "dtwarn/core.hpp"
#include "dtwarn/messaging.hpp"
#include "dtwarn/pipeline.hpp"
#include "dtwarn/risk.hpp"
#include "dtwarn/sim_world.hpp"
#include "dtwarn/tdma.hpp"
#include "dtwarn/uwb_bench.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dtwarn::Error("cannot write " + path.string());
  out << bytes;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dtwarn::Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hash_hex(const std::string& bytes) {
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                static_cast<unsigned long long>(dtwarn::fnv1a64(bytes)),
                static_cast<unsigned long long>(dtwarn::splitmix64(dtwarn::fnv1a64(bytes))));
  return buf;
}

std::int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const std::string& config_bytes, std::uint64_t seed,
                    const std::vector<std::string>& outputs) {
  ordered_json j;
  j["command"] = command;
  j["config_hash"] = hash_hex(config_bytes);
  j["seed"] = seed;
  j["started_at_ms"] = wall_clock_ms();
  j["output_paths"] = outputs;
  write_file(out_dir / "manifest.json", j.dump(2) + "\n");
}

int cmd_generate(std::uint64_t seed, int pedestrians, int vehicles, double duration, double dt,
                 double px_per_meter, const std::string& out_path) {
  const auto scenario = dtwarn::sim::generate_random_scenario(seed, pedestrians, vehicles,
                                                              duration, dt, px_per_meter);
  write_file(out_path, dtwarn::sim::save_scenario(scenario));
  std::cout << "wrote " << out_path << " (" << scenario.agents.size() << " agents, "
            << scenario.n_ticks() << " ticks)\n";
  return 0;
}

int cmd_run(const std::string& scenario_path, const std::string& config_path,
            const std::string& out_dir, const std::string& network_override,
            const std::string& truth_path) {
  const std::string config_bytes = read_file(config_path);
  auto config = dtwarn::pipeline::load_config(config_bytes);
  if (!network_override.empty()) config.network = dtwarn::parse_network(network_override);
  const auto scenario = dtwarn::sim::load_scenario_file(scenario_path);

  const auto result = dtwarn::pipeline::run_pipeline(scenario, config);

  std::string warnings_jsonl;
  for (const auto& w : result.warnings) warnings_jsonl += dtwarn::msg::encode_warning(w) + "\n";

  const fs::path dir(out_dir);
  write_file(dir / "warnings.jsonl", warnings_jsonl);
  write_file(dir / "latency.csv", dtwarn::pipeline::latency_csv(result.latency));
  write_file(dir / "risk_log.csv", dtwarn::pipeline::risk_log_csv(result.risk_log));
  std::vector<std::string> outputs = {"warnings.jsonl", "latency.csv", "risk_log.csv"};
  if (!truth_path.empty()) {
    write_file(truth_path, dtwarn::sim::trajectory_csv(dtwarn::sim::run_scenario(scenario)));
    outputs.push_back(truth_path);
  }
  write_manifest(dir, "run", config_bytes, config.seed, outputs);

  for (const auto& err : result.frame_errors) std::cerr << "warning: " << err << "\n";
  std::cout << "warnings: " << result.warnings.size() << ", frames: " << result.latency.size()
            << ", ground-truth collisions: " << result.collisions.size() << "\n";
  return 0;
}

int cmd_roc(const std::vector<std::string>& scenario_paths, const std::string& config_path,
            const std::string& axis_name, const std::vector<double>& grid,
            const std::string& out_dir, const std::string& format) {
  const std::string config_bytes = read_file(config_path);
  const auto config = dtwarn::pipeline::load_config(config_bytes);

  dtwarn::risk::SweepAxis axis;
  if (axis_name == "ttc") axis = dtwarn::risk::SweepAxis::kTtc;
  else if (axis_name == "distance") axis = dtwarn::risk::SweepAxis::kDistance;
  else throw dtwarn::ConfigError("axis", "must be 'ttc' or 'distance'");

  std::vector<dtwarn::risk::Episode> episodes;
  for (const auto& path : scenario_paths) {
    const auto scenario = dtwarn::sim::load_scenario_file(path);
    const auto run = dtwarn::pipeline::run_pipeline(scenario, config);
    auto eps = dtwarn::pipeline::build_episodes(run, scenario);
    episodes.insert(episodes.end(), eps.begin(), eps.end());
  }

  const auto points = dtwarn::risk::sweep_roc(episodes, axis, grid);
  const auto& best = dtwarn::risk::select_threshold(points);

  const fs::path dir(out_dir);
  std::vector<std::string> outputs;
  if (format == "json") {
    ordered_json j;
    j["axis"] = axis_name;
    j["points"] = ordered_json::array();
    for (const auto& p : points) {
      ordered_json jp;
      jp["threshold"] = p.threshold;
      if (p.tpr) jp["tpr"] = *p.tpr;
      if (p.fpr) jp["fpr"] = *p.fpr;
      j["points"].push_back(jp);
    }
    j["selected_threshold"] = best.threshold;
    write_file(dir / "roc.json", j.dump(2) + "\n");
    outputs.push_back("roc.json");
  } else {
    write_file(dir / "roc.csv", dtwarn::risk::roc_csv(axis, points));
    outputs.push_back("roc.csv");
  }
  write_manifest(dir, "roc", config_bytes, config.seed, outputs);

  std::cout << "episodes: " << episodes.size() << ", selected threshold: " << best.threshold
            << " (tpr " << (best.tpr ? dtwarn::format_sig6(*best.tpr) : "n/a") << ", fpr "
            << (best.fpr ? dtwarn::format_sig6(*best.fpr) : "n/a") << ")\n";
  return 0;
}

int cmd_uwb_bench(const std::string& scenario_path, const std::string& config_path,
                  const std::string& out_dir, const std::string& format) {
  const std::string config_bytes = read_file(config_path);
  const auto config = dtwarn::pipeline::load_config(config_bytes);
  const auto scenario = dtwarn::sim::load_scenario_file(scenario_path);

  std::vector<std::string> pedestrians;
  for (const auto& a : scenario.agents) {
    if (a.kind == dtwarn::sim::AgentKind::kPedestrian) pedestrians.push_back(a.id);
  }
  if (pedestrians.empty()) throw dtwarn::Error("scenario has no pedestrian to carry a tag");

  std::vector<dtwarn::uwb::BenchmarkRow> rows;

  // Single-user run: the first tagged pedestrian ranges continuously.
  {
    auto schedule =
        dtwarn::tdma::build_schedule({pedestrians[0]}, config.schedule.slot_duration_s, 0.0);
    const auto r = dtwarn::uwb::accuracy_benchmark(
        scenario, config.anchors, config.uwb_noise, schedule, config.schedule.fix_period_s,
        dtwarn::derive_seed(config.seed, "uwb-bench-1"), "single");
    rows.push_back(r.pooled);
  }

  // Two-user run: alternating slots with the configured reconnection gap.
  if (pedestrians.size() >= 2) {
    auto schedule = dtwarn::tdma::build_schedule({pedestrians[0], pedestrians[1]},
                                                 config.schedule.slot_duration_s,
                                                 config.schedule.slot_dead_time_s);
    const auto r = dtwarn::uwb::accuracy_benchmark(
        scenario, config.anchors, config.uwb_noise, schedule, config.schedule.fix_period_s,
        dtwarn::derive_seed(config.seed, "uwb-bench-2"), "two_user");
    rows.push_back(r.pooled);
  }

  const fs::path dir(out_dir);
  std::vector<std::string> outputs;
  if (format == "json") {
    ordered_json j = ordered_json::array();
    for (const auto& r : rows) {
      j.push_back({{"scenario", r.scenario_label},
                   {"mean_error_m", r.mean_error_m},
                   {"std_error_m", r.std_error_m},
                   {"freq_hz", r.freq_hz}});
    }
    write_file(dir / "uwb_bench.json", j.dump(2) + "\n");
    outputs.push_back("uwb_bench.json");
  } else {
    write_file(dir / "uwb_bench.csv", dtwarn::uwb::benchmark_csv(rows));
    outputs.push_back("uwb_bench.csv");
  }
  write_manifest(dir, "uwb-bench", config_bytes, config.seed, outputs);

  for (const auto& r : rows) {
    std::cout << r.scenario_label << ": mean " << dtwarn::format_sig6(r.mean_error_m)
              << " m, std " << dtwarn::format_sig6(r.std_error_m) << " m, "
              << dtwarn::format_sig6(r.freq_hz) << " Hz\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intersection digital-twin safety warning toolkit"};
  app.require_subcommand(1);

  auto* generate = app.add_subcommand("generate", "Generate a random intersection scenario");
  std::uint64_t seed = 7;
  int pedestrians = 10;
  int vehicles = 4;
  double duration = 60.0;
  double dt = 0.1;
  double px_per_meter = 20.0;
  std::string out_path = "scenario.json";
  generate->add_option("--seed", seed, "Master seed");
  generate->add_option("--pedestrians", pedestrians, "Pedestrian count")
      ->check(CLI::NonNegativeNumber);
  generate->add_option("--vehicles", vehicles, "Vehicle count")->check(CLI::NonNegativeNumber);
  generate->add_option("--duration", duration, "Scenario length, seconds");
  generate->add_option("--dt", dt, "Tick length, seconds");
  generate->add_option("--px-per-meter", px_per_meter, "Image-plane scale");
  generate->add_option("--out", out_path, "Output scenario path");

  auto* run = app.add_subcommand("run", "Run the warning pipeline over a scenario");
  std::string scenario_path, config_path, network_override, truth_path;
  std::string out_dir = "out";
  run->add_option("--scenario", scenario_path, "Scenario JSON")->required();
  run->add_option("--config", config_path, "Pipeline config JSON")->required();
  run->add_option("--out-dir", out_dir, "Output directory");
  run->add_option("--network", network_override,
                  "Override network profile (ethernet|wifi|lte|fiveg)");
  run->add_option("--dump-truth", truth_path, "Also dump the ground-truth trajectory CSV here");

  auto* roc = app.add_subcommand("roc", "Sweep warning thresholds into an ROC table");
  std::vector<std::string> roc_scenarios;
  std::string roc_config, roc_out = "out", roc_format = "csv";
  std::string roc_axis = "ttc";
  std::vector<double> roc_grid;
  roc->add_option("--scenario", roc_scenarios, "Scenario JSON (repeatable)")->required();
  roc->add_option("--config", roc_config, "Pipeline config JSON")->required();
  roc->add_option("--axis", roc_axis, "Sweep axis: ttc (seconds) or distance (pixels)");
  roc->add_option("--grid", roc_grid, "Threshold grid values, strictly increasing")->required();
  roc->add_option("--out-dir", roc_out, "Output directory");
  roc->add_option("--format", roc_format, "csv or json");

  auto* bench = app.add_subcommand("uwb-bench", "Localization accuracy and query-rate table");
  std::string bench_scenario, bench_config, bench_out = "out", bench_format = "csv";
  bench->add_option("--scenario", bench_scenario, "Scenario JSON")->required();
  bench->add_option("--config", bench_config, "Pipeline config JSON")->required();
  bench->add_option("--out-dir", bench_out, "Output directory");
  bench->add_option("--format", bench_format, "csv or json");

  try {
    app.parse(argc, argv);
    if (generate->parsed())
      return cmd_generate(seed, pedestrians, vehicles, duration, dt, px_per_meter, out_path);
    if (run->parsed())
      return cmd_run(scenario_path, config_path, out_dir, network_override, truth_path);
    if (roc->parsed())
      return cmd_roc(roc_scenarios, roc_config, roc_axis, roc_grid, roc_out, roc_format);
    if (bench->parsed())
      return cmd_uwb_bench(bench_scenario, bench_config, bench_out, bench_format);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 2;
  } catch (const dtwarn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const dtwarn::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const dtwarn::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
