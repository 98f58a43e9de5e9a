#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dtwarn/pipeline.hpp"
#include "helpers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

using namespace dtwarn;
using namespace dtwarn::pipeline;

namespace {

std::string default_config_text() {
  std::ifstream in(std::string(DTWARN_SOURCE_DIR) + "/configs/default.json");
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PipelineConfig default_config() { return load_config(default_config_text()); }

sim::Scenario empty_scenario(double duration) {
  sim::Scenario s;
  s.seed = 1;
  s.duration_s = duration;
  s.dt_s = 0.1;
  s.validate();
  return s;
}

sim::Scenario head_on_scenario() {
  sim::Scenario s;
  s.seed = 1;
  s.duration_s = 6.0;
  s.dt_s = 0.1;
  sim::Agent ped;
  ped.id = "ped0";
  ped.kind = sim::AgentKind::kPedestrian;
  ped.radius_m = 0.3;
  ped.waypoints = {{{0.0, 0.0}, 0.0}};
  sim::Agent veh;
  veh.id = "veh0";
  veh.kind = sim::AgentKind::kVehicle;
  veh.radius_m = 1.0;
  veh.waypoints = {{{20.0, 0.0}, 5.0}, {{-5.0, 0.0}, 5.0}};
  s.agents = {ped, veh};
  s.validate();
  return s;
}

predict::PredictedTrajectory traj_of(const std::vector<Vec2>& points) {
  predict::PredictedTrajectory t;
  t.agent = "veh0";
  t.dt_s = 0.1;
  t.points = points;
  return t;
}

}  // namespace

TEST_CASE("specify_rois: inflated bounding boxes") {
  const auto rois = specify_rois(std::vector{traj_of({{0.0, 0.0}, {2.0, 0.0}})}, 1.0, 2.0, 0.0);
  REQUIRE(rois.size() == 1);
  CHECK(rois[0].lo.x() == doctest::Approx(-1.0));
  CHECK(rois[0].hi.x() == doctest::Approx(3.0));
  CHECK(rois[0].lo.y() == doctest::Approx(-1.0));
  CHECK(rois[0].hi.y() == doctest::Approx(1.0));

  CHECK(specify_rois({}, 1.0, 2.0, 0.0).empty());

  const auto square = specify_rois(std::vector{traj_of({{5.0, 5.0}})}, 1.0, 2.0, 0.0);
  CHECK(square[0].lo.x() == doctest::Approx(4.0));
  CHECK(square[0].hi.y() == doctest::Approx(6.0));
}

TEST_CASE("RegionOfInterest: containment and expiry") {
  RegionOfInterest roi{{0.0, 0.0}, {2.0, 2.0}, 1.0, 2.0};
  CHECK(roi.contains({1.0, 1.0}));
  CHECK_FALSE(roi.contains({3.0, 1.0}));
  CHECK(roi.active_at(1.0));
  CHECK(roi.active_at(2.9));
  CHECK_FALSE(roi.active_at(3.0));
}

TEST_CASE("select_profile: RoI gating") {
  const std::vector<RegionOfInterest> none;
  const std::vector<RegionOfInterest> one{{{0.0, 0.0}, {1.0, 1.0}, 0.0, 2.0}};
  CHECK(select_profile(none, false) == ProfileName::kSmall);
  CHECK(select_profile(one, true) == ProfileName::kLarge);
  CHECK(select_profile(one, false) == ProfileName::kSmall);
}

TEST_CASE("virtual_detect: miss probability extremes") {
  const auto scenario = head_on_scenario();
  const auto state = sim::initial_state(scenario);

  DetectorProfile all;
  all.miss_probability = 0.0;
  CHECK(virtual_detect(state, all, 1).detections.size() == 2);

  DetectorProfile nothing;
  nothing.miss_probability = 1.0;
  CHECK(virtual_detect(state, nothing, 1).detections.empty());
}

TEST_CASE("virtual_detect: latency sample mean tracks the profile model") {
  DetectorProfile large;
  large.latency = {11.140, 1.800};
  const auto scenario = empty_scenario(1.0);
  const auto state = sim::initial_state(scenario);
  std::vector<double> samples;
  for (int i = 0; i < 10000; ++i) {
    samples.push_back(virtual_detect(state, large, derive_seed(6, "vd", i)).latency_ms);
  }
  CHECK(std::abs(testutil::mean(samples) - 11.140) < 3.0 * 1.800 / 100.0);
}

TEST_CASE("run_pipeline: empty scenario still logs every frame") {
  const auto result = run_pipeline(empty_scenario(5.0), default_config());
  CHECK(result.warnings.empty());
  CHECK(result.risk_log.empty());
  CHECK(result.latency.size() == 51);  // tick 0 .. 50
  for (std::size_t i = 0; i < result.latency.size(); ++i) {
    CHECK(result.latency[i].frame_id == static_cast<long>(i));
  }
}

TEST_CASE("run_pipeline: head-on approach warns before the collision") {
  const auto scenario = head_on_scenario();
  const auto result = run_pipeline(scenario, default_config());
  REQUIRE_FALSE(result.warnings.empty());
  REQUIRE_FALSE(result.collisions.empty());
  const double first_warning_s =
      static_cast<double>(result.warnings.front().created_ms - default_config().epoch_ms) / 1000.0;
  CHECK(first_warning_s < result.collisions.front().time_s);
  CHECK(result.warnings.front().user == "ped0");
  CHECK(result.warnings.front().hazard_id == "veh0");
}

TEST_CASE("run_pipeline: warning causality and profile gating invariants") {
  const auto scenario = head_on_scenario();
  const auto config = default_config();
  const auto result = run_pipeline(scenario, config);

  // causality: every receipt is stamped no earlier than its assessment tick
  REQUIRE(result.receipts.size() == result.warnings.size());
  for (std::size_t i = 0; i < result.warnings.size(); ++i) {
    CHECK(result.warnings[i].created_ms <= result.receipts[i].timestamp_ms);
  }
  // warnings reference assessments that exist in the risk log at or before
  // the publication tick, and the publication tick ran the large profile
  for (const auto& w : result.warnings) {
    const double t = static_cast<double>(w.created_ms - config.epoch_ms) / 1000.0;
    const bool assessed = std::any_of(
        result.risk_log.begin(), result.risk_log.end(), [&](const RiskLogEntry& e) {
          return e.pedestrian == w.user && e.hazard == w.hazard_id && e.t_s <= t + 1e-9 && e.warned;
        });
    CHECK(assessed);
    const long tick = std::lround(t / scenario.dt_s);
    REQUIRE(tick < static_cast<long>(result.latency.size()));
    CHECK(result.latency[static_cast<std::size_t>(tick)].profile == ProfileName::kLarge);
  }
}

TEST_CASE("run_pipeline: profile escalates with RoI occupancy and decays via hysteresis") {
  auto scenario = head_on_scenario();
  scenario.duration_s = 10.0;  // room for the RoI tail to expire after the pass
  auto config = default_config();
  config.medium_hysteresis_s = 0.5;
  const auto result = run_pipeline(scenario, config);

  bool saw_small = false, saw_large = false, saw_medium_after_large = false;
  bool past_large = false;
  for (const auto& r : result.latency) {
    if (r.profile == ProfileName::kSmall && !past_large) saw_small = true;
    if (r.profile == ProfileName::kLarge) {
      saw_large = true;
      past_large = true;
    }
    if (past_large && r.profile == ProfileName::kMedium) saw_medium_after_large = true;
  }
  CHECK(saw_small);
  CHECK(saw_large);
  CHECK(saw_medium_after_large);  // cool-down band once the vehicle passes
}

TEST_CASE("run_pipeline: latency additivity is exact") {
  const auto result = run_pipeline(empty_scenario(3.0), default_config());
  for (const auto& r : result.latency) {
    double sum = 0.0;
    for (double s : r.sample_ms) sum += s;
    CHECK(r.end_to_end_ms == sum);
  }
}

TEST_CASE("run_pipeline: deterministic per (scenario, config)") {
  const auto scenario = head_on_scenario();
  const auto config = default_config();
  const auto a = run_pipeline(scenario, config);
  const auto b = run_pipeline(scenario, config);
  REQUIRE(a.warnings.size() == b.warnings.size());
  for (std::size_t i = 0; i < a.warnings.size(); ++i) {
    CHECK(msg::encode_warning(a.warnings[i]) == msg::encode_warning(b.warnings[i]));
  }
  CHECK(latency_csv(a.latency) == latency_csv(b.latency));
  CHECK(risk_log_csv(a.risk_log) == risk_log_csv(b.risk_log));
}

TEST_CASE("run_pipeline: stage means recover the configured models") {
  auto config = default_config();
  config.profile_policy = ProfilePolicy::kFixedLarge;
  const auto result = run_pipeline(empty_scenario(400.0), config);  // 4001 frames
  const auto report = latency_report(result.latency);
  const double n = static_cast<double>(result.latency.size());

  const std::map<Stage, LatencyModel> expected = {
      {Stage::kReception, config.stages.reception},
      {Stage::kPreprocessing, config.stages.preprocessing},
      {Stage::kDetection, config.profiles.at(ProfileName::kLarge).latency},
      {Stage::kTracking, config.stages.tracking},
      {Stage::kMsgCreate, config.stages.msg_create},
      {Stage::kMsgRetrieve, config.stages.msg_retrieve.at(config.network)},
  };
  for (const auto& stat : report) {
    const auto& model = expected.at(stat.stage);
    CHECK(std::abs(stat.avg_ms - model.mean_ms) < 3.0 * model.std_ms / std::sqrt(n) + 1e-12);
  }
}

TEST_CASE("latency_report: sample statistics") {
  std::vector<LatencyRecord> records(3);
  const double samples[3] = {3.9, 4.0, 4.1};
  for (int i = 0; i < 3; ++i) {
    records[i].frame_id = i;
    records[i].sample_ms.fill(samples[i]);
    records[i].end_to_end_ms = 6 * samples[i];
  }
  const auto report = latency_report(records);
  REQUIRE(report.size() == 6);
  for (const auto& stat : report) {
    CHECK(stat.avg_ms == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(stat.std_ms == doctest::Approx(0.1).epsilon(1e-9));
  }

  std::vector<LatencyRecord> constant(5);
  for (auto& r : constant) r.sample_ms.fill(2.0);
  for (const auto& stat : latency_report(constant)) CHECK(stat.std_ms == 0.0);

  CHECK_THROWS_AS(latency_report(std::vector<LatencyRecord>(1)), InsufficientSamplesError);
}

TEST_CASE("latency_report: columns mirror the pipeline stage set") {
  const auto report = latency_report(std::vector<LatencyRecord>(2));
  std::vector<std::string> names;
  for (const auto& s : report) names.emplace_back(stage_name(s.stage));
  CHECK(names == std::vector<std::string>{"reception", "preprocessing", "detection", "tracking",
                                          "msg_create", "msg_retrieve"});
}

TEST_CASE("latency_csv and risk_log_csv headers") {
  CHECK(latency_csv({}).rfind("frame,stage,sample_ms,network,end_to_end_ms\n", 0) == 0);
  CHECK(risk_log_csv({}).rfind("t_s,pedestrian,hazard,ttc_s,min_distance_m,warned\n", 0) == 0);
}

TEST_CASE("build_episodes: assessed pairs plus unassessed collisions") {
  RunResult run;
  run.risk_log.push_back({1.0, "ped0", "veh0", 0.8, 0.2, true});
  run.risk_log.push_back({1.1, "ped0", "veh0", 1.4, 0.9, false});
  run.risk_log.push_back({1.0, "ped1", "veh0", std::nullopt, 9.0, false});
  run.collisions.push_back({2.0, "ped0", "veh0"});
  run.collisions.push_back({3.0, "ped2", "veh0"});  // never assessed

  sim::Scenario s;
  s.seed = 0;
  s.duration_s = 5.0;
  s.dt_s = 0.1;
  for (const char* id : {"ped0", "ped1", "ped2"}) {
    sim::Agent p;
    p.id = id;
    p.kind = sim::AgentKind::kPedestrian;
    p.radius_m = 0.3;
    p.waypoints = {{{0.0, 0.0}, 1.0}};
    s.agents.push_back(p);
  }
  sim::Agent v;
  v.id = "veh0";
  v.kind = sim::AgentKind::kVehicle;
  v.radius_m = 1.0;
  v.waypoints = {{{5.0, 0.0}, 5.0}};
  s.agents.push_back(v);

  const auto episodes = build_episodes(run, s);
  REQUIRE(episodes.size() == 3);
  // map order: (ped0,veh0), (ped1,veh0), (ped2,veh0)
  CHECK(episodes[0].collided);
  CHECK(*episodes[0].min_ttc_s == doctest::Approx(0.8));
  CHECK(episodes[0].min_distance_m == doctest::Approx(0.2));
  CHECK_FALSE(episodes[1].collided);
  CHECK(episodes[2].collided);
  CHECK_FALSE(episodes[2].min_ttc_s.has_value());
}

TEST_CASE("load_config: missing fields name the entry") {
  try {
    load_config(R"({"seed": 1})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.field) == "network_profile");
  }

  // drop one nested stage model
  std::string text = default_config_text();
  const auto pos = text.find("\"tracking\"");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 10, "\"tracking_x\"");
  try {
    load_config(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.field) == "stages.tracking");
  }
}

TEST_CASE("load_config: default file is valid and carries the documented models") {
  const auto config = default_config();
  CHECK(config.stages.reception.mean_ms == 1.94);
  CHECK(config.profiles.at(ProfileName::kLarge).latency.mean_ms == 11.140);
  CHECK(config.stages.msg_retrieve.at(NetworkProfile::kLte).mean_ms == 45.72);
  CHECK(config.ttc_threshold_s == 1.1);
  CHECK(config.danger_distance_px == 30.0);
}
