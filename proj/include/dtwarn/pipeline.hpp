#pragma once

#include "dtwarn/core.hpp"
#include "dtwarn/errors.hpp"
#include "dtwarn/latency_model.hpp"
#include "dtwarn/messaging.hpp"
#include "dtwarn/predict.hpp"
#include "dtwarn/risk.hpp"
#include "dtwarn/sim_world.hpp"
#include "dtwarn/uwb.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dtwarn::pipeline {

enum class ProfileName { kSmall, kMedium, kLarge };

std::string_view profile_name(ProfileName p);
ProfileName parse_profile(std::string_view name);

enum class ResolutionTier { kLow, kHigh };

/// Virtual detector backing one model size: latency distribution and a
/// per-agent miss probability standing in for detection accuracy.
struct DetectorProfile {
  ProfileName name = ProfileName::kSmall;
  LatencyModel latency;
  double miss_probability = 0.0;
  ResolutionTier resolution_tier = ResolutionTier::kLow;

  void validate() const;
};

/// Axis-aligned danger area in meters, alive for `ttl_s` after creation.
struct RegionOfInterest {
  Vec2 lo{0.0, 0.0};
  Vec2 hi{0.0, 0.0};
  double created_at_s = 0.0;
  double ttl_s = 0.0;

  bool contains(const Vec2& p) const;
  bool active_at(double t_s) const;
};

struct StageModels {
  LatencyModel reception;
  LatencyModel preprocessing;
  LatencyModel tracking;
  LatencyModel msg_create;
  std::map<NetworkProfile, LatencyModel> msg_retrieve;
};

struct LatencyRecord {
  long frame_id = 0;
  std::array<double, 6> sample_ms{};  // indexed by Stage
  NetworkProfile network = NetworkProfile::kEthernet;
  double end_to_end_ms = 0.0;         // exact sum of sample_ms
  ProfileName profile = ProfileName::kSmall;  // detector profile this frame ran
};

/// One RoI per vehicle prediction: the bounding box of its predicted points
/// inflated by the danger distance on every side.
std::vector<RegionOfInterest> specify_rois(
    std::span<const predict::PredictedTrajectory> vehicle_predictions, double danger_distance_m,
    double ttl_s, double now_s);

/// Small unless an active RoI contains a pedestrian; medium only serves the
/// optional hysteresis band on the way back down.
ProfileName select_profile(std::span<const RegionOfInterest> rois, bool pedestrians_present_in_roi);

struct Detection {
  std::string id;
  Vec2 position{0.0, 0.0};
};

struct DetectionResult {
  std::vector<Detection> detections;
  double latency_ms = 0.0;
};

/// Reports each agent with probability 1 - miss_probability at its true
/// position (sensing noise lives in the UWB path) and samples the profile's
/// inference latency. Deterministic per seed.
DetectionResult virtual_detect(const sim::WorldState& state, const DetectorProfile& profile,
                               std::uint64_t rng_seed);

enum class ProfilePolicy { kAuto, kFixedSmall, kFixedMedium, kFixedLarge };

struct PredictorConfig {
  double horizon_s = 3.0;
  double dt_s = 0.1;
  double accel_sigma_pedestrian = 0.5;
  double accel_sigma_vehicle = 1.5;
  double measurement_sigma_m = 0.05;

  int horizon_steps() const;
};

struct ScheduleConfig {
  double slot_duration_s = 5.0 / 3.0;
  double slot_dead_time_s = 1.6;
  double fix_period_s = 0.1;
  std::vector<std::string> user_order;  // empty: users taken from the scenario
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string intersection = "intersection-0";
  NetworkProfile network = NetworkProfile::kFiveG;
  std::int64_t epoch_ms = 1767225600000;  // simulated wall-clock origin
  ProfilePolicy profile_policy = ProfilePolicy::kAuto;

  StageModels stages;
  std::map<ProfileName, DetectorProfile> profiles;

  double ttc_threshold_s = 1.1;
  double danger_distance_px = 30.0;
  double roi_ttl_s = 2.0;
  double warning_rearm_s = 1.0;
  double medium_hysteresis_s = 0.0;

  ScheduleConfig schedule;
  uwb::AnchorSet anchors;
  uwb::RangeNoiseModel uwb_noise;
  PredictorConfig predictor;

  void validate() const;  // throws ConfigError naming the entry
};

PipelineConfig load_config(const std::string& json_text);
PipelineConfig load_config_file(const std::string& path);

struct RiskLogEntry {
  double t_s = 0.0;
  std::string pedestrian;
  std::string hazard;
  std::optional<double> ttc_s;
  double min_distance_m = 0.0;
  bool warned = false;  // raw per-tick decision, before edge de-duplication
};

struct RunResult {
  std::vector<msg::WarningMessage> warnings;  // in publish order
  std::vector<msg::Receipt> receipts;
  std::vector<LatencyRecord> latency;
  std::vector<RiskLogEntry> risk_log;
  std::vector<sim::CollisionEvent> collisions;  // ground truth of this run
  std::vector<std::string> frame_errors;        // per-frame stage failures, frame skipped
};

/// Full staged loop per tick: profile selection from the previous tick's
/// vehicle predictions, virtual detection, per-agent Kalman tracking,
/// trajectory prediction, pairwise TTC risk, warning publication over the
/// loopback broker, one latency record per frame. Deterministic per
/// (scenario, config).
RunResult run_pipeline(const sim::Scenario& scenario, const PipelineConfig& config);

struct StageStat {
  Stage stage = Stage::kReception;
  double avg_ms = 0.0;
  double std_ms = 0.0;  // sample std, n-1 denominator
};

struct InsufficientSamplesError : Error {
  using Error::Error;
};

std::vector<StageStat> latency_report(std::span<const LatencyRecord> records);

/// CSV with header frame,stage,sample_ms,network,end_to_end_ms.
std::string latency_csv(std::span<const LatencyRecord> records);

/// CSV with header t_s,pedestrian,hazard,ttc_s,min_distance_m,warned.
std::string risk_log_csv(std::span<const RiskLogEntry> entries);

/// Reduces a run to per-(pedestrian, hazard) episodes labeled by the ground
/// truth collisions, for ROC sweeps. Pairs that collided without ever being
/// assessed appear with an absent TTC and an infinite distance.
std::vector<risk::Episode> build_episodes(const RunResult& run, const sim::Scenario& scenario);

}  // namespace dtwarn::pipeline
