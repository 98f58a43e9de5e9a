#include "dtwarn/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace dtwarn::pipeline {

namespace {

using nlohmann::json;

const json& require(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ConfigError(path.empty() ? key : path + "." + key, "missing field");
  return j.at(key);
}

double require_number(const json& j, const std::string& path, const char* key) {
  const json& v = require(j, path, key);
  if (!v.is_number()) throw ConfigError(path.empty() ? key : path + "." + key, "must be a number");
  return v.get<double>();
}

LatencyModel read_model(const json& j, const std::string& path) {
  LatencyModel m;
  m.mean_ms = require_number(j, path, "mean_ms");
  m.std_ms = require_number(j, path, "std_ms");
  if (m.mean_ms < 0.0 || m.std_ms < 0.0) throw ConfigError(path, "mean_ms/std_ms must be >= 0");
  return m;
}

DetectorProfile read_profile(const json& j, const std::string& path, ProfileName name) {
  DetectorProfile p;
  p.name = name;
  p.latency = read_model(j, path);
  p.miss_probability = require_number(j, path, "miss_probability");
  const std::string tier = require(j, path, "resolution_tier").get<std::string>();
  if (tier == "low") p.resolution_tier = ResolutionTier::kLow;
  else if (tier == "high") p.resolution_tier = ResolutionTier::kHigh;
  else throw ConfigError(path + ".resolution_tier", "must be 'low' or 'high'");
  p.validate();
  return p;
}

}  // namespace

std::string_view profile_name(ProfileName p) {
  switch (p) {
    case ProfileName::kSmall: return "small";
    case ProfileName::kMedium: return "medium";
    case ProfileName::kLarge: return "large";
  }
  return "unknown";
}

ProfileName parse_profile(std::string_view name) {
  if (name == "small") return ProfileName::kSmall;
  if (name == "medium") return ProfileName::kMedium;
  if (name == "large") return ProfileName::kLarge;
  throw ConfigError("profile", "unknown profile '" + std::string(name) + "'");
}

void DetectorProfile::validate() const {
  if (latency.mean_ms < 0.0 || latency.std_ms < 0.0)
    throw ConfigError("profiles", "latency mean/std must be >= 0");
  if (miss_probability < 0.0 || miss_probability > 1.0)
    throw ConfigError("profiles.miss_probability", "must be in [0,1]");
}

int PredictorConfig::horizon_steps() const {
  return static_cast<int>(std::lround(horizon_s / dt_s));
}

void PipelineConfig::validate() const {
  if (!(ttc_threshold_s > 0.0)) throw ConfigError("thresholds.ttc_s", "must be > 0");
  if (!(danger_distance_px > 0.0)) throw ConfigError("thresholds.danger_distance_px", "must be > 0");
  if (!(roi_ttl_s > 0.0)) throw ConfigError("thresholds.roi_ttl_s", "must be > 0");
  if (warning_rearm_s < 0.0) throw ConfigError("thresholds.warning_rearm_s", "must be >= 0");
  if (medium_hysteresis_s < 0.0) throw ConfigError("thresholds.medium_hysteresis_s", "must be >= 0");
  if (!(predictor.dt_s > 0.0)) throw ConfigError("predictor.dt_s", "must be > 0");
  if (predictor.horizon_steps() < 1) throw ConfigError("predictor.horizon_s", "horizon must cover >= 1 step");
  if (!(predictor.measurement_sigma_m > 0.0))
    throw ConfigError("predictor.measurement_sigma_m", "must be > 0");
  if (!(schedule.slot_duration_s > 0.0)) throw ConfigError("schedule.slot_duration_s", "must be > 0");
  if (schedule.slot_dead_time_s < 0.0) throw ConfigError("schedule.slot_dead_time_s", "must be >= 0");
  if (!(schedule.fix_period_s > 0.0)) throw ConfigError("schedule.fix_period_s", "must be > 0");
  for (auto p : {ProfileName::kSmall, ProfileName::kMedium, ProfileName::kLarge}) {
    if (!profiles.count(p))
      throw ConfigError("profiles." + std::string(profile_name(p)), "missing field");
  }
  for (auto n : kAllNetworks) {
    if (!stages.msg_retrieve.count(n))
      throw ConfigError("stages.msg_retrieve." + std::string(network_name(n)), "missing field");
  }
  try {
    anchors.validate();
  } catch (const ValidationError& e) {
    throw ConfigError("anchors", e.what());
  }
  try {
    uwb_noise.validate();
  } catch (const ValidationError& e) {
    throw ConfigError("uwb_noise", e.what());
  }
}

PipelineConfig load_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("", std::string("config JSON: ") + e.what());
  }

  PipelineConfig c;
  if (!j.contains("seed")) throw ConfigError("seed", "missing field");
  c.seed = j.at("seed").get<std::uint64_t>();
  c.network = parse_network(require(j, "", "network_profile").get<std::string>());
  c.intersection = j.value("intersection", c.intersection);
  c.epoch_ms = j.value("epoch_ms", c.epoch_ms);

  const std::string policy = j.value("profile_policy", "auto");
  if (policy == "auto") c.profile_policy = ProfilePolicy::kAuto;
  else if (policy == "fixed_small") c.profile_policy = ProfilePolicy::kFixedSmall;
  else if (policy == "fixed_medium") c.profile_policy = ProfilePolicy::kFixedMedium;
  else if (policy == "fixed_large") c.profile_policy = ProfilePolicy::kFixedLarge;
  else throw ConfigError("profile_policy", "must be auto|fixed_small|fixed_medium|fixed_large");

  const json& stages = require(j, "", "stages");
  c.stages.reception = read_model(require(stages, "stages", "reception"), "stages.reception");
  c.stages.preprocessing =
      read_model(require(stages, "stages", "preprocessing"), "stages.preprocessing");
  c.stages.tracking = read_model(require(stages, "stages", "tracking"), "stages.tracking");
  c.stages.msg_create = read_model(require(stages, "stages", "msg_create"), "stages.msg_create");
  const json& retrieve = require(stages, "stages", "msg_retrieve");
  for (auto n : kAllNetworks) {
    const std::string key(network_name(n));
    c.stages.msg_retrieve[n] = read_model(require(retrieve, "stages.msg_retrieve", key.c_str()),
                                          "stages.msg_retrieve." + key);
  }

  const json& profiles = require(j, "", "profiles");
  for (auto p : {ProfileName::kSmall, ProfileName::kMedium, ProfileName::kLarge}) {
    const std::string key(profile_name(p));
    c.profiles[p] =
        read_profile(require(profiles, "profiles", key.c_str()), "profiles." + key, p);
  }

  const json& thr = require(j, "", "thresholds");
  c.ttc_threshold_s = require_number(thr, "thresholds", "ttc_s");
  c.danger_distance_px = require_number(thr, "thresholds", "danger_distance_px");
  c.roi_ttl_s = thr.value("roi_ttl_s", c.roi_ttl_s);
  c.warning_rearm_s = thr.value("warning_rearm_s", c.warning_rearm_s);
  c.medium_hysteresis_s = thr.value("medium_hysteresis_s", c.medium_hysteresis_s);

  const json& sched = require(j, "", "schedule");
  c.schedule.slot_duration_s = require_number(sched, "schedule", "slot_duration_s");
  c.schedule.slot_dead_time_s = require_number(sched, "schedule", "slot_dead_time_s");
  c.schedule.fix_period_s = require_number(sched, "schedule", "fix_period_s");
  if (sched.contains("user_order"))
    c.schedule.user_order = sched.at("user_order").get<std::vector<std::string>>();

  const json& anchors = require(j, "", "anchors");
  for (const auto& ja : anchors) {
    c.anchors.anchors.push_back({require(ja, "anchors", "id").get<std::string>(),
                                 Vec2(require_number(ja, "anchors", "x_m"),
                                      require_number(ja, "anchors", "y_m"))});
  }

  if (j.contains("uwb_noise")) {
    const json& noise = j.at("uwb_noise");
    c.uwb_noise.sigma_m = require_number(noise, "uwb_noise", "sigma_m");
    c.uwb_noise.dropout_p = noise.value("dropout_p", 0.0);
    c.uwb_noise.nlos_p = noise.value("nlos_p", 0.0);
    c.uwb_noise.nlos_bias_m = noise.value("nlos_bias_m", 0.3);
  }

  const json& pred = require(j, "", "predictor");
  c.predictor.horizon_s = require_number(pred, "predictor", "horizon_s");
  c.predictor.dt_s = require_number(pred, "predictor", "dt_s");
  c.predictor.accel_sigma_pedestrian = pred.value("accel_sigma_pedestrian", 0.5);
  c.predictor.accel_sigma_vehicle = pred.value("accel_sigma_vehicle", 1.5);
  c.predictor.measurement_sigma_m = pred.value("measurement_sigma_m", 0.05);

  c.validate();
  return c;
}

PipelineConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config(ss.str());
}

}  // namespace dtwarn::pipeline
