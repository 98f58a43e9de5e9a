#include "dtwarn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <random>
#include <set>

namespace dtwarn::pipeline {

bool RegionOfInterest::contains(const Vec2& p) const {
  return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
}

bool RegionOfInterest::active_at(double t_s) const {
  return t_s >= created_at_s && t_s < created_at_s + ttl_s;
}

std::vector<RegionOfInterest> specify_rois(
    std::span<const predict::PredictedTrajectory> vehicle_predictions, double danger_distance_m,
    double ttl_s, double now_s) {
  std::vector<RegionOfInterest> rois;
  rois.reserve(vehicle_predictions.size());
  for (const auto& traj : vehicle_predictions) {
    if (traj.points.empty()) continue;
    Vec2 lo = traj.points.front();
    Vec2 hi = traj.points.front();
    for (const auto& p : traj.points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    RegionOfInterest roi;
    roi.lo = lo - Vec2(danger_distance_m, danger_distance_m);
    roi.hi = hi + Vec2(danger_distance_m, danger_distance_m);
    roi.created_at_s = now_s;
    roi.ttl_s = ttl_s;
    rois.push_back(roi);
  }
  return rois;
}

ProfileName select_profile(std::span<const RegionOfInterest> rois,
                           bool pedestrians_present_in_roi) {
  return (!rois.empty() && pedestrians_present_in_roi) ? ProfileName::kLarge : ProfileName::kSmall;
}

DetectionResult virtual_detect(const sim::WorldState& state, const DetectorProfile& profile,
                               std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  DetectionResult result;
  result.detections.reserve(state.agents.size());
  for (const auto& a : state.agents) {
    const bool missed = u01(rng) < profile.miss_probability;
    if (!missed) result.detections.push_back({a.id, a.pos});
  }
  result.latency_ms = profile.latency.sample(rng);
  return result;
}

namespace {

struct PairState {
  bool warned = false;
  long last_trigger_tick = -1;
};

}  // namespace

RunResult run_pipeline(const sim::Scenario& scenario, const PipelineConfig& config) {
  scenario.validate();
  config.validate();

  RunResult result;
  msg::LoopbackBroker broker;
  msg::LoopbackTransport transport(broker);
  auto inbox = broker.subscribe("dt/" + config.intersection + "/warn/+");
  msg::MessageIdGenerator msg_ids(config.seed);

  std::mt19937_64 latency_rng(derive_seed(config.seed, "latency"));

  risk::RiskThresholds thresholds{config.ttc_threshold_s, config.danger_distance_px,
                                  scenario.px_per_meter};
  const double danger_m = thresholds.danger_distance_m();
  const int horizon_steps = config.predictor.horizon_steps();

  std::map<std::string, sim::AgentKind> kinds;
  std::map<std::string, predict::KalmanCvTracker> trackers;
  for (const auto& a : scenario.agents) {
    kinds[a.id] = a.kind;
    const double accel = a.kind == sim::AgentKind::kPedestrian
                             ? config.predictor.accel_sigma_pedestrian
                             : config.predictor.accel_sigma_vehicle;
    trackers.emplace(a.id,
                     predict::KalmanCvTracker(a.id, accel, config.predictor.measurement_sigma_m));
  }

  std::vector<RegionOfInterest> rois;
  std::vector<predict::PredictedTrajectory> prev_vehicle_predictions;
  std::vector<Vec2> prev_ped_positions;
  std::map<std::pair<std::string, std::string>, PairState> pair_states;
  const long rearm_ticks = std::lround(config.warning_rearm_s / scenario.dt_s);
  double last_large_t = -1e18;

  std::vector<sim::WorldState> states;
  states.reserve(static_cast<std::size_t>(scenario.n_ticks()) + 1);
  sim::WorldState state = sim::initial_state(scenario);

  for (long tick = 0; tick <= scenario.n_ticks(); ++tick) {
    const double now = static_cast<double>(tick) * scenario.dt_s;
    states.push_back(state);

    // --- RoI refresh from the previous tick's vehicle predictions --------
    auto fresh = specify_rois(prev_vehicle_predictions, danger_m, config.roi_ttl_s, now);
    rois.insert(rois.end(), fresh.begin(), fresh.end());
    std::erase_if(rois, [&](const RegionOfInterest& r) { return !r.active_at(now); });

    bool peds_in_roi = false;
    for (const auto& p : prev_ped_positions) {
      for (const auto& r : rois) {
        if (r.contains(p)) {
          peds_in_roi = true;
          break;
        }
      }
      if (peds_in_roi) break;
    }

    ProfileName selected;
    switch (config.profile_policy) {
      case ProfilePolicy::kFixedSmall: selected = ProfileName::kSmall; break;
      case ProfilePolicy::kFixedMedium: selected = ProfileName::kMedium; break;
      case ProfilePolicy::kFixedLarge: selected = ProfileName::kLarge; break;
      case ProfilePolicy::kAuto:
      default:
        selected = select_profile(rois, peds_in_roi);
        if (selected == ProfileName::kLarge) {
          last_large_t = now;
        } else if (config.medium_hysteresis_s > 0.0 &&
                   now - last_large_t <= config.medium_hysteresis_s) {
          selected = ProfileName::kMedium;  // cool-down band after RoI activity
        }
        break;
    }
    const DetectorProfile& profile = config.profiles.at(selected);

    // --- detection, tracking, prediction ---------------------------------
    const auto detection =
        virtual_detect(state, profile, derive_seed(config.seed, "detect", static_cast<std::uint64_t>(tick)));

    std::vector<predict::PredictedTrajectory> ped_predictions;
    std::vector<predict::PredictedTrajectory> hazard_predictions;
    std::vector<Vec2> ped_positions;
    std::map<std::string, Vec2> tracked_positions;
    try {
      for (const auto& det : detection.detections) {
        trackers.at(det.id).observe(now, det.position);
      }
      for (auto& [id, tracker] : trackers) {
        if (!tracker.ready()) continue;
        auto traj = tracker.predict(horizon_steps, config.predictor.dt_s);
        traj.start_time_s = now;
        const Vec2 here(tracker.state().mean(0), tracker.state().mean(1));
        tracked_positions[id] = here;
        if (kinds.at(id) == sim::AgentKind::kPedestrian) {
          ped_positions.push_back(here);
          ped_predictions.push_back(std::move(traj));
        } else {
          hazard_predictions.push_back(std::move(traj));
        }
      }

      // --- pairwise risk + warning publication ---------------------------
      for (const auto& ped : ped_predictions) {
        for (const auto& hz : hazard_predictions) {
          const auto assessment = risk::compute_ttc(ped, hz, thresholds);
          const auto trigger = risk::decide_warning(assessment, thresholds);
          result.risk_log.push_back({now, assessment.pedestrian, assessment.hazard,
                                     assessment.ttc_s, assessment.min_predicted_distance_m,
                                     trigger.has_value()});

          auto& ps = pair_states[{assessment.pedestrian, assessment.hazard}];
          if (trigger) {
            // Publication requires a large-profile frame: a warning presumes
            // the heavy detector confirmed the pedestrian inside the RoI.
            const bool rising = !ps.warned;
            ps.last_trigger_tick = tick;
            if (rising && selected == ProfileName::kLarge) {
              ps.warned = true;
              const Vec2 ped_pos = tracked_positions.at(ped.agent);
              const Vec2 hz_pos = tracked_positions.at(hz.agent);
              const std::int64_t created =
                  config.epoch_ms + static_cast<std::int64_t>(std::llround(now * 1000.0));
              auto message =
                  msg::make_warning(msg_ids.next(), created, config.intersection, ped.agent,
                                    *assessment.ttc_s, ped_pos, hz.agent, hz_pos);
              result.receipts.push_back(msg::publish_warning(message, transport));
              result.warnings.push_back(std::move(message));
            }
          } else if (ps.warned && tick - ps.last_trigger_tick > rearm_ticks) {
            ps.warned = false;  // danger cleared long enough to re-arm
          }
        }
      }
    } catch (const Error& e) {
      result.frame_errors.push_back("frame " + std::to_string(tick) + ": " + e.what());
    }

    // --- per-frame latency record ----------------------------------------
    LatencyRecord rec;
    rec.frame_id = tick;
    rec.network = config.network;
    rec.profile = selected;
    rec.sample_ms[static_cast<int>(Stage::kReception)] = config.stages.reception.sample(latency_rng);
    rec.sample_ms[static_cast<int>(Stage::kPreprocessing)] =
        config.stages.preprocessing.sample(latency_rng);
    rec.sample_ms[static_cast<int>(Stage::kDetection)] = detection.latency_ms;
    rec.sample_ms[static_cast<int>(Stage::kTracking)] = config.stages.tracking.sample(latency_rng);
    rec.sample_ms[static_cast<int>(Stage::kMsgCreate)] =
        config.stages.msg_create.sample(latency_rng);
    rec.sample_ms[static_cast<int>(Stage::kMsgRetrieve)] =
        config.stages.msg_retrieve.at(config.network).sample(latency_rng);
    rec.end_to_end_ms = 0.0;
    for (double s : rec.sample_ms) rec.end_to_end_ms += s;
    result.latency.push_back(rec);

    // --- carry predictions forward, advance the world --------------------
    prev_vehicle_predictions = std::move(hazard_predictions);
    prev_ped_positions = std::move(ped_positions);
    while (inbox->try_pop()) {
    }  // drain our own subscription
    state = sim::step(state, scenario);
  }

  result.collisions = sim::detect_collisions(states, scenario);
  return result;
}

std::vector<StageStat> latency_report(std::span<const LatencyRecord> records) {
  if (records.size() < 2)
    throw InsufficientSamplesError("latency report needs >= 2 records, have " +
                                   std::to_string(records.size()));
  std::vector<StageStat> stats;
  for (Stage stage : kAllStages) {
    const int idx = static_cast<int>(stage);
    double sum = 0.0;
    for (const auto& r : records) sum += r.sample_ms[idx];
    const double mean = sum / static_cast<double>(records.size());
    double ss = 0.0;
    for (const auto& r : records) ss += (r.sample_ms[idx] - mean) * (r.sample_ms[idx] - mean);
    stats.push_back({stage, mean, std::sqrt(ss / static_cast<double>(records.size() - 1))});
  }
  return stats;
}

std::string latency_csv(std::span<const LatencyRecord> records) {
  std::string out = "frame,stage,sample_ms,network,end_to_end_ms\n";
  char line[160];
  for (const auto& r : records) {
    for (Stage stage : kAllStages) {
      std::snprintf(line, sizeof(line), "%ld,%s,%.9g,%s,%.9g\n", r.frame_id,
                    std::string(stage_name(stage)).c_str(),
                    r.sample_ms[static_cast<int>(stage)],
                    std::string(network_name(r.network)).c_str(), r.end_to_end_ms);
      out += line;
    }
  }
  return out;
}

std::string risk_log_csv(std::span<const RiskLogEntry> entries) {
  std::string out = "t_s,pedestrian,hazard,ttc_s,min_distance_m,warned\n";
  char line[200];
  for (const auto& e : entries) {
    const std::string ttc = e.ttc_s ? format_sig6(*e.ttc_s) : "";
    std::snprintf(line, sizeof(line), "%.4f,%s,%s,%s,%.6g,%d\n", e.t_s, e.pedestrian.c_str(),
                  e.hazard.c_str(), ttc.c_str(), e.min_distance_m, e.warned ? 1 : 0);
    out += line;
  }
  return out;
}

std::vector<risk::Episode> build_episodes(const RunResult& run, const sim::Scenario& scenario) {
  std::map<std::string, sim::AgentKind> kinds;
  for (const auto& a : scenario.agents) kinds[a.id] = a.kind;

  std::map<std::pair<std::string, std::string>, risk::Episode> episodes;
  for (const auto& e : run.risk_log) {
    auto [it, inserted] = episodes.try_emplace({e.pedestrian, e.hazard});
    risk::Episode& ep = it->second;
    if (inserted) ep.min_distance_m = std::numeric_limits<double>::infinity();
    ep.min_distance_m = std::min(ep.min_distance_m, e.min_distance_m);
    if (e.ttc_s && (!ep.min_ttc_s || *e.ttc_s < *ep.min_ttc_s)) ep.min_ttc_s = e.ttc_s;
  }
  for (const auto& c : run.collisions) {
    // canonical event order is lexicographic; recover (pedestrian, hazard)
    const auto ka = kinds.at(c.agent_a);
    const auto kb = kinds.at(c.agent_b);
    std::string ped, hazard;
    if (ka == sim::AgentKind::kPedestrian && kb != sim::AgentKind::kPedestrian) {
      ped = c.agent_a;
      hazard = c.agent_b;
    } else if (kb == sim::AgentKind::kPedestrian && ka != sim::AgentKind::kPedestrian) {
      ped = c.agent_b;
      hazard = c.agent_a;
    } else {
      continue;  // pedestrian-pedestrian or vehicle-vehicle contact
    }
    auto it = episodes.find({ped, hazard});
    if (it == episodes.end()) {
      risk::Episode ep;
      ep.min_distance_m = std::numeric_limits<double>::infinity();
      ep.collided = true;
      episodes[{ped, hazard}] = ep;  // collided without ever being assessed
    } else {
      it->second.collided = true;
    }
  }

  std::vector<risk::Episode> out;
  out.reserve(episodes.size());
  for (const auto& [key, ep] : episodes) out.push_back(ep);
  return out;
}

}  // namespace dtwarn::pipeline
