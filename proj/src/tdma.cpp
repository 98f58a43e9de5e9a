#include "dtwarn/tdma.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dtwarn::tdma {

TdmaSchedule build_schedule(std::vector<std::string> users, double slot_duration_s,
                            double slot_dead_time_s) {
  if (users.empty()) throw ValidationError("user_order", "must be non-empty");
  if (!(slot_duration_s > 0.0)) throw ValidationError("slot_duration_s", "must be > 0");
  if (slot_dead_time_s < 0.0) throw ValidationError("slot_dead_time_s", "must be >= 0");
  std::set<std::string> seen;
  for (const auto& u : users) {
    if (!seen.insert(u).second)
      throw ValidationError("user_order", "duplicate user '" + u + "'");
  }
  TdmaSchedule s;
  s.user_order = std::move(users);
  s.slot_duration_s = slot_duration_s;
  s.slot_dead_time_s = slot_dead_time_s;
  return s;
}

const std::string& active_user(const TdmaSchedule& schedule, double time_s) {
  // Half-open slots [iT, (i+1)T); the 1e-9 nudge keeps exact boundaries in
  // the slot they open rather than one ulp short of it.
  const long slot = static_cast<long>(std::floor(time_s / schedule.slot_duration_s + 1e-9));
  const long n = schedule.n_users();
  return schedule.user_order[static_cast<std::size_t>(((slot % n) + n) % n)];
}

Vec2 interpolate_position(const TrackFix& earlier, const TrackFix& later, double query_time_s) {
  const double dt = later.timestamp_s - earlier.timestamp_s;
  if (dt == 0.0)
    throw ValidationError("timestamp_s", "fixes must have distinct timestamps");
  const Vec2 v = (later.position - earlier.position) / dt;
  return later.position + v * (query_time_s - later.timestamp_s);
}

LocalizationRun run_scheduled_localization(const sim::Scenario& scenario,
                                           const uwb::AnchorSet& anchors,
                                           const uwb::RangeNoiseModel& noise,
                                           const TdmaSchedule& schedule, double fix_period_s,
                                           std::uint64_t rng_seed) {
  if (!(fix_period_s > 0.0)) throw ValidationError("fix_period_s", "must be > 0");
  for (const auto& user : schedule.user_order) {
    if (scenario.find_agent(user) == nullptr)
      throw ValidationError("user_order", "scheduled user '" + user + "' not in scenario");
  }

  LocalizationRun run;
  std::uint64_t fix_counter = 0;

  for (int ui = 0; ui < schedule.n_users(); ++ui) {
    const std::string& user = schedule.user_order[static_cast<std::size_t>(ui)];
    const sim::Agent& agent = *scenario.find_agent(user);

    // Ranging instants for this user. A lone user ranges continuously; in a
    // shared schedule each slot loses its dead time to reconnection.
    std::vector<double> fix_times;
    if (schedule.n_users() == 1) {
      for (double t = 0.0; t <= scenario.duration_s + 1e-9; t += fix_period_s)
        fix_times.push_back(t);
    } else {
      const double cycle = schedule.cycle_s();
      for (double slot_start = ui * schedule.slot_duration_s;
           slot_start < scenario.duration_s; slot_start += cycle) {
        const double slot_end = std::min(slot_start + schedule.slot_duration_s, scenario.duration_s);
        for (double t = slot_start + schedule.slot_dead_time_s; t < slot_end - 1e-9;
             t += fix_period_s)
          fix_times.push_back(t);
      }
    }

    std::vector<TrackFix>& fixes = run.fixes[user];
    for (double t : fix_times) {
      const Vec2 truth = sim::state_at(agent, t).first;
      const auto ranges = uwb::simulate_ranges(truth, anchors, noise,
                                               derive_seed(rng_seed, "tdma-fix", fix_counter++), t);
      try {
        const auto est = uwb::multilaterate(ranges, anchors);
        fixes.push_back({user, est.position, t});
      } catch (const uwb::InsufficientRangesError&) {
        // blocked slot: no fix this round
      }
    }

    // Estimated track sampled at scenario dt: hold before the second fix,
    // constant-velocity propagation over the two most recent fixes after.
    AgentTrack track;
    track.agent_id = user;
    std::size_t next_fix = 0;
    for (long k = 0; k <= scenario.n_ticks(); ++k) {
      const double t = static_cast<double>(k) * scenario.dt_s;
      while (next_fix < fixes.size() && fixes[next_fix].timestamp_s <= t + 1e-9) ++next_fix;
      if (next_fix == 0) continue;  // nothing known yet
      Vec2 pos;
      if (next_fix == 1) {
        pos = fixes[0].position;
      } else {
        pos = interpolate_position(fixes[next_fix - 2], fixes[next_fix - 1], t);
      }
      track.samples.push_back({t, pos, Vec2(0.0, 0.0)});
    }
    run.tracks[user] = std::move(track);
  }
  return run;
}

}  // namespace dtwarn::tdma
