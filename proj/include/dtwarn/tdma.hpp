#pragma once

#include "dtwarn/core.hpp"
#include "dtwarn/errors.hpp"
#include "dtwarn/sim_world.hpp"
#include "dtwarn/uwb.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dtwarn::tdma {

/// Cyclic ranging schedule: user i owns [i*T, (i+1)*T) within each cycle of
/// length N*T. Slots are half-open; an exact boundary belongs to the next
/// slot. `slot_dead_time_s` models the reconnection gap at the start of each
/// slot; it applies only when users actually alternate (N > 1).
struct TdmaSchedule {
  std::vector<std::string> user_order;
  double slot_duration_s = 0.0;
  double slot_dead_time_s = 0.0;

  int n_users() const { return static_cast<int>(user_order.size()); }
  double cycle_s() const { return n_users() * slot_duration_s; }
};

TdmaSchedule build_schedule(std::vector<std::string> users, double slot_duration_s,
                            double slot_dead_time_s = 0.0);

const std::string& active_user(const TdmaSchedule& schedule, double time_s);

struct TrackFix {
  std::string user;
  Vec2 position{0.0, 0.0};
  double timestamp_s = 0.0;
};

/// Constant-velocity propagation from the two most recent fixes; earlier fix
/// first. Extrapolates freely for query times past the newer fix.
Vec2 interpolate_position(const TrackFix& earlier, const TrackFix& later, double query_time_s);

struct LocalizationRun {
  std::map<std::string, AgentTrack> tracks;             // sampled at scenario dt
  std::map<std::string, std::vector<TrackFix>> fixes;   // successful position fixes
};

/// Schedules ranging for every user in the schedule against the scenario's
/// ground truth: within its slot a user obtains one fix per fix_period_s
/// (after the slot dead time), each fix being one simulate_ranges batch put
/// through multilaterate. Between fixes the track is filled by constant
/// velocity interpolation over the two most recent fixes. A single-user
/// schedule ranges continuously with no dead time.
LocalizationRun run_scheduled_localization(const sim::Scenario& scenario,
                                           const uwb::AnchorSet& anchors,
                                           const uwb::RangeNoiseModel& noise,
                                           const TdmaSchedule& schedule, double fix_period_s,
                                           std::uint64_t rng_seed);

}  // namespace dtwarn::tdma
