#pragma once

#include "dtwarn/core.hpp"
#include "dtwarn/errors.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dtwarn::sim {

enum class AgentKind { kPedestrian, kVehicle, kScooter };

std::string_view kind_name(AgentKind k);
AgentKind parse_kind(std::string_view name);  // throws ValidationError("kind", ...)

/// Default collision footprint radius per kind, meters.
double default_radius(AgentKind k);

struct Waypoint {
  Vec2 pos{0.0, 0.0};
  double speed_mps = 0.0;  // travel speed from this waypoint toward the next
};

struct Agent {
  std::string id;
  AgentKind kind = AgentKind::kPedestrian;
  double radius_m = 0.3;
  std::vector<Waypoint> waypoints;  // non-empty; agent spawns at waypoints[0]
};

struct Scenario {
  std::uint64_t seed = 0;
  double duration_s = 0.0;
  double dt_s = 0.0;
  double px_per_meter = 20.0;
  std::vector<Agent> agents;

  void validate() const;  // throws ValidationError naming the offending field
  long n_ticks() const;   // steps of dt_s fitting in duration_s
  const Agent* find_agent(std::string_view id) const;
};

/// Per-agent kinematic state. `target` is the index of the waypoint the agent
/// is moving toward; target == waypoints.size() means at rest on the last one.
struct AgentState {
  std::string id;
  Vec2 pos{0.0, 0.0};
  Vec2 vel{0.0, 0.0};
  std::size_t target = 1;
};

/// Immutable snapshot of the world at one tick. Snapshots may be shared
/// freely across threads; only the stepping context creates new ones.
struct WorldState {
  double time_s = 0.0;
  double dt_s = 0.0;
  std::vector<AgentState> agents;
};

struct CollisionEvent {
  double time_s = 0.0;
  std::string agent_a;  // canonical: agent_a < agent_b
  std::string agent_b;
};

// --- Scenario I/O ------------------------------------------------------------

Scenario load_scenario(const std::string& json_text);
Scenario load_scenario_file(const std::string& path);
std::string save_scenario(const Scenario& s);  // canonical bytes, stable round-trip
void save_scenario_file(const Scenario& s, const std::string& path);

// --- Simulation ---------------------------------------------------------------

WorldState initial_state(const Scenario& s);

/// Advances all agents synchronously by one tick from the same pre-tick
/// snapshot. Saturates (returns the input unchanged) once time would pass
/// scenario duration. Waypoint arrivals inside a tick carry the leftover
/// travel time onto the next leg.
WorldState step(const WorldState& state, const Scenario& s);

/// Full run: states at t = 0, dt, ..., n_ticks*dt.
std::vector<WorldState> run_scenario(const Scenario& s);

/// Continuous-time evaluation of one agent's waypoint motion; agrees with
/// step() at tick multiples. Returns (position, velocity).
std::pair<Vec2, Vec2> state_at(const Agent& agent, double t_s);

/// Ground-truth track of one agent sampled at every tick.
AgentTrack ground_truth_track(const Scenario& s, std::string_view agent_id);

/// One event per agent pair per contiguous contact interval (center distance
/// strictly below the radius sum), sorted by time then lexicographic pair.
std::vector<CollisionEvent> detect_collisions(const std::vector<WorldState>& run,
                                              const Scenario& s);

/// Seeded random intersection scenario: pedestrians cross a 20 m x 20 m box
/// on randomized crosswalk paths at 1.0-1.8 m/s, vehicles traverse lanes at
/// 5-14 m/s. Identical seed yields an identical scenario.
Scenario generate_random_scenario(std::uint64_t seed, int n_pedestrians, int n_vehicles,
                                  double duration_s, double dt_s = 0.1,
                                  double px_per_meter = 20.0);

/// CSV dump with header t_s,agent_id,x_m,y_m,vx_mps,vy_mps.
std::string trajectory_csv(const std::vector<WorldState>& run);

}  // namespace dtwarn::sim
