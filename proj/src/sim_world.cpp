#include "dtwarn/sim_world.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace dtwarn::sim {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kTimeEps = 1e-9;

std::string agent_field(const std::string& id, const char* field) {
  return "agents[" + id + "]." + field;
}

}  // namespace

std::string_view kind_name(AgentKind k) {
  switch (k) {
    case AgentKind::kPedestrian: return "pedestrian";
    case AgentKind::kVehicle: return "vehicle";
    case AgentKind::kScooter: return "scooter";
  }
  return "unknown";
}

AgentKind parse_kind(std::string_view name) {
  if (name == "pedestrian") return AgentKind::kPedestrian;
  if (name == "vehicle") return AgentKind::kVehicle;
  if (name == "scooter") return AgentKind::kScooter;
  throw ValidationError("kind", "unknown agent kind '" + std::string(name) + "'");
}

double default_radius(AgentKind k) {
  switch (k) {
    case AgentKind::kPedestrian: return 0.3;
    case AgentKind::kVehicle: return 1.0;
    case AgentKind::kScooter: return 0.5;
  }
  return 0.3;
}

void Scenario::validate() const {
  if (!(dt_s > 0.0)) throw ValidationError("dt_s", "must be > 0");
  if (!(duration_s >= dt_s)) throw ValidationError("duration_s", "must be >= dt_s");
  if (!(px_per_meter > 0.0)) throw ValidationError("px_per_meter", "must be > 0");
  std::set<std::string> ids;
  for (const auto& a : agents) {
    if (a.id.empty()) throw ValidationError("id", "agent id must be non-empty");
    if (!ids.insert(a.id).second)
      throw ValidationError("id", "duplicate agent id '" + a.id + "'");
    if (!(a.radius_m > 0.0))
      throw ValidationError(agent_field(a.id, "radius_m"), "must be > 0");
    if (a.waypoints.empty())
      throw ValidationError(agent_field(a.id, "waypoints"), "must be non-empty");
    for (const auto& w : a.waypoints) {
      if (!(w.speed_mps >= 0.0))
        throw ValidationError(agent_field(a.id, "waypoints.speed_mps"), "must be >= 0");
      if (!std::isfinite(w.pos.x()) || !std::isfinite(w.pos.y()))
        throw ValidationError(agent_field(a.id, "waypoints"), "coordinates must be finite");
    }
  }
}

long Scenario::n_ticks() const {
  return static_cast<long>(std::floor(duration_s / dt_s + kTimeEps));
}

const Agent* Scenario::find_agent(std::string_view id) const {
  for (const auto& a : agents) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

// --- Scenario I/O ------------------------------------------------------------

Scenario load_scenario(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario JSON: ") + e.what());
  }
  Scenario s;
  try {
    s.seed = j.at("seed").get<std::uint64_t>();
    s.duration_s = j.at("duration_s").get<double>();
    s.dt_s = j.at("dt_s").get<double>();
    s.px_per_meter = j.at("px_per_meter").get<double>();
    for (const auto& ja : j.at("agents")) {
      Agent a;
      a.id = ja.at("id").get<std::string>();
      a.kind = parse_kind(ja.at("kind").get<std::string>());
      a.radius_m = ja.at("radius_m").get<double>();
      for (const auto& jw : ja.at("waypoints")) {
        Waypoint w;
        w.pos = Vec2(jw.at("x_m").get<double>(), jw.at("y_m").get<double>());
        w.speed_mps = jw.at("speed_mps").get<double>();
        a.waypoints.push_back(w);
      }
      s.agents.push_back(std::move(a));
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("scenario", e.what());
  }
  s.validate();
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

std::string save_scenario(const Scenario& s) {
  ordered_json j;
  j["seed"] = s.seed;
  j["duration_s"] = s.duration_s;
  j["dt_s"] = s.dt_s;
  j["px_per_meter"] = s.px_per_meter;
  j["agents"] = ordered_json::array();
  for (const auto& a : s.agents) {
    ordered_json ja;
    ja["id"] = a.id;
    ja["kind"] = std::string(kind_name(a.kind));
    ja["radius_m"] = a.radius_m;
    ja["waypoints"] = ordered_json::array();
    for (const auto& w : a.waypoints) {
      ja["waypoints"].push_back({{"x_m", w.pos.x()}, {"y_m", w.pos.y()}, {"speed_mps", w.speed_mps}});
    }
    j["agents"].push_back(std::move(ja));
  }
  return j.dump(2) + "\n";
}

void save_scenario_file(const Scenario& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write scenario file: " + path);
  out << save_scenario(s);
}

// --- Simulation ---------------------------------------------------------------

namespace {

// Velocity along the leg currently being traveled; zero at rest or on a
// zero-speed leg.
void refresh_velocity(AgentState& st, const Agent& agent) {
  const auto& wps = agent.waypoints;
  if (st.target < wps.size() && wps[st.target - 1].speed_mps > 0.0) {
    const Vec2 d = wps[st.target].pos - st.pos;
    const double n = d.norm();
    st.vel = (n > 0.0) ? Vec2(d / n * wps[st.target - 1].speed_mps) : Vec2(0.0, 0.0);
  } else {
    st.vel.setZero();
  }
}

// Advances one agent by tau seconds of travel time along its waypoint legs,
// carrying leftover time across waypoint corners.
void advance_agent(AgentState& st, const Agent& agent, double tau) {
  const auto& wps = agent.waypoints;
  while (tau > 0.0 && st.target < wps.size()) {
    const double speed = wps[st.target - 1].speed_mps;
    if (speed <= 0.0) break;  // zero-speed leg pins the agent
    const Vec2 to_target = wps[st.target].pos - st.pos;
    const double dist = to_target.norm();
    const double leg_time = dist / speed;
    if (leg_time > tau) {
      st.pos += (to_target / dist) * speed * tau;
      break;
    }
    st.pos = wps[st.target].pos;
    tau -= leg_time;
    ++st.target;
  }
  refresh_velocity(st, agent);
}

}  // namespace

WorldState initial_state(const Scenario& s) {
  WorldState w;
  w.time_s = 0.0;
  w.dt_s = s.dt_s;
  for (const auto& a : s.agents) {
    AgentState st;
    st.id = a.id;
    st.pos = a.waypoints.front().pos;
    st.target = a.waypoints.size() > 1 ? 1 : a.waypoints.size();
    refresh_velocity(st, a);
    w.agents.push_back(std::move(st));
  }
  return w;
}

WorldState step(const WorldState& state, const Scenario& s) {
  if (state.time_s + s.dt_s > s.duration_s + kTimeEps) return state;  // saturate
  WorldState next = state;
  next.time_s = state.time_s + s.dt_s;
  for (std::size_t i = 0; i < next.agents.size(); ++i) {
    advance_agent(next.agents[i], s.agents[i], s.dt_s);
  }
  return next;
}

std::vector<WorldState> run_scenario(const Scenario& s) {
  std::vector<WorldState> states;
  states.reserve(static_cast<std::size_t>(s.n_ticks()) + 1);
  states.push_back(initial_state(s));
  for (long k = 0; k < s.n_ticks(); ++k) {
    states.push_back(step(states.back(), s));
  }
  return states;
}

std::pair<Vec2, Vec2> state_at(const Agent& agent, double t_s) {
  AgentState st;
  st.id = agent.id;
  st.pos = agent.waypoints.front().pos;
  st.target = agent.waypoints.size() > 1 ? 1 : agent.waypoints.size();
  refresh_velocity(st, agent);
  if (t_s > 0.0) advance_agent(st, agent, t_s);
  return {st.pos, st.vel};
}

AgentTrack ground_truth_track(const Scenario& s, std::string_view agent_id) {
  const Agent* agent = s.find_agent(agent_id);
  if (agent == nullptr) throw ValidationError("agent_id", "unknown agent '" + std::string(agent_id) + "'");
  AgentTrack track;
  track.agent_id = std::string(agent_id);
  for (long k = 0; k <= s.n_ticks(); ++k) {
    const double t = static_cast<double>(k) * s.dt_s;
    auto [pos, vel] = state_at(*agent, t);
    track.samples.push_back({t, pos, vel});
  }
  return track;
}

std::vector<CollisionEvent> detect_collisions(const std::vector<WorldState>& run,
                                              const Scenario& s) {
  std::map<std::string, double> radius;
  for (const auto& a : s.agents) radius[a.id] = a.radius_m;

  std::vector<CollisionEvent> events;
  std::set<std::pair<std::string, std::string>> in_contact;
  for (const auto& state : run) {
    // pairs sorted lexicographically so per-tick event order is canonical
    std::vector<const AgentState*> agents;
    agents.reserve(state.agents.size());
    for (const auto& a : state.agents) agents.push_back(&a);
    std::sort(agents.begin(), agents.end(),
              [](const AgentState* a, const AgentState* b) { return a->id < b->id; });

    for (std::size_t i = 0; i < agents.size(); ++i) {
      for (std::size_t j = i + 1; j < agents.size(); ++j) {
        const auto key = std::make_pair(agents[i]->id, agents[j]->id);
        const double limit = radius.at(key.first) + radius.at(key.second);
        const bool touching = (agents[i]->pos - agents[j]->pos).norm() < limit;
        if (touching && !in_contact.count(key)) {
          events.push_back({state.time_s, key.first, key.second});
          in_contact.insert(key);
        } else if (!touching) {
          in_contact.erase(key);
        }
      }
    }
  }
  return events;
}

// --- Random scenario generation ------------------------------------------------

namespace {

// Intersection geometry in meters: a 20 m box around the origin, one
// north-south and one east-west road, right-hand lanes at +-kLaneOffset,
// crosswalks at +-kCrosswalkOffset from center.
constexpr double kBoxHalf = 10.0;
constexpr double kLaneOffset = 1.75;
constexpr double kCrosswalkOffset = 5.0;
constexpr double kCrosswalkHalfSpan = 6.0;

struct Heading {
  Vec2 dir;
  Vec2 lane_point;  // a point on the lane line at the box entry edge
};

}  // namespace

Scenario generate_random_scenario(std::uint64_t seed, int n_pedestrians, int n_vehicles,
                                  double duration_s, double dt_s, double px_per_meter) {
  if (n_pedestrians < 0 || n_vehicles < 0)
    throw ValidationError("counts", "agent counts must be >= 0");
  Scenario s;
  s.seed = seed;
  s.duration_s = duration_s;
  s.dt_s = dt_s;
  s.px_per_meter = px_per_meter;

  std::mt19937_64 rng(derive_seed(seed, "sim-world"));
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  // Vehicles: straight through on one of four approaches, entering the box at
  // a random time. The pre-entry leg is placed so the agent reaches the box
  // edge exactly at its entry time; past the exit each vehicle parks at a
  // spread-out rest point so finished agents never overlap.
  const Heading approaches[4] = {
      {{0.0, 1.0}, {kLaneOffset, -kBoxHalf}},    // northbound
      {{0.0, -1.0}, {-kLaneOffset, kBoxHalf}},   // southbound
      {{1.0, 0.0}, {-kBoxHalf, -kLaneOffset}},   // eastbound
      {{-1.0, 0.0}, {kBoxHalf, kLaneOffset}},    // westbound
  };
  int parked[4] = {0, 0, 0, 0};
  for (int i = 0; i < n_vehicles; ++i) {
    const int ai = static_cast<int>(u01(rng) * 4.0) % 4;
    const Heading& ap = approaches[ai];
    const double speed = 5.0 + 9.0 * u01(rng);
    const double t_enter = 0.75 * duration_s * u01(rng);

    Agent v;
    v.id = "veh" + std::to_string(i);
    v.kind = AgentKind::kVehicle;
    v.radius_m = default_radius(v.kind);
    const Vec2 entry = ap.lane_point;
    const Vec2 start = entry - ap.dir * (speed * t_enter);
    const Vec2 rest = entry + ap.dir * (2.0 * kBoxHalf + 8.0 + 4.0 * parked[ai]++);
    v.waypoints = {{start, speed}, {rest, speed}};
    s.agents.push_back(std::move(v));
  }

  // Pedestrians: one of four crosswalks, random direction, a small lateral
  // jitter standing in for crosswalk width, and a staged approach along the
  // crossing line timed to reach the crosswalk at a random entry time.
  int rested[8] = {};
  for (int i = 0; i < n_pedestrians; ++i) {
    const int cw = static_cast<int>(u01(rng) * 4.0) % 4;
    const bool forward = u01(rng) < 0.5;
    const double jitter = -1.5 + 3.0 * u01(rng);
    const double speed = 1.0 + 0.8 * u01(rng);
    const double t_enter = 0.75 * duration_s * u01(rng);

    // cw 0/1: cross the NS road along y = +-kCrosswalkOffset;
    // cw 2/3: cross the EW road along x = +-kCrosswalkOffset.
    Vec2 a, b;
    if (cw < 2) {
      const double y = (cw == 0 ? kCrosswalkOffset : -kCrosswalkOffset) + jitter;
      a = Vec2(-kCrosswalkHalfSpan, y);
      b = Vec2(kCrosswalkHalfSpan, y);
    } else {
      const double x = (cw == 2 ? kCrosswalkOffset : -kCrosswalkOffset) + jitter;
      a = Vec2(x, -kCrosswalkHalfSpan);
      b = Vec2(x, kCrosswalkHalfSpan);
    }
    if (!forward) std::swap(a, b);
    const Vec2 dir = (b - a).normalized();

    Agent p;
    p.id = "ped" + std::to_string(i);
    p.kind = AgentKind::kPedestrian;
    p.radius_m = default_radius(p.kind);
    const Vec2 start = a - dir * (speed * t_enter);
    const int corner = cw * 2 + (forward ? 0 : 1);
    const Vec2 rest = b + dir * (1.0 + 0.8 * rested[corner]++);
    p.waypoints = {{start, speed}, {a, speed}, {b, speed}, {rest, speed}};
    s.agents.push_back(std::move(p));
  }

  s.validate();
  return s;
}

std::string trajectory_csv(const std::vector<WorldState>& run) {
  std::string out = "t_s,agent_id,x_m,y_m,vx_mps,vy_mps\n";
  char line[160];
  for (const auto& state : run) {
    for (const auto& a : state.agents) {
      std::snprintf(line, sizeof(line), "%.4f,%s,%.9g,%.9g,%.9g,%.9g\n", state.time_s,
                    a.id.c_str(), a.pos.x(), a.pos.y(), a.vel.x(), a.vel.y());
      out += line;
    }
  }
  return out;
}

}  // namespace dtwarn::sim
