#pragma once

#include "dtwarn/core.hpp"
#include "dtwarn/sim_world.hpp"

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace testutil {

// Independent pairwise-scan collision oracle: recomputes contact intervals
// directly from the state sequence, no shared code with detect_collisions.
inline std::vector<dtwarn::sim::CollisionEvent> brute_force_collisions(
    const std::vector<dtwarn::sim::WorldState>& run, const dtwarn::sim::Scenario& s) {
  std::map<std::string, double> radius;
  for (const auto& a : s.agents) radius[a.id] = a.radius_m;
  std::set<std::pair<std::string, std::string>> touching;
  std::vector<dtwarn::sim::CollisionEvent> events;
  for (const auto& st : run) {
    for (std::size_t i = 0; i < st.agents.size(); ++i) {
      for (std::size_t j = 0; j < st.agents.size(); ++j) {
        if (st.agents[i].id >= st.agents[j].id) continue;
        const auto key = std::make_pair(st.agents[i].id, st.agents[j].id);
        const double d = (st.agents[i].pos - st.agents[j].pos).norm();
        if (d < radius.at(key.first) + radius.at(key.second)) {
          if (!touching.count(key)) {
            touching.insert(key);
            events.push_back({st.time_s, key.first, key.second});
          }
        } else {
          touching.erase(key);
        }
      }
    }
  }
  std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    return std::tie(a.time_s, a.agent_a, a.agent_b) < std::tie(b.time_s, b.agent_a, b.agent_b);
  });
  return events;
}

inline double mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

inline double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace testutil
