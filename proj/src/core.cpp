#include "dtwarn/core.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace dtwarn {

const TrackSample& AgentTrack::nearest(double t_s) const {
  const TrackSample* best = &samples.front();
  double best_dt = std::abs(best->t_s - t_s);
  for (const auto& s : samples) {
    const double d = std::abs(s.t_s - t_s);
    if (d < best_dt) {
      best = &s;
      best_dt = d;
    }
  }
  return *best;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  return splitmix64(seed ^ fnv1a64(label));
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t k) {
  return splitmix64(derive_seed(seed, label) ^ splitmix64(k));
}

std::string format_sig6(double v) {
  if (v == 0.0) v = 0.0;  // normalize -0
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double quantize_sig6(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(format_sig6(v).c_str(), nullptr);
}

}  // namespace dtwarn
