#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dtwarn {

using Vec2 = Eigen::Vector2d;

/// One timestamped sample of an agent's planar motion.
struct TrackSample {
  double t_s = 0.0;
  Vec2 pos{0.0, 0.0};
  Vec2 vel{0.0, 0.0};
};

/// Timestamped 2-D trajectory of one agent. Used both for ground truth
/// (velocity populated) and for estimated tracks (velocity may be zero).
struct AgentTrack {
  std::string agent_id;
  std::vector<TrackSample> samples;

  bool empty() const { return samples.empty(); }

  /// Sample with timestamp closest to `t_s`. Track must be non-empty.
  const TrackSample& nearest(double t_s) const;
};

// --- Seed fan-out -----------------------------------------------------------
//
// Every stochastic component derives its own stream from one run seed so a
// single --seed flag reproduces a full run. Derivation is
// splitmix64(seed ^ fnv1a64(label) [^ mix(k)]), stable across platforms.

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t k);

// --- Canonical float text ----------------------------------------------------

/// Shortest "%.6g" rendering, used by the canonical message encoding.
std::string format_sig6(double v);

/// Rounds `v` to the value that format_sig6 would print. Message fields are
/// quantized on construction so encode/decode round-trips are exact.
double quantize_sig6(double v);

}  // namespace dtwarn
