#pragma once

#include "dtwarn/errors.hpp"

#include <array>
#include <random>
#include <string>
#include <string_view>

namespace dtwarn {

/// Latency distribution for one pipeline element, parameterized by mean and
/// standard deviation in milliseconds. Samples are nonnegative and the
/// sampler is moment-matched: the sample mean converges to `mean_ms` and the
/// sample std to `std_ms`. A gamma law is used instead of a zero-truncated
/// normal because truncation biases the mean for low mean/std ratios.
struct LatencyModel {
  double mean_ms = 0.0;
  double std_ms = 0.0;

  double sample(std::mt19937_64& rng) const;
};

enum class Stage {
  kReception = 0,
  kPreprocessing,
  kDetection,
  kTracking,
  kMsgCreate,
  kMsgRetrieve,
};

inline constexpr std::array<Stage, 6> kAllStages = {
    Stage::kReception, Stage::kPreprocessing, Stage::kDetection,
    Stage::kTracking,  Stage::kMsgCreate,     Stage::kMsgRetrieve,
};

std::string_view stage_name(Stage s);

enum class NetworkProfile { kEthernet, kWifi, kLte, kFiveG };

inline constexpr std::array<NetworkProfile, 4> kAllNetworks = {
    NetworkProfile::kEthernet, NetworkProfile::kWifi,
    NetworkProfile::kLte, NetworkProfile::kFiveG,
};

std::string_view network_name(NetworkProfile n);
NetworkProfile parse_network(std::string_view name);  // throws ConfigError

}  // namespace dtwarn
