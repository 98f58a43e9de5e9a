#include "dtwarn/latency_model.hpp"

namespace dtwarn {

double LatencyModel::sample(std::mt19937_64& rng) const {
  if (mean_ms <= 0.0) return 0.0;
  if (std_ms <= 0.0) return mean_ms;
  // Gamma with shape mean^2/var, scale var/mean: nonnegative support with the
  // configured mean and std reproduced exactly in expectation.
  const double var = std_ms * std_ms;
  std::gamma_distribution<double> dist(mean_ms * mean_ms / var, var / mean_ms);
  return dist(rng);
}

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::kReception: return "reception";
    case Stage::kPreprocessing: return "preprocessing";
    case Stage::kDetection: return "detection";
    case Stage::kTracking: return "tracking";
    case Stage::kMsgCreate: return "msg_create";
    case Stage::kMsgRetrieve: return "msg_retrieve";
  }
  return "unknown";
}

std::string_view network_name(NetworkProfile n) {
  switch (n) {
    case NetworkProfile::kEthernet: return "ethernet";
    case NetworkProfile::kWifi: return "wifi";
    case NetworkProfile::kLte: return "lte";
    case NetworkProfile::kFiveG: return "fiveg";
  }
  return "unknown";
}

NetworkProfile parse_network(std::string_view name) {
  for (auto n : kAllNetworks) {
    if (network_name(n) == name) return n;
  }
  throw ConfigError("network_profile", "unknown profile '" + std::string(name) +
                                           "' (expected ethernet|wifi|lte|fiveg)");
}

}  // namespace dtwarn
