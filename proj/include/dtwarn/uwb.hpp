#pragma once

#include "dtwarn/core.hpp"
#include "dtwarn/errors.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dtwarn::uwb {

struct Anchor {
  std::string id;
  Vec2 pos{0.0, 0.0};
};

/// Fixed ranging infrastructure. At least three anchors, pairwise distinct,
/// not all collinear (max triangle area above kCollinearAreaM2).
struct AnchorSet {
  std::vector<Anchor> anchors;

  void validate() const;  // throws ValidationError
  const Anchor* find(std::string_view id) const;
};

inline constexpr double kCollinearAreaM2 = 1e-6;

AnchorSet load_anchors(const std::string& json_text);
AnchorSet load_anchors_file(const std::string& path);
std::string save_anchors(const AnchorSet& set);

/// One two-way-ranging reading. `valid == false` marks a simulated blockage.
struct RangeMeasurement {
  std::string anchor_id;
  double distance_m = 0.0;
  double timestamp_s = 0.0;
  bool valid = true;
};

/// Range corruption model: Gaussian noise, independent dropout, and an
/// occasional positive non-line-of-sight bias.
struct RangeNoiseModel {
  double sigma_m = 0.0;
  double dropout_p = 0.0;
  double nlos_bias_m = 0.3;
  double nlos_p = 0.0;

  void validate() const;
};

enum class SolveStatus {
  kConverged,      // step norm fell below 1e-9 m
  kMaxIterations,  // iteration cap hit, final step <= 1e-6 m
  kNotConverged,   // iteration cap hit, final step > 1e-6 m
};

struct PositionEstimate {
  Vec2 position{0.0, 0.0};
  double residual_rms_m = 0.0;
  int n_ranges_used = 0;
  double timestamp_s = 0.0;
  SolveStatus status = SolveStatus::kConverged;
};

struct InsufficientRangesError : Error {
  using Error::Error;
};
struct DegenerateGeometryError : Error {
  using Error::Error;
};

/// One reading per anchor, in anchor order: true distance plus Gaussian noise,
/// plus nlos_bias_m with probability nlos_p, dropped (valid=false) with
/// probability dropout_p. Deterministic for a fixed seed.
std::vector<RangeMeasurement> simulate_ranges(const Vec2& true_position, const AnchorSet& anchors,
                                              const RangeNoiseModel& noise, std::uint64_t rng_seed,
                                              double timestamp_s);

/// Least-squares position fix: linearized anchor-difference initialization
/// followed by Gauss-Newton refinement of
///   sum_i (|p - a_i| - r_i)^2
/// until the step norm drops below 1e-9 m or 50 iterations. Requires at least
/// three valid ranges to distinct, non-collinear anchors.
PositionEstimate multilaterate(const std::vector<RangeMeasurement>& ranges,
                               const AnchorSet& anchors);

/// Euclidean localization error |p_hat - p|.
double localization_error(const PositionEstimate& estimate, const Vec2& truth);

}  // namespace dtwarn::uwb
