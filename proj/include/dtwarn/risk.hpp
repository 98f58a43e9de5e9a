#pragma once

#include "dtwarn/core.hpp"
#include "dtwarn/errors.hpp"
#include "dtwarn/predict.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dtwarn::risk {

/// Warning decision thresholds: TTC threshold tau (seconds) and danger
/// distance d (pixels, converted once through px_per_meter). Proximity uses
/// strict < on distance; the warning rule uses <= on TTC versus tau.
struct RiskThresholds {
  double ttc_threshold_s = 1.1;
  double danger_distance_px = 30.0;
  double px_per_meter = 20.0;

  double danger_distance_m() const { return danger_distance_px / px_per_meter; }
  void validate() const;
};

struct RiskAssessment {
  std::string pedestrian;
  std::string hazard;
  std::optional<double> ttc_s;        // smallest k*dt with distance < d, k >= 1
  double min_predicted_distance_m = 0.0;
  double assessed_at_s = 0.0;
};

struct WarningTrigger {
  std::string pedestrian;
  std::string hazard;
  double ttc_s = 0.0;
  double assessed_at_s = 0.0;
};

struct RocPoint {
  double threshold = 0.0;
  std::optional<double> tpr;  // absent when there are no positive episodes
  std::optional<double> fpr;  // absent when there are no negative episodes
};

struct ConfusionMatrix {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;

  long total() const { return tp + fp + fn + tn; }
  std::optional<double> tpr() const;
  std::optional<double> fpr() const;
};

struct MismatchedHorizonError : Error {
  using Error::Error;
};
struct EmptyEpisodeSetError : Error {
  using Error::Error;
};

/// Scans predicted step pairs k = 1..horizon; TTC is the first step whose
/// inter-agent distance falls strictly below the danger distance. Both
/// trajectories must share start time, dt, and horizon length.
RiskAssessment compute_ttc(const predict::PredictedTrajectory& pedestrian,
                           const predict::PredictedTrajectory& hazard,
                           const RiskThresholds& thresholds);

/// Triggers iff a TTC exists and ttc <= tau (1e-9 slack absorbs the k*dt
/// rounding of the TTC grid).
std::optional<WarningTrigger> decide_warning(const RiskAssessment& assessment,
                                             const RiskThresholds& thresholds);

inline constexpr double kConflictRadiusM = 0.5;

/// Post-encroachment time over two completed ground-truth tracks. The
/// conflict point is the closest approach of the two polyline paths; PET is
/// the gap between one agent last leaving the conflict radius and the other
/// first arriving. Absent when either never enters or their occupancy
/// windows overlap (collision regime).
std::optional<double> compute_pet(const AgentTrack& track_a, const AgentTrack& track_b,
                                  double conflict_radius_m = kConflictRadiusM);

enum class SweepAxis { kTtc, kDistance };

/// One (pedestrian, hazard) pair over one run, reduced to its minima.
struct Episode {
  std::optional<double> min_ttc_s;
  double min_distance_m = 0.0;
  bool collided = false;
};

/// Threshold sweep: TTC axis warns iff min-ttc <= threshold; distance axis
/// warns iff min predicted distance < threshold. Grid must increase strictly.
std::vector<RocPoint> sweep_roc(const std::vector<Episode>& episodes, SweepAxis axis,
                                const std::vector<double>& grid);

/// Operating point maximizing Youden's J = tpr - fpr; ties break toward the
/// smaller threshold. Absent rates count as zero.
const RocPoint& select_threshold(std::span<const RocPoint> points);

ConfusionMatrix build_confusion_matrix(const std::vector<std::pair<bool, bool>>& warned_collided);

ConfusionMatrix classify_episodes(const std::vector<Episode>& episodes, SweepAxis axis,
                                  double threshold);

// Reference operating points reported for the deployed system; kept as
// fixtures for arithmetic tests, not as acceptance targets.
inline constexpr RocPoint kReferenceTtcOperatingPoint{1.1, 0.958, 0.4};
inline constexpr RocPoint kReferenceDistanceOperatingPoint{30.0, 0.958, 0.345};

/// CSV with header axis,threshold,tpr,fpr (absent rates render empty).
std::string roc_csv(SweepAxis axis, const std::vector<RocPoint>& points);

/// JSON object {tp, fp, fn, tn, tpr, fpr}; undefined rates are omitted.
std::string confusion_json(const ConfusionMatrix& m);

}  // namespace dtwarn::risk
