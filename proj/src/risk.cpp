#include "dtwarn/risk.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace dtwarn::risk {

namespace {

constexpr double kTtcSlack = 1e-9;  // absorbs k*dt rounding in <= comparisons

// Closest pair of points between segments [a0,a1] and [b0,b1].
std::pair<Vec2, Vec2> closest_points(const Vec2& a0, const Vec2& a1, const Vec2& b0,
                                     const Vec2& b1) {
  const Vec2 d1 = a1 - a0;
  const Vec2 d2 = b1 - b0;
  const Vec2 r = a0 - b0;
  const double la = d1.squaredNorm();
  const double lb = d2.squaredNorm();
  const double f = d2.dot(r);

  double s = 0.0, t = 0.0;
  if (la <= 1e-18 && lb <= 1e-18) {
    // both degenerate
  } else if (la <= 1e-18) {
    t = std::clamp(f / lb, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (lb <= 1e-18) {
      s = std::clamp(-c / la, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = la * lb - b * b;
      if (denom > 1e-18) s = std::clamp((b * f - c * lb) / denom, 0.0, 1.0);
      t = (b * s + f) / lb;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / la, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / la, 0.0, 1.0);
      }
    }
  }
  return {a0 + d1 * s, b0 + d2 * t};
}

// Occupancy hull [first entry, last exit] of a track within `radius` of a
// point, over the track's tick samples.
std::optional<std::pair<double, double>> occupancy_window(const AgentTrack& track,
                                                          const Vec2& point, double radius) {
  std::optional<double> first, last;
  for (const auto& s : track.samples) {
    if ((s.pos - point).norm() < radius) {
      if (!first) first = s.t_s;
      last = s.t_s;
    }
  }
  if (!first) return std::nullopt;
  return std::make_pair(*first, *last);
}

}  // namespace

void RiskThresholds::validate() const {
  if (!(ttc_threshold_s > 0.0)) throw ValidationError("ttc_threshold_s", "must be > 0");
  if (!(danger_distance_px > 0.0)) throw ValidationError("danger_distance_px", "must be > 0");
  if (!(px_per_meter > 0.0)) throw ValidationError("px_per_meter", "must be > 0");
}

std::optional<double> ConfusionMatrix::tpr() const {
  if (tp + fn == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

std::optional<double> ConfusionMatrix::fpr() const {
  if (fp + tn == 0) return std::nullopt;
  return static_cast<double>(fp) / static_cast<double>(fp + tn);
}

RiskAssessment compute_ttc(const predict::PredictedTrajectory& pedestrian,
                           const predict::PredictedTrajectory& hazard,
                           const RiskThresholds& thresholds) {
  if (pedestrian.points.size() != hazard.points.size())
    throw MismatchedHorizonError("trajectory horizons differ: " +
                                 std::to_string(pedestrian.points.size()) + " vs " +
                                 std::to_string(hazard.points.size()));
  if (std::abs(pedestrian.dt_s - hazard.dt_s) > 1e-9 ||
      std::abs(pedestrian.start_time_s - hazard.start_time_s) > 1e-9)
    throw ValidationError("start_time_s", "trajectories must share start time and dt");
  thresholds.validate();

  const double danger_m = thresholds.danger_distance_m();
  RiskAssessment a;
  a.pedestrian = pedestrian.agent;
  a.hazard = hazard.agent;
  a.assessed_at_s = pedestrian.start_time_s;
  a.min_predicted_distance_m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pedestrian.points.size(); ++k) {
    const double d = (pedestrian.points[k] - hazard.points[k]).norm();
    a.min_predicted_distance_m = std::min(a.min_predicted_distance_m, d);
    if (!a.ttc_s && d < danger_m) {
      a.ttc_s = static_cast<double>(k + 1) * pedestrian.dt_s;
    }
  }
  return a;
}

std::optional<WarningTrigger> decide_warning(const RiskAssessment& assessment,
                                             const RiskThresholds& thresholds) {
  if (!assessment.ttc_s) return std::nullopt;
  if (*assessment.ttc_s > thresholds.ttc_threshold_s + kTtcSlack) return std::nullopt;
  return WarningTrigger{assessment.pedestrian, assessment.hazard, *assessment.ttc_s,
                        assessment.assessed_at_s};
}

std::optional<double> compute_pet(const AgentTrack& track_a, const AgentTrack& track_b,
                                  double conflict_radius_m) {
  if (track_a.samples.size() < 1 || track_b.samples.size() < 1) return std::nullopt;

  // Conflict point: midpoint of the closest approach between the two paths.
  const auto n_segments = [](const std::vector<TrackSample>& s) {
    return s.size() > 1 ? s.size() - 1 : 1;  // lone sample acts as a point segment
  };
  double best = std::numeric_limits<double>::infinity();
  Vec2 conflict(0.0, 0.0);
  const auto& sa = track_a.samples;
  const auto& sb = track_b.samples;
  for (std::size_t i = 0; i < n_segments(sa); ++i) {
    const Vec2 a0 = sa[i].pos;
    const Vec2 a1 = sa[std::min(i + 1, sa.size() - 1)].pos;
    for (std::size_t j = 0; j < n_segments(sb); ++j) {
      const Vec2 b0 = sb[j].pos;
      const Vec2 b1 = sb[std::min(j + 1, sb.size() - 1)].pos;
      const auto [pa, pb] = closest_points(a0, a1, b0, b1);
      const double d = (pa - pb).norm();
      if (d < best) {
        best = d;
        conflict = 0.5 * (pa + pb);
      }
    }
  }

  const auto wa = occupancy_window(track_a, conflict, conflict_radius_m);
  const auto wb = occupancy_window(track_b, conflict, conflict_radius_m);
  if (!wa || !wb) return std::nullopt;

  // Disjoint occupancy: the encroaching agent clears the conflict point
  // before the other arrives. Overlap is the collision regime, PET undefined.
  const auto& first = (wa->first <= wb->first) ? *wa : *wb;
  const auto& second = (wa->first <= wb->first) ? *wb : *wa;
  if (second.first <= first.second) return std::nullopt;
  return second.first - first.second;
}

namespace {

bool warns(const Episode& e, SweepAxis axis, double threshold) {
  if (axis == SweepAxis::kTtc) {
    return e.min_ttc_s.has_value() && *e.min_ttc_s <= threshold + kTtcSlack;
  }
  return e.min_distance_m < threshold;
}

}  // namespace

ConfusionMatrix classify_episodes(const std::vector<Episode>& episodes, SweepAxis axis,
                                  double threshold) {
  ConfusionMatrix m;
  for (const auto& e : episodes) {
    const bool warned = warns(e, axis, threshold);
    if (warned && e.collided) ++m.tp;
    else if (warned && !e.collided) ++m.fp;
    else if (!warned && e.collided) ++m.fn;
    else ++m.tn;
  }
  return m;
}

std::vector<RocPoint> sweep_roc(const std::vector<Episode>& episodes, SweepAxis axis,
                                const std::vector<double>& grid) {
  if (episodes.empty()) throw EmptyEpisodeSetError("no episodes to sweep");
  if (grid.empty()) throw ValidationError("grid", "must be non-empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1]))
      throw ValidationError("grid", "thresholds must increase strictly");
  }
  std::vector<RocPoint> points;
  points.reserve(grid.size());
  for (double thr : grid) {
    const ConfusionMatrix m = classify_episodes(episodes, axis, thr);
    points.push_back({thr, m.tpr(), m.fpr()});
  }
  return points;
}

const RocPoint& select_threshold(std::span<const RocPoint> points) {
  if (points.empty()) throw ValidationError("points", "must be non-empty");
  const RocPoint* best = &points[0];
  auto j = [](const RocPoint& p) { return p.tpr.value_or(0.0) - p.fpr.value_or(0.0); };
  for (const auto& p : points) {
    if (j(p) > j(*best)) best = &p;  // ties keep the earlier (smaller) threshold
  }
  return *best;
}

ConfusionMatrix build_confusion_matrix(const std::vector<std::pair<bool, bool>>& warned_collided) {
  ConfusionMatrix m;
  for (const auto& [warned, collided] : warned_collided) {
    if (warned && collided) ++m.tp;
    else if (warned && !collided) ++m.fp;
    else if (!warned && collided) ++m.fn;
    else ++m.tn;
  }
  return m;
}

std::string roc_csv(SweepAxis axis, const std::vector<RocPoint>& points) {
  const char* axis_name = axis == SweepAxis::kTtc ? "ttc" : "distance";
  std::string out = "axis,threshold,tpr,fpr\n";
  char line[128];
  for (const auto& p : points) {
    const std::string tpr = p.tpr ? format_sig6(*p.tpr) : "";
    const std::string fpr = p.fpr ? format_sig6(*p.fpr) : "";
    std::snprintf(line, sizeof(line), "%s,%.6g,%s,%s\n", axis_name, p.threshold, tpr.c_str(),
                  fpr.c_str());
    out += line;
  }
  return out;
}

std::string confusion_json(const ConfusionMatrix& m) {
  nlohmann::ordered_json j;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["fn"] = m.fn;
  j["tn"] = m.tn;
  if (auto v = m.tpr()) j["tpr"] = *v;
  if (auto v = m.fpr()) j["fpr"] = *v;
  return j.dump(2) + "\n";
}

}  // namespace dtwarn::risk
