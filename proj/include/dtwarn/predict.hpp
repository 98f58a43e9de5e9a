#pragma once

#include "dtwarn/core.hpp"
#include "dtwarn/errors.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dtwarn::predict {

/// Constant-velocity filter state: mean (x, y, vx, vy), 4x4 covariance.
struct KfState {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
};

/// Bootstrap from the first two position fixes: finite-difference velocity,
/// covariance diag(1, 1, 4, 4) in SI units.
KfState kf_init(const Vec2& p1, double t1, const Vec2& p2, double t2);

/// Time update under the constant-velocity transition; process noise is the
/// discrete white-acceleration model scaled by accel_sigma^2.
KfState kf_predict(const KfState& state, double dt_s, double accel_sigma);

/// Position-only measurement update (Joseph form, keeps the covariance PSD).
KfState kf_update(const KfState& state, const Vec2& measurement, double measurement_sigma_m);

struct PredictedTrajectory {
  std::string agent;
  double start_time_s = 0.0;
  double dt_s = 0.0;
  std::vector<Vec2> points;  // points[k] is the position at start + (k+1)*dt
};

/// Open-loop rollout: horizon_steps repeated kf_predict calls with no
/// further measurements.
PredictedTrajectory predict_trajectory(const KfState& state, int horizon_steps, double dt_s,
                                       std::string agent = {}, double start_time_s = 0.0,
                                       double accel_sigma = 0.0);

struct PredictionMetrics {
  double ade_m = 0.0;
  double fde_m = 0.0;
  int n_samples = 0;
};

struct CoverageError : Error {
  using Error::Error;
};

/// ADE = mean Euclidean displacement over all predicted steps against the
/// nearest-tick ground-truth samples; FDE = displacement at the final step.
PredictionMetrics evaluate_ade_fde(const PredictedTrajectory& predicted, const AgentTrack& truth);

/// Extension point for trajectory predictors. The built-in implementation is
/// the constant-velocity Kalman tracker; learned predictors (Trajectron++
/// and friends) would implement the same surface and buffer history in
/// observe(). Risk assessment only depends on this interface.
class TrackPredictor {
 public:
  virtual ~TrackPredictor() = default;
  virtual void observe(double t_s, const Vec2& position) = 0;
  virtual bool ready() const = 0;
  virtual PredictedTrajectory predict(int horizon_steps, double dt_s) const = 0;
};

class KalmanCvTracker final : public TrackPredictor {
 public:
  KalmanCvTracker(std::string agent_id, double accel_sigma, double measurement_sigma_m);

  void observe(double t_s, const Vec2& position) override;
  bool ready() const override { return state_.has_value(); }
  PredictedTrajectory predict(int horizon_steps, double dt_s) const override;

  const KfState& state() const;  // requires ready()
  const std::string& agent_id() const { return agent_id_; }

 private:
  std::string agent_id_;
  double accel_sigma_;
  double measurement_sigma_m_;
  std::optional<std::pair<double, Vec2>> first_fix_;
  std::optional<KfState> state_;
  double last_t_ = 0.0;
};

/// CSV with header predictor,ade_m,fde_m,n_samples.
std::string metrics_csv(const std::vector<std::pair<std::string, PredictionMetrics>>& rows);

}  // namespace dtwarn::predict
