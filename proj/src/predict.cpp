#include "dtwarn/predict.hpp"

#include <cmath>
#include <cstdio>

namespace dtwarn::predict {

namespace {

Eigen::Matrix4d transition(double dt) {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  return f;
}

// Discrete white-acceleration process noise, per-axis blocks
// [dt^4/4, dt^3/2; dt^3/2, dt^2] scaled by sigma^2.
Eigen::Matrix4d process_noise(double dt, double accel_sigma) {
  const double s2 = accel_sigma * accel_sigma;
  const double dt2 = dt * dt;
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  q(0, 0) = q(1, 1) = 0.25 * dt2 * dt2 * s2;
  q(0, 2) = q(2, 0) = 0.5 * dt2 * dt * s2;
  q(1, 3) = q(3, 1) = 0.5 * dt2 * dt * s2;
  q(2, 2) = q(3, 3) = dt2 * s2;
  return q;
}

Eigen::Matrix4d symmetrize(const Eigen::Matrix4d& p) { return 0.5 * (p + p.transpose()); }

}  // namespace

KfState kf_init(const Vec2& p1, double t1, const Vec2& p2, double t2) {
  const double dt = t2 - t1;
  if (dt == 0.0) throw ValidationError("t2", "bootstrap fixes need distinct timestamps");
  KfState s;
  const Vec2 v = (p2 - p1) / dt;
  s.mean << p2.x(), p2.y(), v.x(), v.y();
  s.cov = Eigen::Vector4d(1.0, 1.0, 4.0, 4.0).asDiagonal();
  return s;
}

KfState kf_predict(const KfState& state, double dt_s, double accel_sigma) {
  if (!(dt_s > 0.0)) throw ValidationError("dt_s", "must be > 0");
  const Eigen::Matrix4d f = transition(dt_s);
  KfState next;
  next.mean = f * state.mean;
  next.cov = symmetrize(f * state.cov * f.transpose() + process_noise(dt_s, accel_sigma));
  return next;
}

KfState kf_update(const KfState& state, const Vec2& measurement, double measurement_sigma_m) {
  if (!(measurement_sigma_m > 0.0))
    throw ValidationError("measurement_sigma_m", "must be > 0");
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  const Eigen::Matrix2d r = measurement_sigma_m * measurement_sigma_m * Eigen::Matrix2d::Identity();

  const Eigen::Matrix2d innov_cov = h * state.cov * h.transpose() + r;
  const Eigen::Matrix<double, 4, 2> gain = state.cov * h.transpose() * innov_cov.inverse();
  const Vec2 innovation = measurement - h * state.mean;

  KfState next;
  next.mean = state.mean + gain * innovation;
  // Joseph form keeps the posterior covariance symmetric PSD.
  const Eigen::Matrix4d ikh = Eigen::Matrix4d::Identity() - gain * h;
  next.cov = symmetrize(ikh * state.cov * ikh.transpose() + gain * r * gain.transpose());
  return next;
}

PredictedTrajectory predict_trajectory(const KfState& state, int horizon_steps, double dt_s,
                                       std::string agent, double start_time_s,
                                       double accel_sigma) {
  if (horizon_steps < 1) throw ValidationError("horizon_steps", "must be >= 1");
  PredictedTrajectory traj;
  traj.agent = std::move(agent);
  traj.start_time_s = start_time_s;
  traj.dt_s = dt_s;
  traj.points.reserve(static_cast<std::size_t>(horizon_steps));
  KfState rolling = state;
  for (int k = 0; k < horizon_steps; ++k) {
    rolling = kf_predict(rolling, dt_s, accel_sigma);
    traj.points.emplace_back(rolling.mean(0), rolling.mean(1));
  }
  return traj;
}

PredictionMetrics evaluate_ade_fde(const PredictedTrajectory& predicted, const AgentTrack& truth) {
  if (predicted.points.empty()) throw ValidationError("points", "must be non-empty");
  if (truth.empty()) throw CoverageError("ground-truth track is empty");

  PredictionMetrics m;
  double sum = 0.0;
  double last = 0.0;
  for (std::size_t k = 0; k < predicted.points.size(); ++k) {
    const double t = predicted.start_time_s + static_cast<double>(k + 1) * predicted.dt_s;
    const TrackSample& s = truth.nearest(t);
    if (std::abs(s.t_s - t) > 0.5 * predicted.dt_s + 1e-9)
      throw CoverageError("truth track does not cover predicted step at t=" + std::to_string(t));
    last = (predicted.points[k] - s.pos).norm();
    sum += last;
  }
  m.n_samples = static_cast<int>(predicted.points.size());
  m.ade_m = sum / static_cast<double>(m.n_samples);
  m.fde_m = last;
  return m;
}

KalmanCvTracker::KalmanCvTracker(std::string agent_id, double accel_sigma,
                                 double measurement_sigma_m)
    : agent_id_(std::move(agent_id)),
      accel_sigma_(accel_sigma),
      measurement_sigma_m_(measurement_sigma_m) {}

void KalmanCvTracker::observe(double t_s, const Vec2& position) {
  if (!state_) {
    if (!first_fix_) {
      first_fix_ = {t_s, position};
      last_t_ = t_s;
      return;
    }
    if (t_s == first_fix_->first) return;  // duplicate bootstrap fix
    state_ = kf_init(first_fix_->second, first_fix_->first, position, t_s);
    last_t_ = t_s;
    return;
  }
  const double dt = t_s - last_t_;
  if (dt > 0.0) *state_ = kf_predict(*state_, dt, accel_sigma_);
  *state_ = kf_update(*state_, position, measurement_sigma_m_);
  last_t_ = t_s;
}

PredictedTrajectory KalmanCvTracker::predict(int horizon_steps, double dt_s) const {
  if (!state_) throw Error("tracker not initialized (needs two fixes)");
  return predict_trajectory(*state_, horizon_steps, dt_s, agent_id_, last_t_, accel_sigma_);
}

const KfState& KalmanCvTracker::state() const {
  if (!state_) throw Error("tracker not initialized");
  return *state_;
}

std::string metrics_csv(const std::vector<std::pair<std::string, PredictionMetrics>>& rows) {
  std::string out = "predictor,ade_m,fde_m,n_samples\n";
  char line[128];
  for (const auto& [name, m] : rows) {
    std::snprintf(line, sizeof(line), "%s,%.6g,%.6g,%d\n", name.c_str(), m.ade_m, m.fde_m,
                  m.n_samples);
    out += line;
  }
  return out;
}

}  // namespace dtwarn::predict
