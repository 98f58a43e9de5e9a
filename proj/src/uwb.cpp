#include "dtwarn/uwb.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace dtwarn::uwb {

namespace {

using ordered_json = nlohmann::ordered_json;

double triangle_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * std::abs((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

// True unless every triple of points is near-degenerate.
bool spans_plane(const std::vector<Vec2>& pts) {
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      for (std::size_t k = j + 1; k < pts.size(); ++k)
        if (triangle_area(pts[i], pts[j], pts[k]) > kCollinearAreaM2) return true;
  return false;
}

}  // namespace

void AnchorSet::validate() const {
  if (anchors.size() < 3) throw ValidationError("anchors", "need at least 3 anchors");
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (anchors[i].id.empty()) throw ValidationError("anchors.id", "anchor id must be non-empty");
    for (std::size_t j = i + 1; j < anchors.size(); ++j) {
      if (anchors[i].id == anchors[j].id)
        throw ValidationError("anchors.id", "duplicate anchor id '" + anchors[i].id + "'");
      if ((anchors[i].pos - anchors[j].pos).norm() == 0.0)
        throw ValidationError("anchors", "anchors '" + anchors[i].id + "' and '" + anchors[j].id +
                                             "' are coincident");
    }
  }
  std::vector<Vec2> pts;
  pts.reserve(anchors.size());
  for (const auto& a : anchors) pts.push_back(a.pos);
  if (!spans_plane(pts)) throw ValidationError("anchors", "anchors are collinear");
}

const Anchor* AnchorSet::find(std::string_view id) const {
  for (const auto& a : anchors) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

AnchorSet load_anchors(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("anchor JSON: ") + e.what());
  }
  AnchorSet set;
  try {
    for (const auto& ja : j.at("anchors")) {
      set.anchors.push_back(
          {ja.at("id").get<std::string>(), Vec2(ja.at("x_m").get<double>(), ja.at("y_m").get<double>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("anchors", e.what());
  }
  set.validate();
  return set;
}

AnchorSet load_anchors_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open anchor file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_anchors(ss.str());
}

std::string save_anchors(const AnchorSet& set) {
  ordered_json j;
  j["anchors"] = ordered_json::array();
  for (const auto& a : set.anchors) {
    j["anchors"].push_back({{"id", a.id}, {"x_m", a.pos.x()}, {"y_m", a.pos.y()}});
  }
  return j.dump(2) + "\n";
}

void RangeNoiseModel::validate() const {
  if (!(sigma_m >= 0.0)) throw ValidationError("sigma_m", "must be >= 0");
  if (dropout_p < 0.0 || dropout_p > 1.0) throw ValidationError("dropout_p", "must be in [0,1]");
  if (nlos_p < 0.0 || nlos_p > 1.0) throw ValidationError("nlos_p", "must be in [0,1]");
  if (!(nlos_bias_m >= 0.0)) throw ValidationError("nlos_bias_m", "must be >= 0");
}

std::vector<RangeMeasurement> simulate_ranges(const Vec2& true_position, const AnchorSet& anchors,
                                              const RangeNoiseModel& noise, std::uint64_t rng_seed,
                                              double timestamp_s) {
  anchors.validate();
  noise.validate();
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  std::vector<RangeMeasurement> out;
  out.reserve(anchors.anchors.size());
  for (const auto& anchor : anchors.anchors) {
    // fixed draw order per anchor: noise, nlos, dropout
    const double n = noise.sigma_m > 0.0 ? noise.sigma_m * gauss(rng) : 0.0;
    const bool nlos = u01(rng) < noise.nlos_p;
    const bool dropped = u01(rng) < noise.dropout_p;

    RangeMeasurement m;
    m.anchor_id = anchor.id;
    m.timestamp_s = timestamp_s;
    m.distance_m = std::max(0.0, (true_position - anchor.pos).norm() + n + (nlos ? noise.nlos_bias_m : 0.0));
    m.valid = !dropped;
    out.push_back(std::move(m));
  }
  return out;
}

PositionEstimate multilaterate(const std::vector<RangeMeasurement>& ranges,
                               const AnchorSet& anchors) {
  struct Used {
    Vec2 anchor;
    double range;
  };
  std::vector<Used> used;
  std::vector<Vec2> unique_anchors;
  double latest_ts = 0.0;
  for (const auto& m : ranges) {
    if (!m.valid) continue;
    const Anchor* a = anchors.find(m.anchor_id);
    if (a == nullptr)
      throw ValidationError("anchor_id", "measurement references unknown anchor '" + m.anchor_id + "'");
    used.push_back({a->pos, m.distance_m});
    latest_ts = std::max(latest_ts, m.timestamp_s);
    if (std::none_of(unique_anchors.begin(), unique_anchors.end(),
                     [&](const Vec2& p) { return (p - a->pos).norm() == 0.0; }))
      unique_anchors.push_back(a->pos);
  }
  if (unique_anchors.size() < 3)
    throw InsufficientRangesError("need >= 3 valid ranges to distinct anchors, have " +
                                  std::to_string(unique_anchors.size()));
  if (!spans_plane(unique_anchors))
    throw DegenerateGeometryError("used anchors are collinear");

  // Linearized initialization: subtracting the first anchor's sphere equation
  // from the others gives a linear system in p.
  const std::size_t m = unique_anchors.size();
  Eigen::MatrixXd A(m - 1, 2);
  Eigen::VectorXd b(m - 1);
  // representative range per unique anchor: mean over its measurements
  std::vector<double> mean_range(m, 0.0);
  std::vector<int> count(m, 0);
  for (const auto& u : used) {
    for (std::size_t i = 0; i < m; ++i) {
      if ((u.anchor - unique_anchors[i]).norm() == 0.0) {
        mean_range[i] += u.range;
        ++count[i];
        break;
      }
    }
  }
  for (std::size_t i = 0; i < m; ++i) mean_range[i] /= count[i];

  const Vec2 a0 = unique_anchors[0];
  const double r0 = mean_range[0];
  for (std::size_t i = 1; i < m; ++i) {
    const Vec2 ai = unique_anchors[i];
    A.row(i - 1) = 2.0 * (ai - a0).transpose();
    b(i - 1) = r0 * r0 - mean_range[i] * mean_range[i] + ai.squaredNorm() - a0.squaredNorm();
  }
  Vec2 p = A.colPivHouseholderQr().solve(b);

  // Gauss-Newton refinement of sum_i (|p - a_i| - r_i)^2.
  constexpr int kMaxIter = 50;
  constexpr double kStepTol = 1e-9;
  double last_step = std::numeric_limits<double>::infinity();
  SolveStatus status = SolveStatus::kNotConverged;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    Eigen::MatrixXd J(used.size(), 2);
    Eigen::VectorXd f(used.size());
    for (std::size_t i = 0; i < used.size(); ++i) {
      const Vec2 d = p - used[i].anchor;
      const double dist = std::max(d.norm(), 1e-12);
      f(i) = dist - used[i].range;
      J.row(i) = (d / dist).transpose();
    }
    const Vec2 delta = (J.transpose() * J).ldlt().solve(-J.transpose() * f);
    p += delta;
    last_step = delta.norm();
    if (last_step < kStepTol) {
      status = SolveStatus::kConverged;
      break;
    }
  }
  if (status != SolveStatus::kConverged) {
    status = last_step <= 1e-6 ? SolveStatus::kMaxIterations : SolveStatus::kNotConverged;
  }

  double ss = 0.0;
  for (const auto& u : used) {
    const double r = (p - u.anchor).norm() - u.range;
    ss += r * r;
  }

  PositionEstimate est;
  est.position = p;
  est.residual_rms_m = std::sqrt(ss / static_cast<double>(used.size()));
  est.n_ranges_used = static_cast<int>(used.size());
  est.timestamp_s = latest_ts;
  est.status = status;
  return est;
}

double localization_error(const PositionEstimate& estimate, const Vec2& truth) {
  return (estimate.position - truth).norm();
}

}  // namespace dtwarn::uwb
