#include "scaledrift/scene_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace scaledrift {

namespace {

bool finite(const Vec3& v) { return v.allFinite(); }

std::string frame_location(std::int64_t frame) { return "frame " + std::to_string(frame); }

}  // namespace

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

double HeightPrior::mean() const {
  if (const auto* g = std::get_if<GaussianHeight>(&distribution)) return g->mean;
  const auto& h = std::get<HistogramHeight>(distribution);
  double m = 0.0;
  for (std::size_t i = 0; i < h.weights.size(); ++i) m += h.weights[i] * 0.5 * (h.edges[i] + h.edges[i + 1]);
  return m;
}

double HeightPrior::stddev() const {
  if (const auto* g = std::get_if<GaussianHeight>(&distribution)) return g->stddev;
  // Mixture of uniform bins: within-bin variance plus spread of bin centers.
  const auto& h = std::get<HistogramHeight>(distribution);
  const double m = mean();
  double var = 0.0;
  for (std::size_t i = 0; i < h.weights.size(); ++i) {
    const double w = h.edges[i + 1] - h.edges[i];
    const double c = 0.5 * (h.edges[i] + h.edges[i + 1]);
    var += h.weights[i] * ((c - m) * (c - m) + w * w / 12.0);
  }
  return std::sqrt(var);
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& issue : issues) os << issue.message << " at " << issue.location << '\n';
  return os.str();
}

bool is_valid(const CameraIntrinsics& k) {
  return k.fx > 0.0 && k.fy > 0.0 && k.width > 0 && k.height > 0 && k.cx >= 0.0 && k.cx < k.width &&
         k.cy >= 0.0 && k.cy < k.height;
}

bool is_valid(const Rect& r) {
  return std::isfinite(r.x_min) && std::isfinite(r.y_min) && std::isfinite(r.x_max) &&
         std::isfinite(r.y_max) && r.x_min < r.x_max && r.y_min < r.y_max;
}

ValidationReport validate_dataset(std::span<const Pose> poses,
                                  std::span<const LocalMapView> views,
                                  std::span<const Detection> detections,
                                  const CameraIntrinsics& intrinsics) {
  ValidationReport report;
  auto add = [&report](std::string location, std::string message) {
    report.issues.push_back({std::move(location), std::move(message)});
  };

  if (!poses.empty() && !is_valid(intrinsics)) add("camera", "invalid intrinsics");

  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Pose& p = poses[i];
    if (!is_rotation(p.rotation)) add(frame_location(p.frame_index), "rotation not orthonormal");
    if (!finite(p.translation)) add(frame_location(p.frame_index), "non-finite translation");
    if (i > 0 && p.frame_index <= poses[i - 1].frame_index)
      add(frame_location(p.frame_index), "frame indices not strictly increasing");
  }

  auto has_frame = [&poses](std::int64_t frame) {
    auto it = std::lower_bound(poses.begin(), poses.end(), frame,
                               [](const Pose& p, std::int64_t f) { return p.frame_index < f; });
    return it != poses.end() && it->frame_index == frame;
  };

  for (const auto& view : views) {
    if (!has_frame(view.frame_index)) add(frame_location(view.frame_index), "map view references unknown frame");
    for (const auto& pt : view.points) {
      if (!finite(pt.position_world))
        add(frame_location(view.frame_index) + ", point " + std::to_string(pt.id), "non-finite map point");
    }
  }

  for (std::size_t i = 0; i < detections.size(); ++i) {
    const Detection& d = detections[i];
    const std::string where = frame_location(d.frame_index) + ", detection " + std::to_string(i);
    if (!has_frame(d.frame_index)) add(where, "detection references unknown frame");
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) add(where, "confidence outside [0,1]");
    if (!is_valid(d.rect)) {
      add(where, "degenerate rect");
      continue;
    }
    const bool intersects = d.rect.x_max >= 0.0 && d.rect.y_max >= 0.0 && d.rect.x_min <= intrinsics.width &&
                            d.rect.y_min <= intrinsics.height;
    if (!intersects) add(where, "rect outside image");
  }
  return report;
}

ValidationReport validate_priors(const PriorTable& priors) {
  ValidationReport report;
  for (const auto& [label, prior] : priors) {
    const std::string where = "prior " + label;
    if (const auto* g = std::get_if<GaussianHeight>(&prior.distribution)) {
      if (!(g->mean > 0.0)) report.issues.push_back({where, "non-positive mean height"});
      if (!(g->stddev > 0.0)) report.issues.push_back({where, "non-positive height std"});
      continue;
    }
    const auto& h = std::get<HistogramHeight>(prior.distribution);
    if (h.weights.empty() || h.edges.size() != h.weights.size() + 1) {
      report.issues.push_back({where, "histogram edges/weights size mismatch"});
      continue;
    }
    if (!(h.edges.front() >= 0.0)) report.issues.push_back({where, "histogram bins must cover H > 0"});
    for (std::size_t i = 0; i + 1 < h.edges.size(); ++i) {
      if (!(h.edges[i] < h.edges[i + 1])) report.issues.push_back({where, "histogram edges not increasing"});
    }
    double sum = 0.0;
    for (double w : h.weights) {
      if (!(w >= 0.0)) report.issues.push_back({where, "negative histogram weight"});
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) report.issues.push_back({where, "histogram weights do not sum to 1"});
  }
  return report;
}

ValidationReport validate_config(const WorldConfig& config) {
  ValidationReport report;
  if (!config.up_world.allFinite() || std::abs(config.up_world.norm() - 1.0) > 1e-9)
    report.issues.push_back({"world", "up vector is not unit length"});
  if (config.min_points_per_detection < 1)
    report.issues.push_back({"world", "min_points_per_detection must be >= 1"});
  if (!(config.gamma_alpha > 0.0) || !(config.gamma_beta > 0.0))
    report.issues.push_back({"world", "gamma parameters must be positive"});
  if (!(config.confidence_threshold >= 0.0 && config.confidence_threshold <= 1.0))
    report.issues.push_back({"world", "confidence threshold outside [0,1]"});
  if (!(config.sigma_m_floor > 0.0)) report.issues.push_back({"world", "sigma_m floor must be positive"});
  return report;
}

}  // namespace scaledrift
