#include "scaledrift/observation_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scaledrift/errors.hpp"

namespace scaledrift {

namespace {

constexpr double kPixelTol = 1e-9;

Vec3 horizontal(const Vec3& p, const Vec3& up) { return p - p.dot(up) * up; }

}  // namespace

const char* to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::TooFewPoints: return "too few points";
    case RejectReason::DegenerateGeometry: return "degenerate geometry";
    case RejectReason::InvalidObservation: return "invalid observation";
    case RejectReason::MissingPrior: return "missing prior";
  }
  return "unknown";
}

std::vector<Vec3> points_in_detection(std::span<const MapPoint> points, const Pose& pose,
                                      const CameraIntrinsics& intrinsics, const Rect& rect) {
  std::vector<Vec3> inside;
  for (const auto& pt : points) {
    const Vec3 p_cam = pose.world_to_camera(pt.position_world);
    if (!(p_cam.z() > 0.0)) continue;
    if (rect.contains(intrinsics.project(p_cam))) inside.push_back(p_cam);
  }
  return inside;
}

double gamma_weight(double x, double alpha, double beta) {
  if (x <= 0.0) return alpha < 1.0 ? HUGE_VAL : (alpha == 1.0 ? 1.0 / beta : 0.0);
  // log-space keeps tiny weights for large ranks from flushing early.
  const double log_g = (alpha - 1.0) * std::log(x) - x / beta - std::lgamma(alpha) - alpha * std::log(beta);
  return std::exp(log_g);
}

SurfaceEstimate surface_point(std::span<const Vec3> points_cam, const Vec3& up_cam, double gamma_alpha,
                              double gamma_beta, int min_points) {
  const int m = static_cast<int>(points_cam.size());
  if (m < std::max(min_points, 1)) {
    throw TooFewPoints("surface_point: " + std::to_string(m) + " points, need " +
                       std::to_string(std::max(min_points, 1)));
  }
  const Vec3 up = up_cam.normalized();

  struct Ranked {
    Vec3 flat;
    double dist;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(points_cam.size());
  for (const auto& p : points_cam) {
    Vec3 flat = horizontal(p, up);
    ranked.push_back({flat, flat.norm()});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.dist < b.dist; });
  if (!(ranked.back().dist > 0.0)) throw DegenerateGeometry("surface_point: all points on the camera vertical");

  Vec3 weighted = Vec3::Zero();
  double w_sum = 0.0;
  double d_sum = 0.0;
  std::vector<double> weights(ranked.size());
  for (int i = 0; i < m; ++i) {
    const double w = gamma_weight(static_cast<double>(i + 1) / m, gamma_alpha, gamma_beta);
    weights[i] = w;
    weighted += w * ranked[i].flat;
    d_sum += w * ranked[i].dist;
    w_sum += w;
  }
  if (!(w_sum > 0.0)) throw DegenerateGeometry("surface_point: gamma weights vanished");

  const double d_mean = d_sum / w_sum;
  double var = 0.0;
  for (int i = 0; i < m; ++i) var += weights[i] * (ranked[i].dist - d_mean) * (ranked[i].dist - d_mean);

  SurfaceEstimate est;
  est.p_s_cam = weighted / w_sum;
  est.depth = est.p_s_cam.norm();
  est.sigma_d = std::sqrt(std::max(var / w_sum, 0.0));
  est.n_points = m;
  if (!(est.depth > 0.0)) throw DegenerateGeometry("surface_point: surface point at camera origin");
  return est;
}

VerticalExtremities vertical_extremities(const Vec3& p_s_cam, const Rect& rect, const CameraIntrinsics& intrinsics,
                                         const Vec3& up_cam) {
  if (!(p_s_cam.z() > 0.0)) throw DegenerateGeometry("vertical_extremities: surface point behind camera");
  const Vec3 up = up_cam.normalized();

  // The vertical plane through the camera centre and p_s images to the line
  // l . (u, v, 1) = 0 with l = K^-T n.
  const Vec3 n = p_s_cam.cross(up);
  if (n.norm() <= 1e-12 * p_s_cam.norm())
    throw DegenerateGeometry("vertical_extremities: vertical projects to a point");
  Vec3 l{n.x() / intrinsics.fx, n.y() / intrinsics.fy,
         n.z() - n.x() * intrinsics.cx / intrinsics.fx - n.y() * intrinsics.cy / intrinsics.fy};
  const double ab = std::hypot(l.x(), l.y());
  if (!(ab > 0.0)) throw DegenerateGeometry("vertical_extremities: image line at infinity");
  l /= ab;

  std::vector<Vec2> hits;
  auto add_hit = [&hits](const Vec2& p) {
    for (const auto& h : hits)
      if ((h - p).norm() <= kPixelTol * std::max(1.0, p.norm())) return;
    hits.push_back(p);
  };

  const double a = l.x(), b = l.y(), c = l.z();
  const bool vertical_line = std::abs(b) <= kPixelTol;
  const bool horizontal_line = std::abs(a) <= kPixelTol;

  if (vertical_line) {
    const double u = -c / a;
    const double tol = kPixelTol * std::max(1.0, std::abs(u));
    if (std::abs(u - rect.x_min) <= tol || std::abs(u - rect.x_max) <= tol) {
      // Line runs along a vertical edge: that edge's endpoints.
      add_hit({u, rect.y_min});
      add_hit({u, rect.y_max});
    } else if (u > rect.x_min && u < rect.x_max) {
      add_hit({u, rect.y_min});
      add_hit({u, rect.y_max});
    }
  } else if (horizontal_line) {
    const double v = -c / b;
    const double tol = kPixelTol * std::max(1.0, std::abs(v));
    if (v >= rect.y_min - tol && v <= rect.y_max + tol) {
      add_hit({rect.x_min, v});
      add_hit({rect.x_max, v});
    }
  } else {
    for (double u : {rect.x_min, rect.x_max}) {
      const double v = -(a * u + c) / b;
      const double tol = kPixelTol * std::max(1.0, std::abs(v));
      if (v >= rect.y_min - tol && v <= rect.y_max + tol) add_hit({u, std::clamp(v, rect.y_min, rect.y_max)});
    }
    for (double v : {rect.y_min, rect.y_max}) {
      const double u = -(b * v + c) / a;
      const double tol = kPixelTol * std::max(1.0, std::abs(u));
      if (u >= rect.x_min - tol && u <= rect.x_max + tol) add_hit({std::clamp(u, rect.x_min, rect.x_max), v});
    }
  }

  if (hits.size() != 2)
    throw DegenerateGeometry("vertical_extremities: image vertical meets the rect boundary in " +
                             std::to_string(hits.size()) + " points");

  auto elevation = [&](const Vec2& px) { return intrinsics.back_project(px).normalized().dot(up); };
  VerticalExtremities ext;
  if (elevation(hits[0]) >= elevation(hits[1])) {
    ext.top = hits[0];
    ext.bottom = hits[1];
  } else {
    ext.top = hits[1];
    ext.bottom = hits[0];
  }
  return ext;
}

namespace {

// Parameter t of the point on {p_s + t up} closest to the ray {s r, s > 0}.
double meet_vertical(const Vec3& ray, const Vec3& p_s, const Vec3& up) {
  const double rr = ray.dot(ray);
  const double ru = ray.dot(up);
  const double denom = rr - ru * ru;
  if (denom <= 1e-12 * rr) throw DegenerateGeometry("object_height: ray parallel to the vertical line");
  const double up_ps = up.dot(p_s);
  const double s = (ray.dot(p_s) - ru * up_ps) / denom;
  if (!(s > 0.0)) throw DegenerateGeometry("object_height: vertical line behind the camera");
  return s * ru - up_ps;
}

}  // namespace

HeightEstimate object_height_points(const VerticalExtremities& ext, const Vec3& p_s_cam,
                                    const CameraIntrinsics& intrinsics, const Vec3& up_cam) {
  const Vec3 up = up_cam.normalized();
  const double t_top = meet_vertical(intrinsics.back_project(ext.top), p_s_cam, up);
  const double t_bottom = meet_vertical(intrinsics.back_project(ext.bottom), p_s_cam, up);
  HeightEstimate h;
  h.p_top = p_s_cam + t_top * up;
  h.p_bottom = p_s_cam + t_bottom * up;
  h.height_hat = (h.p_top - h.p_bottom).norm();
  return h;
}

double object_height(const VerticalExtremities& ext, const Vec3& p_s_cam, const CameraIntrinsics& intrinsics,
                     const Vec3& up_cam) {
  return object_height_points(ext, p_s_cam, intrinsics, up_cam).height_hat;
}

double observation_sigma(double height, double height_hat, double depth, double sigma_d, double sigma_m_floor) {
  return std::max(sigma_m_floor, (height / height_hat) * (sigma_d / depth));
}

ScaleObservation scale_observation(double height_hat, double depth, double sigma_d, const HeightPrior& prior,
                                   double sigma_m_floor, double min_height) {
  if (!(height_hat > min_height) || !std::isfinite(height_hat))
    throw InvalidObservation("scale_observation: vanishing height estimate");
  if (!(depth > 0.0) || !(sigma_d >= 0.0)) throw InvalidObservation("scale_observation: invalid depth statistics");
  const double h_mean = prior.mean();
  ScaleObservation obs;
  obs.kappa_hat = h_mean / height_hat;
  obs.sigma_m = observation_sigma(h_mean, height_hat, depth, sigma_d, sigma_m_floor);
  obs.class_label = prior.class_label;
  obs.height_hat = height_hat;
  obs.depth = depth;
  obs.sigma_d = sigma_d;
  return obs;
}

ObservationResult observe_detection(const Detection& detection, const LocalMapView& view, const Pose& pose,
                                    const CameraIntrinsics& intrinsics, const PriorTable& priors,
                                    const WorldConfig& config) {
  auto prior_it = priors.find(detection.class_label);
  if (prior_it == priors.end())
    return NoObservation{RejectReason::MissingPrior, "no height prior for class '" + detection.class_label + "'"};

  const auto pts = points_in_detection(view.points, pose, intrinsics, detection.rect);
  if (static_cast<int>(pts.size()) < config.min_points_per_detection) {
    return NoObservation{RejectReason::TooFewPoints, std::to_string(pts.size()) + " points in detection"};
  }

  const Vec3 up_cam = pose.rotation.transpose() * config.up_world;
  try {
    const SurfaceEstimate surf =
        surface_point(pts, up_cam, config.gamma_alpha, config.gamma_beta, config.min_points_per_detection);
    const VerticalExtremities ext = vertical_extremities(surf.p_s_cam, detection.rect, intrinsics, up_cam);
    const double h = object_height(ext, surf.p_s_cam, intrinsics, up_cam);
    ScaleObservation obs =
        scale_observation(h, surf.depth, surf.sigma_d, prior_it->second, config.sigma_m_floor, config.min_height);
    obs.frame_index = detection.frame_index;
    obs.class_label = detection.class_label;
    return obs;
  } catch (const TooFewPoints& e) {
    return NoObservation{RejectReason::TooFewPoints, e.what()};
  } catch (const DegenerateGeometry& e) {
    return NoObservation{RejectReason::DegenerateGeometry, e.what()};
  } catch (const InvalidObservation& e) {
    return NoObservation{RejectReason::InvalidObservation, e.what()};
  }
}

}  // namespace scaledrift
