#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace scaledrift {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics. Pixel coordinates follow the usual (u right, v down)
/// convention.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  Vec2 project(const Vec3& p_cam) const {
    return {fx * p_cam.x() / p_cam.z() + cx, fy * p_cam.y() / p_cam.z() + cy};
  }
  /// Ray through pixel `px` with unit z component.
  Vec3 back_project(const Vec2& px) const {
    return {(px.x() - cx) / fx, (px.y() - cy) / fy, 1.0};
  }
};

/// Camera pose as a camera-to-world rigid transform (the KITTI pose file
/// convention): p_world = rotation * p_cam + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  std::int64_t frame_index = 0;

  static Pose identity(std::int64_t frame = 0) { return Pose{Mat3::Identity(), Vec3::Zero(), frame}; }

  Pose inverse() const {
    Mat3 rt = rotation.transpose();
    return Pose{rt, -rt * translation, frame_index};
  }
  /// this * other, keeping this pose's frame index.
  Pose compose(const Pose& other) const {
    return Pose{rotation * other.rotation, rotation * other.translation + translation, frame_index};
  }
  Vec3 transform(const Vec3& p) const { return rotation * p + translation; }
  /// World point expressed in this camera's frame.
  Vec3 world_to_camera(const Vec3& p_world) const {
    return rotation.transpose() * (p_world - translation);
  }
};

inline Pose operator*(const Pose& a, const Pose& b) { return a.compose(b); }

/// True if `r` is orthonormal with determinant +1 within `tol`.
bool is_rotation(const Mat3& r, double tol = 1e-9);

struct MapPoint {
  std::int64_t id = 0;
  Vec3 position_world = Vec3::Zero();
};

struct Rect {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  bool contains(const Vec2& p) const {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max;
  }
};

struct Detection {
  std::int64_t frame_index = 0;
  std::string class_label;
  double confidence = 0.0;
  Rect rect;
};

struct GaussianHeight {
  double mean = 1.5;
  double stddev = 0.1;
};

/// Piecewise-constant density over height. `edges` has one more entry than
/// `weights`.
struct HistogramHeight {
  std::vector<double> edges;
  std::vector<double> weights;
};

struct HeightPrior {
  std::string class_label;
  std::variant<GaussianHeight, HistogramHeight> distribution;

  double mean() const;
  double stddev() const;
};

using PriorTable = std::map<std::string, HeightPrior, std::less<>>;

/// Map points associated with one frame. Positions are stored as seen at
/// that frame: a drifting monocular map places the same landmark
/// differently over time.
struct LocalMapView {
  std::int64_t frame_index = 0;
  std::vector<MapPoint> points;
};

struct WorldConfig {
  Vec3 up_world{0.0, -1.0, 0.0};
  int min_points_per_detection = 5;
  double gamma_alpha = 1.5;
  double gamma_beta = 0.2;
  double confidence_threshold = 0.45;
  /// Lower bound on the observation std so coincident points cannot lock
  /// the filter.
  double sigma_m_floor = 1e-3;
  /// Heights at or below this (SLAM units) are rejected as vanishing.
  double min_height = 1e-9;
};

struct ValidationIssue {
  std::string location;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }
  std::string to_string() const;
};

bool is_valid(const CameraIntrinsics& k);
bool is_valid(const Rect& r);

/// Checks every pose, point and detection against the type invariants and
/// the camera. Never throws; each violation becomes one report entry.
ValidationReport validate_dataset(std::span<const Pose> poses,
                                  std::span<const LocalMapView> views,
                                  std::span<const Detection> detections,
                                  const CameraIntrinsics& intrinsics);

ValidationReport validate_priors(const PriorTable& priors);
ValidationReport validate_config(const WorldConfig& config);

}  // namespace scaledrift
