#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scaledrift/errors.hpp"
#include "scaledrift/io_formats.hpp"
#include "scaledrift/scene_model.hpp"

namespace scaledrift {

// World frame follows the KITTI camera convention: x right, y down, z
// forward. The camera moves in the plane y = 0 and the ground lies at
// y = camera_height.

/// Vertical planar object (a car seen from behind, a sign, ...).
struct SceneObject {
  std::string class_label = "car";
  double true_height = 1.5;
  double width = 1.8;
  Vec3 footprint_center = Vec3::Zero();  ///< on the ground
  double facing_yaw = 0.0;  ///< heading (rad) of the outward surface normal
  int surface_points = 40;
  int background_points = 0;
  double background_offset = 10.0;  ///< meters behind the surface

  Vec3 normal() const;
  Vec3 lateral_axis() const;
};

struct RouteSegment {
  int frames = 1;
  double yaw_rate_deg = 0.0;  ///< per frame
};

struct SceneConfig {
  int n_frames = 200;
  double speed = 1.0;  ///< meters per frame
  double camera_height = 1.65;
  CameraIntrinsics intrinsics{718.856, 718.856, 607.1928, 185.2157, 1241, 376};

  /// Explicit route; when empty a random one alternates straight and
  /// turning segments.
  std::vector<RouteSegment> route;
  int straight_min_frames = 40;
  int straight_max_frames = 200;
  int turn_frames = 15;
  double turn_min_deg = 45.0;
  double turn_max_deg = 100.0;

  /// Explicit objects; when empty objects are scattered along the route.
  std::vector<SceneObject> objects;
  double object_spacing = 12.0;  ///< mean meters of route between objects
  double lateral_min = 2.0;
  double lateral_max = 5.0;
  double height_mean = 1.5;
  double height_std = 0.1;
  double object_width = 1.8;
  int surface_points = 40;
  int background_points = 10;
  double background_offset_min = 8.0;
  double background_offset_max = 30.0;
  std::string class_label = "car";

  /// Isotropic reconstruction noise on map points (meters).
  double point_noise = 0.0;
  double max_range = 40.0;
};

struct SyntheticScene {
  SceneConfig config;
  std::vector<Pose> trajectory;  ///< ground truth, camera-to-world
  std::vector<SceneObject> objects;
  std::vector<MapPoint> points;  ///< world positions, reconstruction noise included
  /// Indices into `points` of each object's surface points.
  std::vector<std::vector<std::size_t>> object_surface;
  std::vector<int> point_object;  ///< owning object per point
  std::vector<bool> point_on_surface;
  CameraIntrinsics intrinsics;
};

/// Deterministic in (config, seed). Throws ConfigError on non-positive
/// dimensions.
SyntheticScene generate_scene(const SceneConfig& config, std::uint64_t seed);

enum class DriftKind { Constant, Linear, RandomWalk, RotationCoupled };

/// True SLAM scale s*_k: SLAM distances are s*_k times metric ones.
struct DriftProfile {
  DriftKind kind = DriftKind::Constant;
  double start = 1.0;     ///< s* at frame 0 (constant value for Constant)
  double end = 1.0;       ///< Linear: s* at the last frame
  double sigma = 0.0;     ///< RandomWalk: log-scale std per frame
  double gain = 0.0;      ///< RotationCoupled: log-scale std per sqrt(degree) turned
  double bias = 0.0;      ///< RotationCoupled: mean log-scale change per degree
  std::uint64_t seed = 0;
};

std::vector<double> drift_series(const DriftProfile& profile, std::span<const Pose> gt_trajectory);

struct SlamOutput {
  std::vector<Pose> trajectory;
  std::vector<LocalMapView> views;
  std::vector<double> true_kappa;  ///< 1 / s*_k
};

/// Ids of ground-truth points the camera sees at `pose`: in front, in the
/// image, within range, and (for object surfaces) facing the camera.
std::vector<std::size_t> visible_points(const SyntheticScene& scene, const Pose& pose);

/// Scales inter-frame translations by s*_k and expresses each frame's
/// visible points in the drifting SLAM frame at that frame's scale. Views
/// are produced for `view_frames` only (all frames when empty).
SlamOutput apply_drift(const SyntheticScene& scene, const DriftProfile& profile,
                       std::span<const std::int64_t> view_frames = {});

struct RenderOptions {
  int cadence = 5;
  double pixel_noise = 0.0;
  double min_pixels = 10.0;  ///< minimum rect height
  double max_range = 30.0;
  double max_view_angle_deg = 30.0;  ///< between surface normal and view direction
  double confidence_min = 0.3;
  double confidence_max = 1.0;
};

/// Tight projected boxes of the objects' surfaces at `frame`. Empty off
/// cadence, and for objects behind the camera, clipped by the image, too
/// small, too far, or seen too obliquely.
std::vector<Detection> render_detections(const SyntheticScene& scene, const Pose& pose, std::int64_t frame,
                                         const RenderOptions& options, std::uint64_t seed);

struct SyntheticDataset {
  Dataset dataset;
  std::vector<Pose> gt_trajectory;
  std::vector<double> true_kappa;
};

/// Scene + drift + detections assembled into a dataset, with the ground
/// truth needed to score it. Priors default to the scene's height
/// distribution.
SyntheticDataset make_dataset(const SyntheticScene& scene, const DriftProfile& drift, const RenderOptions& render,
                              std::uint64_t seed);

}  // namespace scaledrift
