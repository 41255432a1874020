#pragma once

#include <string>
#include <variant>
#include <vector>

#include "scaledrift/errors.hpp"
#include "scaledrift/scene_model.hpp"

namespace scaledrift {

/// Representative point of the detected surface, on the horizontal plane
/// through the camera.
struct SurfaceEstimate {
  Vec3 p_s_cam = Vec3::Zero();
  double depth = 0.0;    ///< |p_s_cam|, SLAM units
  double sigma_d = 0.0;  ///< weighted std of horizontal point distances
  int n_points = 0;
};

struct VerticalExtremities {
  Vec2 top = Vec2::Zero();
  Vec2 bottom = Vec2::Zero();
};

/// One measurement of the scale correction.
struct ScaleObservation {
  double kappa_hat = 1.0;
  double sigma_m = 0.0;
  std::int64_t frame_index = 0;
  std::string class_label;
  double height_hat = 0.0;
  // Geometry the histogram back end needs to re-evaluate the noise for
  // other candidate heights.
  double depth = 0.0;
  double sigma_d = 0.0;
};

enum class RejectReason { TooFewPoints, DegenerateGeometry, InvalidObservation, MissingPrior };

const char* to_string(RejectReason reason);

struct NoObservation {
  RejectReason reason;
  std::string detail;
};

using ObservationResult = std::variant<ScaleObservation, NoObservation>;

/// Camera-frame coordinates of the points in front of the camera whose
/// projection falls inside `rect` (bounds inclusive).
std::vector<Vec3> points_in_detection(std::span<const MapPoint> points, const Pose& pose,
                                      const CameraIntrinsics& intrinsics, const Rect& rect);

/// Unnormalized gamma density with shape `alpha` and scale `beta`.
double gamma_weight(double x, double alpha, double beta);

/// Gamma-weighted average of the points flattened onto the horizontal plane
/// through the camera, ranked by distance. Throws TooFewPoints below
/// `min_points` and DegenerateGeometry when every point sits on the vertical
/// through the camera.
SurfaceEstimate surface_point(std::span<const Vec3> points_cam, const Vec3& up_cam, double gamma_alpha,
                              double gamma_beta, int min_points = 1);

/// Intersections of the image of the vertical through `p_s_cam` with the
/// rectangle boundary.
VerticalExtremities vertical_extremities(const Vec3& p_s_cam, const Rect& rect, const CameraIntrinsics& intrinsics,
                                         const Vec3& up_cam);

struct HeightEstimate {
  double height_hat = 0.0;
  Vec3 p_top = Vec3::Zero();
  Vec3 p_bottom = Vec3::Zero();
};

/// Back-projects both extremities and meets them with the vertical line
/// through `p_s_cam`.
HeightEstimate object_height_points(const VerticalExtremities& ext, const Vec3& p_s_cam,
                                    const CameraIntrinsics& intrinsics, const Vec3& up_cam);

double object_height(const VerticalExtremities& ext, const Vec3& p_s_cam, const CameraIntrinsics& intrinsics,
                     const Vec3& up_cam);

/// kappa_hat = mean height / height_hat with propagated std
/// kappa_hat * sigma_d / depth, floored at `sigma_m_floor`.
ScaleObservation scale_observation(double height_hat, double depth, double sigma_d, const HeightPrior& prior,
                                   double sigma_m_floor = 1e-3, double min_height = 1e-9);

/// Observation noise for an explicit candidate height.
double observation_sigma(double height, double height_hat, double depth, double sigma_d, double sigma_m_floor);

/// Full chain from one detection to a scale observation.
ObservationResult observe_detection(const Detection& detection, const LocalMapView& view, const Pose& pose,
                                    const CameraIntrinsics& intrinsics, const PriorTable& priors,
                                    const WorldConfig& config);

}  // namespace scaledrift
