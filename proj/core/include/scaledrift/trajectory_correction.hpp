#pragma once

#include <span>
#include <vector>

#include "scaledrift/errors.hpp"
#include "scaledrift/scene_model.hpp"

namespace scaledrift {

/// Rotation and translation of a similarity whose scale has been folded
/// into the translation.
struct Similarity {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

struct ScaledTrajectory {
  std::vector<Pose> poses;
  std::vector<double> per_frame_kappa;
};

Similarity compose_similarity(const Pose& relative, double kappa);

/// Rebuilds the trajectory from its inter-frame motions with each motion's
/// translation multiplied by that frame's kappa. The first pose is kept as
/// the anchor; kappas[0] is carried for reporting only.
ScaledTrajectory correct_trajectory(std::span<const Pose> poses, std::span<const double> kappas);

}  // namespace scaledrift
