#include "scaledrift/trajectory_correction.hpp"

#include "scaledrift/errors.hpp"

namespace scaledrift {

Similarity compose_similarity(const Pose& relative, double kappa) {
  return {relative.rotation, kappa * relative.translation};
}

ScaledTrajectory correct_trajectory(std::span<const Pose> poses, std::span<const double> kappas) {
  if (poses.size() != kappas.size()) {
    throw LengthMismatch("correct_trajectory: " + std::to_string(poses.size()) + " poses vs " +
                         std::to_string(kappas.size()) + " kappas");
  }
  for (double k : kappas)
    if (!(k > 0.0)) throw ConfigError("correct_trajectory: kappa must be positive");

  ScaledTrajectory out;
  out.per_frame_kappa.assign(kappas.begin(), kappas.end());
  out.poses.reserve(poses.size());
  if (poses.empty()) return out;

  out.poses.push_back(poses.front());
  for (std::size_t k = 1; k < poses.size(); ++k) {
    // Camera-to-world poses: the motion from k-1 to k is P_{k-1}^-1 P_k, and
    // the corrected pose is the corrected predecessor followed by the scaled
    // motion.
    const Pose motion = poses[k - 1].inverse() * poses[k];
    const Similarity s = compose_similarity(motion, kappas[k]);
    const Pose& prev = out.poses.back();
    Pose next;
    // prev.rotation * s.rotation equals the input rotation up to rounding;
    // take the input one so the scale never leaks into orientation.
    next.rotation = poses[k].rotation;
    next.translation = prev.rotation * s.translation + prev.translation;
    next.frame_index = poses[k].frame_index;
    out.poses.push_back(next);
  }
  return out;
}

}  // namespace scaledrift
