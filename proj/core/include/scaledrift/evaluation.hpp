#pragma once

#include <map>
#include <span>
#include <vector>

#include "scaledrift/errors.hpp"
#include "scaledrift/scene_model.hpp"

namespace scaledrift {

/// Relative translational error per subsequence length.
struct ErrorReport {
  std::map<double, double> per_length;  ///< length (m) -> mean error (fraction)
  std::map<double, int> counts;         ///< length (m) -> subsequences used
  double overall = 0.0;                 ///< length-weighted mean over all subsequences
  int n_subsequences = 0;
};

inline std::vector<double> kitti_lengths() { return {100, 200, 300, 400, 500, 600, 700, 800}; }

/// Prefix sums of ground-truth step lengths; l[0] = 0.
std::vector<double> cumulative_lengths(std::span<const Pose> gt_poses);

/// First frame after `first` whose cumulative length reaches `first + length`,
/// or -1.
long last_frame_for_length(std::span<const double> cumulative, std::size_t first, double length);

struct EvaluationOptions {
  std::vector<double> lengths = kitti_lengths();
  std::size_t stride = 1;  ///< spacing of subsequence start frames
};

/// For every start frame and length, compares the ground-truth and estimated
/// relative motions over the subsequence: error = |t(gt_rel^-1 est_rel)| / d
/// with d the ground-truth path length of the subsequence. Throws
/// LengthMismatch on unequal inputs and EmptyOverlap when no subsequence
/// fits.
ErrorReport relative_translation_error(std::span<const Pose> gt, std::span<const Pose> est,
                                       const EvaluationOptions& options = {});

}  // namespace scaledrift
