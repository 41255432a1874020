#include "scaledrift/evaluation.hpp"

#include <algorithm>

#include "scaledrift/errors.hpp"

namespace scaledrift {

std::vector<double> cumulative_lengths(std::span<const Pose> gt_poses) {
  std::vector<double> dist;
  dist.reserve(gt_poses.size());
  if (gt_poses.empty()) return dist;
  dist.push_back(0.0);
  for (std::size_t k = 1; k < gt_poses.size(); ++k)
    dist.push_back(dist.back() + (gt_poses[k].translation - gt_poses[k - 1].translation).norm());
  return dist;
}

long last_frame_for_length(std::span<const double> cumulative, std::size_t first, double length) {
  for (std::size_t i = first; i < cumulative.size(); ++i)
    if (cumulative[i] >= cumulative[first] + length) return static_cast<long>(i);
  return -1;
}

ErrorReport relative_translation_error(std::span<const Pose> gt, std::span<const Pose> est,
                                       const EvaluationOptions& options) {
  if (gt.size() != est.size()) {
    throw LengthMismatch("relative_translation_error: " + std::to_string(gt.size()) + " ground-truth poses vs " +
                         std::to_string(est.size()) + " estimated");
  }
  const auto dist = cumulative_lengths(gt);
  const std::size_t stride = std::max<std::size_t>(options.stride, 1);

  std::map<double, double> sums;
  double weighted = 0.0;
  double weight = 0.0;
  ErrorReport report;

  for (std::size_t first = 0; first < gt.size(); first += stride) {
    for (double length : options.lengths) {
      const long last = last_frame_for_length(dist, first, length);
      if (last < 0) continue;
      const auto l = static_cast<std::size_t>(last);
      const double travelled = dist[l] - dist[first];
      if (!(travelled > 0.0)) continue;

      const Pose gt_rel = gt[first].inverse() * gt[l];
      const Pose est_rel = est[first].inverse() * est[l];
      const Pose err = gt_rel.inverse() * est_rel;
      const double e = err.translation.norm() / travelled;

      sums[length] += e;
      report.counts[length] += 1;
      weighted += e * travelled;
      weight += travelled;
      ++report.n_subsequences;
    }
  }
  if (report.n_subsequences == 0)
    throw EmptyOverlap("relative_translation_error: trajectory shorter than every requested length");

  for (const auto& [length, sum] : sums) report.per_length[length] = sum / report.counts[length];
  report.overall = weighted / weight;
  return report;
}

}  // namespace scaledrift
