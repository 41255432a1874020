#include "scaledrift/pipeline.hpp"

#include <algorithm>

namespace scaledrift {

namespace {

ScaleState initial_state(const PipelineConfig& config) {
  if (config.backend == Backend::Kalman) return config.initial;
  HistogramScaleState h = HistogramScaleState::uniform(config.grid.kappa_min, config.grid.kappa_max, config.grid.bins);
  h.height_grid = config.grid.height;
  return h;
}

}  // namespace

std::vector<ObservationResult> observe_all(const Dataset& dataset) {
  std::vector<ObservationResult> results;
  const LocalMapView empty_view;
  for (const auto& det : dataset.detections) {
    if (det.confidence < dataset.world.confidence_threshold) continue;
    const auto* view = dataset.view_for(det.frame_index);
    const auto pose_it = std::lower_bound(dataset.poses.begin(), dataset.poses.end(), det.frame_index,
                                          [](const Pose& p, std::int64_t f) { return p.frame_index < f; });
    if (pose_it == dataset.poses.end() || pose_it->frame_index != det.frame_index) continue;
    results.push_back(observe_detection(det, view ? *view : empty_view, *pose_it, dataset.intrinsics, dataset.priors,
                                        dataset.world));
  }
  return results;
}

PipelineResult run_scale_correction(const Dataset& dataset, const PipelineConfig& config) {
  PipelineResult result;
  for (auto& r : observe_all(dataset)) {
    if (auto* obs = std::get_if<ScaleObservation>(&r)) {
      result.observations.push_back(std::move(*obs));
    } else {
      ++result.rejected[static_cast<std::size_t>(std::get<NoObservation>(r).reason)];
    }
  }

  std::stable_sort(result.observations.begin(), result.observations.end(),
                   [](const ScaleObservation& a, const ScaleObservation& b) { return a.frame_index < b.frame_index; });

  const auto& poses = dataset.poses;
  result.kappas.reserve(poses.size());

  if (config.strategy == Strategy::AverageScale) {
    double mean = config.initial.mean;
    if (!result.observations.empty()) {
      double sum = 0.0;
      for (const auto& o : result.observations) sum += o.kappa_hat;
      mean = sum / static_cast<double>(result.observations.size());
    }
    for (const auto& p : poses) result.kappas.push_back({p.frame_index, mean, 0.0});
  } else {
    DriftParams params = config.drift;
    params.rotation_coupled = config.strategy == Strategy::MotionModel;
    ScaleState state = initial_state(config);
    std::size_t next_obs = 0;
    for (std::size_t k = 0; k < poses.size(); ++k) {
      const std::size_t first = next_obs;
      while (next_obs < result.observations.size() && result.observations[next_obs].frame_index == poses[k].frame_index)
        ++next_obs;
      const std::span<const ScaleObservation> frame_obs(result.observations.data() + first, next_obs - first);
      const Pose& prev = k > 0 ? poses[k - 1] : poses[k];
      FilterStepResult step =
          filter_step(state, prev, poses[k], frame_obs, dataset.priors, params, dataset.world.sigma_m_floor);
      state = std::move(step.state);
      params = step.params;
      result.updates += step.updates;
      result.degenerate_updates += step.degenerate_updates;
      result.kappas.push_back({poses[k].frame_index, kappa_estimate(state), kappa_variance(state)});
    }
  }

  std::vector<double> kappas;
  kappas.reserve(result.kappas.size());
  for (const auto& s : result.kappas) kappas.push_back(s.kappa);
  result.trajectory = correct_trajectory(poses, kappas);
  return result;
}

}  // namespace scaledrift
