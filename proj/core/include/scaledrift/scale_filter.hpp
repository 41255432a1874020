#pragma once

#include <span>
#include <variant>
#include <vector>

#include "scaledrift/errors.hpp"
#include "scaledrift/observation_geometry.hpp"
#include "scaledrift/scene_model.hpp"

namespace scaledrift {

/// Rotation-driven drift model. The process std grows linearly with the
/// rotation accumulated since the last update.
struct DriftParams {
  double sigma_min = 0.00001;
  double sigma_max = 0.05;
  double omega_max = 120.0;       ///< degrees
  double accumulated_omega = 0.0; ///< degrees since the last update
  /// When false the process std stays at sigma_min ("update only").
  bool rotation_coupled = true;
};

bool is_valid(const DriftParams& p);

struct GaussianScaleState {
  double mean = 1.0;
  double variance = 1.0;
};

/// Discretization of the height prior used by the histogram back end.
struct HeightGridConfig {
  int bins = 256;
  double span_sigmas = 5.0;
};

/// Posterior over kappa on uniform bins of [kappa_min, kappa_max].
struct HistogramScaleState {
  double kappa_min = 0.1;
  double kappa_max = 10.0;
  std::vector<double> weights;
  HeightGridConfig height_grid;

  static HistogramScaleState uniform(double kappa_min = 0.1, double kappa_max = 10.0, int bins = 2048);
  /// Grid sampling of a Gaussian, renormalized.
  static HistogramScaleState gaussian(double mean, double stddev, double kappa_min, double kappa_max, int bins);

  std::size_t size() const { return weights.size(); }
  double bin_width() const { return (kappa_max - kappa_min) / static_cast<double>(weights.size()); }
  double center(std::size_t i) const { return kappa_min + (static_cast<double>(i) + 0.5) * bin_width(); }
  double mean() const;
  double variance() const;
  double map_estimate() const;
};

using ScaleState = std::variant<GaussianScaleState, HistogramScaleState>;

/// Rotation angle of prev^-1 * curr in degrees, in [0, 180].
double angular_displacement(const Pose& pose_prev, const Pose& pose_curr);

double transition_sigma(const DriftParams& params);

GaussianScaleState kalman_predict(const GaussianScaleState& state, double sigma_p);

/// Measurement variance after marginalizing the height prior:
/// sigma_H^2 / height_hat^2 + sigma_m^2.
double marginal_observation_variance(const ScaleObservation& obs, const HeightPrior& prior);

GaussianScaleState kalman_update(const GaussianScaleState& state, const ScaleObservation& obs,
                                 const HeightPrior& prior);

HistogramScaleState histogram_predict(const HistogramScaleState& state, double sigma_p);

/// Discrete (height, probability) pairs for a prior. Gaussian priors are
/// sampled on mean +- span_sigmas * std, restricted to H > 0.
struct HeightGrid {
  std::vector<double> heights;
  std::vector<double> probabilities;
};
HeightGrid discretize_prior(const HeightPrior& prior, const HeightGridConfig& config);

struct HistogramUpdate {
  HistogramScaleState state;
  bool degenerate = false;  ///< every bin likelihood underflowed; state unchanged
};

HistogramUpdate histogram_update(const HistogramScaleState& state, const ScaleObservation& obs,
                                 const HeightPrior& prior, double sigma_m_floor = 1e-3);

/// Point estimate: posterior mean for the Kalman state, MAP bin centre for
/// the histogram.
double kappa_estimate(const ScaleState& state);
double kappa_variance(const ScaleState& state);

struct FilterStepResult {
  ScaleState state;
  DriftParams params;
  int updates = 0;
  int degenerate_updates = 0;
};

/// One frame of the recursion. Rotation accumulates every frame; frames
/// carrying observations predict once with the accumulated rotation, apply
/// every update in turn and reset the accumulator.
FilterStepResult filter_step(const ScaleState& state, const Pose& pose_prev, const Pose& pose_curr,
                             std::span<const ScaleObservation> observations, const PriorTable& priors,
                             const DriftParams& params, double sigma_m_floor = 1e-3);

}  // namespace scaledrift
