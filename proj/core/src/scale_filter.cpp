#include "scaledrift/scale_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "scaledrift/errors.hpp"

namespace scaledrift {

namespace {

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

void normalize(std::vector<double>& w) {
  double sum = 0.0;
  for (double v : w) sum += v;
  if (sum > 0.0)
    for (double& v : w) v /= sum;
}

}  // namespace

bool is_valid(const DriftParams& p) {
  return p.sigma_min > 0.0 && p.sigma_min <= p.sigma_max && p.omega_max > 0.0 && p.accumulated_omega >= 0.0;
}

HistogramScaleState HistogramScaleState::uniform(double kappa_min, double kappa_max, int bins) {
  if (!(kappa_min < kappa_max) || bins < 1) throw ConfigError("histogram grid: need kappa_min < kappa_max, bins >= 1");
  HistogramScaleState s;
  s.kappa_min = kappa_min;
  s.kappa_max = kappa_max;
  s.weights.assign(static_cast<std::size_t>(bins), 1.0 / bins);
  return s;
}

HistogramScaleState HistogramScaleState::gaussian(double mean, double stddev, double kappa_min, double kappa_max,
                                                  int bins) {
  HistogramScaleState s = uniform(kappa_min, kappa_max, bins);
  for (std::size_t i = 0; i < s.size(); ++i) s.weights[i] = normal_pdf(s.center(i), mean, stddev);
  normalize(s.weights);
  return s;
}

double HistogramScaleState::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) m += weights[i] * center(i);
  return m;
}

double HistogramScaleState::variance() const {
  const double m = mean();
  double v = 0.0;
  for (std::size_t i = 0; i < size(); ++i) v += weights[i] * (center(i) - m) * (center(i) - m);
  return v;
}

double HistogramScaleState::map_estimate() const {
  const auto it = std::max_element(weights.begin(), weights.end());
  return center(static_cast<std::size_t>(it - weights.begin()));
}

double angular_displacement(const Pose& pose_prev, const Pose& pose_curr) {
  const Mat3 rel = pose_prev.rotation.transpose() * pose_curr.rotation;
  const double c = 0.5 * (rel.trace() - 1.0);
  const Vec3 skew{rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1)};
  const double s = 0.5 * skew.norm();
  return std::atan2(s, c) * 180.0 / std::numbers::pi;
}

double transition_sigma(const DriftParams& params) {
  if (!params.rotation_coupled) return params.sigma_min;
  return params.sigma_min + params.accumulated_omega * params.sigma_max / params.omega_max;
}

GaussianScaleState kalman_predict(const GaussianScaleState& state, double sigma_p) {
  return {state.mean, state.variance + sigma_p * sigma_p};
}

double marginal_observation_variance(const ScaleObservation& obs, const HeightPrior& prior) {
  const double sh = prior.stddev() / obs.height_hat;
  return sh * sh + obs.sigma_m * obs.sigma_m;
}

GaussianScaleState kalman_update(const GaussianScaleState& state, const ScaleObservation& obs,
                                 const HeightPrior& prior) {
  const double r = marginal_observation_variance(obs, prior);
  if (!std::isfinite(r)) return state;
  const double precision = 1.0 / state.variance + 1.0 / r;
  const double variance = 1.0 / precision;
  return {variance * (state.mean / state.variance + obs.kappa_hat / r), variance};
}

HistogramScaleState histogram_predict(const HistogramScaleState& state, double sigma_p) {
  const double width = state.bin_width();
  const auto radius = static_cast<long>(std::floor(4.0 * sigma_p / width));
  if (!(sigma_p > 0.0) || radius < 1) return state;

  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (long d = -radius; d <= radius; ++d) {
    const double z = d * width / sigma_p;
    kernel[static_cast<std::size_t>(d + radius)] = std::exp(-0.5 * z * z);
  }
  normalize(kernel);

  const long n = static_cast<long>(state.size());
  auto reflect = [n](long j) {
    // Mirror about the outer bin edges until inside.
    while (j < 0 || j >= n) j = j < 0 ? -1 - j : 2 * n - 1 - j;
    return j;
  };

  HistogramScaleState out = state;
  std::fill(out.weights.begin(), out.weights.end(), 0.0);
  for (long i = 0; i < n; ++i) {
    const double w = state.weights[static_cast<std::size_t>(i)];
    if (w == 0.0) continue;
    for (long d = -radius; d <= radius; ++d)
      out.weights[static_cast<std::size_t>(reflect(i + d))] += w * kernel[static_cast<std::size_t>(d + radius)];
  }
  normalize(out.weights);
  return out;
}

HeightGrid discretize_prior(const HeightPrior& prior, const HeightGridConfig& config) {
  HeightGrid grid;
  if (const auto* g = std::get_if<GaussianHeight>(&prior.distribution)) {
    const double lo = std::max(g->mean - config.span_sigmas * g->stddev, 0.0);
    const double hi = g->mean + config.span_sigmas * g->stddev;
    const double step = (hi - lo) / config.bins;
    for (int i = 0; i < config.bins; ++i) {
      const double h = lo + (i + 0.5) * step;
      grid.heights.push_back(h);
      grid.probabilities.push_back(normal_pdf(h, g->mean, g->stddev));
    }
  } else {
    const auto& h = std::get<HistogramHeight>(prior.distribution);
    for (std::size_t i = 0; i < h.weights.size(); ++i) {
      grid.heights.push_back(0.5 * (h.edges[i] + h.edges[i + 1]));
      grid.probabilities.push_back(h.weights[i]);
    }
  }
  normalize(grid.probabilities);
  return grid;
}

HistogramUpdate histogram_update(const HistogramScaleState& state, const ScaleObservation& obs,
                                 const HeightPrior& prior, double sigma_m_floor) {
  const HeightGrid grid = discretize_prior(prior, state.height_grid);
  const long n = static_cast<long>(state.size());
  const double width = state.bin_width();

  std::vector<double> likelihood(state.size(), 0.0);
  for (std::size_t m = 0; m < grid.heights.size(); ++m) {
    const double p = grid.probabilities[m];
    if (p <= 0.0) continue;
    const double kappa_m = grid.heights[m] / obs.height_hat;
    const double sd = observation_sigma(grid.heights[m], obs.height_hat, obs.depth, obs.sigma_d, sigma_m_floor);
    // Bins beyond 10 sd contribute below double precision relative to the peak.
    const long lo = std::max(0L, static_cast<long>(std::floor((kappa_m - 10.0 * sd - state.kappa_min) / width)));
    const long hi = std::min(n - 1, static_cast<long>(std::ceil((kappa_m + 10.0 * sd - state.kappa_min) / width)));
    for (long j = lo; j <= hi; ++j)
      likelihood[static_cast<std::size_t>(j)] += p * normal_pdf(kappa_m, state.center(static_cast<std::size_t>(j)), sd);
  }

  HistogramUpdate result{state, false};
  double sum = 0.0;
  for (std::size_t j = 0; j < state.size(); ++j) {
    result.state.weights[j] = state.weights[j] * likelihood[j];
    sum += result.state.weights[j];
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) return {state, true};
  for (double& w : result.state.weights) w /= sum;
  return result;
}

double kappa_estimate(const ScaleState& state) {
  if (const auto* g = std::get_if<GaussianScaleState>(&state)) return g->mean;
  return std::get<HistogramScaleState>(state).map_estimate();
}

double kappa_variance(const ScaleState& state) {
  if (const auto* g = std::get_if<GaussianScaleState>(&state)) return g->variance;
  return std::get<HistogramScaleState>(state).variance();
}

FilterStepResult filter_step(const ScaleState& state, const Pose& pose_prev, const Pose& pose_curr,
                             std::span<const ScaleObservation> observations, const PriorTable& priors,
                             const DriftParams& params, double sigma_m_floor) {
  FilterStepResult result{state, params, 0, 0};
  result.params.accumulated_omega += angular_displacement(pose_prev, pose_curr);
  if (observations.empty()) return result;

  const double sigma_p = transition_sigma(result.params);
  if (auto* g = std::get_if<GaussianScaleState>(&result.state)) {
    *g = kalman_predict(*g, sigma_p);
  } else {
    auto& h = std::get<HistogramScaleState>(result.state);
    h = histogram_predict(h, sigma_p);
  }

  for (const auto& obs : observations) {
    const auto prior_it = priors.find(obs.class_label);
    if (prior_it == priors.end()) throw ConfigError("filter_step: no height prior for class '" + obs.class_label + "'");
    if (auto* g = std::get_if<GaussianScaleState>(&result.state)) {
      *g = kalman_update(*g, obs, prior_it->second);
      ++result.updates;
    } else {
      auto& h = std::get<HistogramScaleState>(result.state);
      HistogramUpdate upd = histogram_update(h, obs, prior_it->second, sigma_m_floor);
      if (upd.degenerate) {
        ++result.degenerate_updates;
      } else {
        h = std::move(upd.state);
        ++result.updates;
      }
    }
  }
  result.params.accumulated_omega = 0.0;
  return result;
}

}  // namespace scaledrift
