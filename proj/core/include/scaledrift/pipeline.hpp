#pragma once

#include <array>
#include <vector>

#include "scaledrift/io_formats.hpp"
#include "scaledrift/observation_geometry.hpp"
#include "scaledrift/scale_filter.hpp"
#include "scaledrift/trajectory_correction.hpp"

namespace scaledrift {

enum class Backend { Kalman, Histogram };

/// How per-frame kappas are produced.
enum class Strategy {
  MotionModel,   ///< Bayes filter with rotation-driven process noise
  UpdateOnly,    ///< same filter, process std pinned at sigma_min
  AverageScale,  ///< one global mean of all kappa observations
};

struct HistogramGridConfig {
  double kappa_min = 0.1;
  double kappa_max = 10.0;
  int bins = 2048;
  HeightGridConfig height;
};

struct PipelineConfig {
  Backend backend = Backend::Kalman;
  Strategy strategy = Strategy::MotionModel;
  DriftParams drift;
  HistogramGridConfig grid;
  GaussianScaleState initial{1.0, 1.0};
};

struct PipelineResult {
  std::vector<KappaSample> kappas;  ///< one per pose
  ScaledTrajectory trajectory;
  std::vector<ScaleObservation> observations;
  std::array<int, 4> rejected{};  ///< indexed by RejectReason
  int updates = 0;
  int degenerate_updates = 0;
};

/// Observations for every detection of the dataset, grouped by frame in
/// frame order. Detections below the confidence threshold are skipped.
std::vector<ObservationResult> observe_all(const Dataset& dataset);

/// Runs the estimator over the whole sequence and corrects the trajectory.
PipelineResult run_scale_correction(const Dataset& dataset, const PipelineConfig& config);

}  // namespace scaledrift
