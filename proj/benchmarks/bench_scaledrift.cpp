#include <benchmark/benchmark.h>

#include "scaledrift/evaluation.hpp"
#include "scaledrift/pipeline.hpp"
#include "scaledrift/synthetic_world.hpp"

using namespace scaledrift;

namespace {

const SyntheticDataset& dataset() {
  static const SyntheticDataset sim = [] {
    SceneConfig sc;
    sc.n_frames = 1000;
    sc.point_noise = 0.05;
    RenderOptions ro;
    ro.pixel_noise = 1.0;
    DriftProfile drift;
    drift.kind = DriftKind::Linear;
    drift.end = 2.0;
    return make_dataset(generate_scene(sc, 1), drift, ro, 1);
  }();
  return sim;
}

ScaleObservation sample_observation() {
  ScaleObservation o;
  o.class_label = "car";
  o.kappa_hat = 0.8;
  o.height_hat = 1.5 / 0.8;
  o.depth = 15.0;
  o.sigma_d = 0.3;
  o.sigma_m = 0.016;
  return o;
}

}  // namespace

static void BM_ObserveDetection(benchmark::State& state) {
  const auto& d = dataset().dataset;
  const Detection& det = d.detections.front();
  const LocalMapView& view = *d.view_for(det.frame_index);
  const Pose& pose = d.poses[static_cast<std::size_t>(det.frame_index)];
  for (auto _ : state)
    benchmark::DoNotOptimize(observe_detection(det, view, pose, d.intrinsics, d.priors, d.world));
}
BENCHMARK(BM_ObserveDetection);

static void BM_KalmanStep(benchmark::State& state) {
  const PriorTable priors{{"car", HeightPrior{"car", GaussianHeight{}}}};
  const std::vector<ScaleObservation> obs{sample_observation()};
  ScaleState s = GaussianScaleState{};
  for (auto _ : state) {
    auto r = filter_step(s, Pose{}, Pose{}, obs, priors, DriftParams{});
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_KalmanStep);

static void BM_HistogramStep(benchmark::State& state) {
  const PriorTable priors{{"car", HeightPrior{"car", GaussianHeight{}}}};
  const std::vector<ScaleObservation> obs{sample_observation()};
  auto h = HistogramScaleState::uniform(0.1, 10.0, static_cast<int>(state.range(0)));
  DriftParams p;
  p.accumulated_omega = 30.0;
  const ScaleState s = h;
  for (auto _ : state) {
    auto r = filter_step(s, Pose{}, Pose{}, obs, priors, p);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_HistogramStep)->Arg(512)->Arg(2048)->Arg(8192);

static void BM_Pipeline(benchmark::State& state) {
  PipelineConfig config;
  config.backend = static_cast<Backend>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_scale_correction(dataset().dataset, config));
}
BENCHMARK(BM_Pipeline)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_RelativeTranslationError(benchmark::State& state) {
  const auto& sim = dataset();
  for (auto _ : state)
    benchmark::DoNotOptimize(relative_translation_error(sim.gt_trajectory, sim.dataset.poses));
}
BENCHMARK(BM_RelativeTranslationError)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
