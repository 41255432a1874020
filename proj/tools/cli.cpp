#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "scaledrift/io_formats.hpp"
#include "scaledrift/observation_geometry.hpp"
#include "scaledrift/pipeline.hpp"
#include "scaledrift/scale_filter.hpp"
#include "scaledrift/trajectory_correction.hpp"

namespace scaledrift::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

double number(const std::string& token, const std::string& what) {
  double v = 0.0;
  if (!parse_double(token, v)) throw ConfigError("bad number '" + token + "' in " + what);
  return v;
}

struct CorrectArgs {
  std::string dataset;
  std::string out;
  std::string gt;
  std::string backend = "kalman";
  std::string strategy = "motion";
  std::vector<std::string> priors;
  std::optional<double> confidence;
  std::optional<double> gamma_alpha;
  std::optional<double> gamma_beta;
  std::optional<int> min_points;
  DriftParams drift;
  HistogramGridConfig grid;
  std::string lengths = "100..800";
  std::size_t stride = 1;
};

struct SimulateArgs {
  std::string out;
  std::uint64_t seed = 1;
  int frames = 1000;
  std::string drift = "linear:1:2";
  int cadence = 5;
  double pixel_noise = 1.0;
  double point_noise = 0.05;
  double height_mean = 1.5;
  double height_std = 0.1;
  double spacing = 12.0;
  std::vector<std::string> priors;
  double confidence = 0.45;
};

struct EvaluateArgs {
  std::string gt;
  std::string est;
  std::string out;
  std::string lengths = "100..800";
  std::size_t stride = 1;
};

void apply_priors(const std::vector<std::string>& specs, PriorTable& table) {
  for (const auto& s : specs) {
    HeightPrior p = parse_prior(s);
    table[p.class_label] = p;
  }
}

int do_correct(const CorrectArgs& a, std::ostream& err) {
  // Flag-level problems are usage errors, so resolve them before touching data.
  PipelineConfig config;
  config.backend = a.backend == "histogram" ? Backend::Histogram : Backend::Kalman;
  config.strategy = a.strategy == "average"       ? Strategy::AverageScale
                    : a.strategy == "update-only" ? Strategy::UpdateOnly
                                                  : Strategy::MotionModel;
  config.drift = a.drift;
  config.grid = a.grid;
  if (!is_valid(config.drift)) throw ConfigError("invalid drift parameters");
  if (!(config.grid.kappa_min > 0.0 && config.grid.kappa_max > config.grid.kappa_min && config.grid.bins > 1))
    throw ConfigError("invalid kappa grid");
  PriorTable cli_priors;
  apply_priors(a.priors, cli_priors);
  EvaluationOptions eval{parse_lengths(a.lengths), a.stride};
  if (eval.stride == 0) throw ConfigError("--stride must be positive");

  Dataset data;
  std::vector<Pose> gt;
  try {
    data = load_dataset(a.dataset, a.confidence.value_or(-1.0));
    for (auto& [label, prior] : cli_priors) data.priors[label] = prior;
    if (a.gamma_alpha) data.world.gamma_alpha = *a.gamma_alpha;
    if (a.gamma_beta) data.world.gamma_beta = *a.gamma_beta;
    if (a.min_points) data.world.min_points_per_detection = *a.min_points;
    if (auto report = validate_config(data.world); !report.ok()) throw ValidationError(report);
    if (!a.gt.empty()) gt = load_poses(a.gt);

    PipelineResult result = run_scale_correction(data, config);
    std::optional<ErrorReport> report;
    if (!a.gt.empty()) report = relative_translation_error(gt, result.trajectory.poses, eval);
    write_outputs(result.trajectory, result.kappas, report ? &*report : nullptr, a.out);

    err << "observations " << result.observations.size() << ", updates " << result.updates << ", rejected";
    for (int r = 0; r < 4; ++r)
      err << ' ' << to_string(static_cast<RejectReason>(r)) << '=' << result.rejected[static_cast<std::size_t>(r)];
    err << '\n';
    if (report) err << "rte.overall " << format_double(report->overall) << '\n';
  } catch (const ConfigError& e) {
    // Bad values inside data files are data errors, not usage errors.
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

int do_simulate(const SimulateArgs& a, std::ostream& err) {
  DriftProfile drift = parse_drift(a.drift);
  if (drift.seed == 0) drift.seed = a.seed;
  PriorTable cli_priors;
  apply_priors(a.priors, cli_priors);

  SceneConfig scene_config;
  scene_config.n_frames = a.frames;
  scene_config.straight_min_frames = 10;
  scene_config.straight_max_frames = 40;
  scene_config.turn_frames = 10;
  scene_config.turn_min_deg = 20.0;
  scene_config.turn_max_deg = 60.0;
  scene_config.object_spacing = a.spacing;
  scene_config.height_mean = a.height_mean;
  scene_config.height_std = a.height_std;
  scene_config.point_noise = a.point_noise;
  RenderOptions render;
  render.cadence = a.cadence;
  render.pixel_noise = a.pixel_noise;

  SyntheticScene scene = generate_scene(scene_config, a.seed);
  SyntheticDataset sim = make_dataset(scene, drift, render, a.seed);
  sim.dataset.world.confidence_threshold = a.confidence;
  for (auto& [label, prior] : cli_priors) sim.dataset.priors[label] = prior;

  write_dataset(sim.dataset, a.out);
  std::ostringstream gt_text;
  write_poses(gt_text, sim.gt_trajectory);
  write_file_atomic(fs::path(a.out) / "gt_poses.txt", gt_text.str());
  std::vector<KappaSample> truth;
  truth.reserve(sim.true_kappa.size());
  for (std::size_t k = 0; k < sim.true_kappa.size(); ++k)
    truth.push_back({static_cast<std::int64_t>(k), sim.true_kappa[k], 0.0});
  std::ostringstream kappa_text;
  write_kappa_series(kappa_text, truth);
  write_file_atomic(fs::path(a.out) / "true_kappa.txt", kappa_text.str());

  err << "frames " << sim.dataset.poses.size() << ", detections " << sim.dataset.detections.size() << '\n';
  return kOk;
}

int do_evaluate(const EvaluateArgs& a, std::ostream& err) {
  EvaluationOptions eval{parse_lengths(a.lengths), a.stride};
  if (eval.stride == 0) throw ConfigError("--stride must be positive");
  const auto gt = load_poses(a.gt);
  const auto est = load_poses(a.est);
  const ErrorReport report = relative_translation_error(gt, est, eval);
  fs::create_directories(a.out);
  std::ostringstream kv;
  write_key_values(kv, report_to_key_values(report));
  std::ostringstream plot;
  for (const auto& [length, error] : report.per_length) plot << format_double(length) << ' ' << format_double(error) << '\n';
  const OutputPaths paths;
  write_file_atomic(fs::path(a.out) / paths.report, kv.str());
  write_file_atomic(fs::path(a.out) / paths.report_plot, plot.str());
  err << "rte.overall " << format_double(report.overall) << '\n';
  return kOk;
}

// Closed-form oracles that exercise every stage.
int do_selftest(std::ostream& out) {
  std::vector<std::pair<std::string, std::function<bool()>>> checks;
  checks.emplace_back("transition sigma", [] {
    DriftParams p;
    auto at = [&](double omega) {
      p.accumulated_omega = omega;
      return transition_sigma(p);
    };
    return std::abs(at(0) - 0.00001) < 1e-15 && std::abs(at(60) - 0.02501) < 1e-15 &&
           std::abs(at(120) - 0.05001) < 1e-15;
  });
  checks.emplace_back("pinhole height", [] {
    const CameraIntrinsics k{100, 100, 0, 0, 0, 0};
    const Vec3 up(0, -1, 0);
    const VerticalExtremities ext{Vec2(0, -7.5), Vec2(0, 7.5)};
    return std::abs(object_height(ext, Vec3(0, 0, 10), k, up) - 1.5) < 1e-9 &&
           std::abs(object_height(ext, Vec3(0, 0, 20), k, up) - 3.0) < 1e-9;
  });
  checks.emplace_back("kalman fusion", [] {
    HeightPrior prior{"car", GaussianHeight{1.5, 0.1}};
    ScaleObservation obs = scale_observation(1.5, 10.0, 0.5, prior);
    GaussianScaleState s = kalman_update({1.0, 0.04}, obs, prior);
    return std::abs(s.mean - 1.0) < 1e-12 && std::abs(s.variance - 1.0 / 169.0) < 1e-12;
  });
  checks.emplace_back("trajectory recursion", [] {
    std::vector<Pose> poses;
    for (int k = 0; k < 5; ++k) {
      Pose p = Pose::identity();
      p.translation = Vec3(0, 0, k);
      p.frame_index = k;
      poses.push_back(p);
    }
    const std::vector<double> kappas{2, 1, 2, 1, 2};
    const auto t = correct_trajectory(poses, kappas);
    const double z[] = {0, 1, 3, 4, 6};
    for (int k = 0; k < 5; ++k)
      if (std::abs(t.poses[static_cast<std::size_t>(k)].translation.z() - z[k]) > 1e-12) return false;
    return true;
  });
  checks.emplace_back("relative error", [] {
    std::vector<Pose> gt, est;
    for (int k = 0; k <= 900; ++k) {
      Pose p = Pose::identity();
      p.frame_index = k;
      p.translation = Vec3(0, 0, k);
      gt.push_back(p);
      p.translation *= 2.0;
      est.push_back(p);
    }
    const auto doubled = relative_translation_error(gt, est);
    const auto same = relative_translation_error(gt, gt);
    for (const auto& [length, e] : doubled.per_length)
      if (std::abs(e - 1.0) > 1e-9) return false;
    return same.overall == 0.0;
  });
  checks.emplace_back("synthetic oracle", [] {
    SceneConfig sc;
    sc.n_frames = 11;
    sc.route = {{11, 0.0}};
    SceneObject car;
    car.footprint_center = Vec3(0, sc.camera_height, 20);
    car.facing_yaw = M_PI;
    car.surface_points = 50;
    sc.objects = {car};
    DriftProfile drift;
    drift.start = 2.0;
    RenderOptions ro;
    ro.cadence = 1;
    ro.confidence_min = 1.0;
    const auto sim = make_dataset(generate_scene(sc, 7), drift, ro, 7);
    int seen = 0;
    for (const auto& r : observe_all(sim.dataset)) {
      const auto* o = std::get_if<ScaleObservation>(&r);
      if (!o || std::abs(o->kappa_hat - 0.5) > 1e-6) return false;
      ++seen;
    }
    return seen > 0;
  });

  int failed = 0;
  for (const auto& [name, check] : checks) {
    bool ok = false;
    try {
      ok = check();
    } catch (const std::exception&) {
      ok = false;
    }
    out << (ok ? "PASS " : "FAIL ") << name << '\n';
    failed += ok ? 0 : 1;
  }
  return failed == 0 ? kOk : kDataError;
}

}  // namespace

HeightPrior parse_prior(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("prior must look like class=mean:std, got '" + text + "'");
  const auto parts = split(text.substr(eq + 1), ':');
  if (parts.size() != 2) throw ConfigError("prior must look like class=mean:std, got '" + text + "'");
  HeightPrior prior{text.substr(0, eq), GaussianHeight{number(parts[0], "prior"), number(parts[1], "prior")}};
  if (!(prior.mean() > 0.0 && prior.stddev() > 0.0)) throw ConfigError("prior mean and std must be positive");
  return prior;
}

std::vector<double> parse_lengths(const std::string& text) {
  std::vector<double> lengths;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const double first = number(text.substr(0, dots), "lengths");
    const auto rest = split(text.substr(dots + 2), ':');
    if (rest.empty() || rest.size() > 2) throw ConfigError("bad length range '" + text + "'");
    const double last = number(rest[0], "lengths");
    const double step = rest.size() == 2 ? number(rest[1], "lengths") : first;
    if (!(first > 0.0 && step > 0.0 && last >= first)) throw ConfigError("bad length range '" + text + "'");
    for (int i = 0;; ++i) {
      const double l = first + step * i;
      if (l > last + 1e-9 * last) break;
      lengths.push_back(l);
    }
  } else {
    for (const auto& p : split(text, ',')) lengths.push_back(number(p, "lengths"));
  }
  if (lengths.empty()) throw ConfigError("no lengths given");
  for (double l : lengths)
    if (!(l > 0.0)) throw ConfigError("lengths must be positive");
  return lengths;
}

DriftProfile parse_drift(const std::string& text) {
  const auto parts = split(text, ':');
  DriftProfile d;
  auto arg = [&](std::size_t i) { return number(parts.at(i), "drift"); };
  const std::string& kind = parts.empty() ? text : parts[0];
  if (kind == "constant" && parts.size() == 2) {
    d.kind = DriftKind::Constant;
    d.start = arg(1);
  } else if (kind == "linear" && parts.size() == 3) {
    d.kind = DriftKind::Linear;
    d.start = arg(1);
    d.end = arg(2);
  } else if (kind == "random-walk" && parts.size() == 2) {
    d.kind = DriftKind::RandomWalk;
    d.sigma = arg(1);
  } else if (kind == "rotation" && (parts.size() == 2 || parts.size() == 3)) {
    d.kind = DriftKind::RotationCoupled;
    d.gain = arg(1);
    if (parts.size() == 3) d.bias = arg(2);
  } else {
    throw ConfigError("unknown drift profile '" + text + "'");
  }
  if (!(d.start > 0.0 && d.end > 0.0 && d.sigma >= 0.0 && d.gain >= 0.0))
    throw ConfigError("drift scales must be positive and noise levels non-negative");
  return d;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scale-drift correction for monocular SLAM trajectories", "scaledrift"};
  app.require_subcommand(1);

  CorrectArgs ca;
  auto* correct = app.add_subcommand("correct", "Estimate per-frame scale and write the corrected trajectory");
  correct->add_option("--dataset", ca.dataset, "Dataset directory or manifest")->required();
  correct->add_option("--out", ca.out, "Output directory")->required();
  correct->add_option("--gt", ca.gt, "Ground-truth poses; enables the error report");
  correct->add_option("--backend", ca.backend, "kalman | histogram")
      ->check(CLI::IsMember({"kalman", "histogram"}))
      ->capture_default_str();
  correct->add_option("--strategy", ca.strategy, "motion | update-only | average")
      ->check(CLI::IsMember({"motion", "update-only", "average"}))
      ->capture_default_str();
  correct->add_option("--prior", ca.priors, "Height prior class=mean:std (repeatable)");
  correct->add_option("--confidence", ca.confidence, "Detection confidence threshold");
  correct->add_option("--gamma-alpha", ca.gamma_alpha, "Surface-point gamma shape");
  correct->add_option("--gamma-beta", ca.gamma_beta, "Surface-point gamma scale");
  correct->add_option("--min-points", ca.min_points, "Minimum map points per detection");
  correct->add_option("--sigma-min", ca.drift.sigma_min, "Process std without rotation")->capture_default_str();
  correct->add_option("--sigma-max", ca.drift.sigma_max, "Process std at omega-max")->capture_default_str();
  correct->add_option("--omega-max", ca.drift.omega_max, "Rotation (deg) reaching sigma-max")->capture_default_str();
  correct->add_option("--kappa-min", ca.grid.kappa_min, "Histogram grid lower bound")->capture_default_str();
  correct->add_option("--kappa-max", ca.grid.kappa_max, "Histogram grid upper bound")->capture_default_str();
  correct->add_option("--bins", ca.grid.bins, "Histogram grid bins")->capture_default_str();
  correct->add_option("--height-bins", ca.grid.height.bins, "Height prior grid bins")->capture_default_str();
  correct->add_option("--lengths", ca.lengths, "Subsequence lengths, e.g. 100..800")->capture_default_str();
  correct->add_option("--stride", ca.stride, "Spacing of subsequence start frames")->capture_default_str();

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Write a synthetic dataset with ground truth");
  simulate->add_option("--out", sa.out, "Output directory")->required();
  simulate->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
  simulate->add_option("--frames", sa.frames, "Number of frames")->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--drift", sa.drift, "constant:S | linear:A:B | random-walk:SIGMA | rotation:GAIN[:BIAS]")
      ->capture_default_str();
  simulate->add_option("--cadence", sa.cadence, "Detect every N frames")->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--pixel-noise", sa.pixel_noise, "Rect jitter std (px)")->capture_default_str();
  simulate->add_option("--point-noise", sa.point_noise, "Map point noise std (m)")->capture_default_str();
  simulate->add_option("--height-mean", sa.height_mean, "Mean object height (m)")->capture_default_str();
  simulate->add_option("--height-std", sa.height_std, "Object height std (m)")->capture_default_str();
  simulate->add_option("--spacing", sa.spacing, "Mean route meters between objects")->capture_default_str();
  simulate->add_option("--prior", sa.priors, "Override the emitted prior class=mean:std (repeatable)");
  simulate->add_option("--confidence", sa.confidence, "Confidence threshold written to the config")
      ->capture_default_str();

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Relative translation error of an estimate against ground truth");
  evaluate->add_option("--gt", ea.gt, "Ground-truth poses")->required();
  evaluate->add_option("--est", ea.est, "Estimated poses")->required();
  evaluate->add_option("--out", ea.out, "Output directory")->required();
  evaluate->add_option("--lengths", ea.lengths, "Subsequence lengths, e.g. 100..800")->capture_default_str();
  evaluate->add_option("--stride", ea.stride, "Spacing of subsequence start frames")->capture_default_str();

  auto* selftest = app.add_subcommand("selftest", "Run the built-in oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kUsage;
  }

  try {
    if (correct->parsed()) return do_correct(ca, err);
    if (simulate->parsed()) return do_simulate(sa, err);
    if (evaluate->parsed()) return do_evaluate(ea, err);
    if (selftest->parsed()) return do_selftest(out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  err << app.help();
  return kUsage;
}

}  // namespace scaledrift::cli
