#include "scaledrift/synthetic_world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "scaledrift/errors.hpp"
#include "scaledrift/random.hpp"
#include "scaledrift/scale_filter.hpp"
#include "scaledrift/trajectory_correction.hpp"

namespace scaledrift {

namespace {

// Stream keys for CounterRng.
enum : std::uint64_t {
  kRouteStream = 1,
  kObjectStream = 2,
  kPointStream = 3,
  kDetectionStream = 4,
  kDriftStream = 5,
  kNoiseStream = 6,
};

constexpr double kDeg = std::numbers::pi / 180.0;

Mat3 yaw_rotation(double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Mat3 r;
  r << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
  return r;
}

Vec3 heading(double yaw) { return {std::sin(yaw), 0.0, std::cos(yaw)}; }

void check_config(const SceneConfig& c) {
  if (c.n_frames < 1) throw ConfigError("scene: n_frames must be >= 1");
  if (!(c.speed > 0.0)) throw ConfigError("scene: speed must be positive");
  if (!(c.camera_height > 0.0)) throw ConfigError("scene: camera_height must be positive");
  if (!is_valid(c.intrinsics)) throw ConfigError("scene: invalid intrinsics");
  if (!(c.object_width > 0.0) || !(c.height_mean > 0.0) || c.height_std < 0.0)
    throw ConfigError("scene: object dimensions must be positive");
  if (c.surface_points < 1 || c.background_points < 0) throw ConfigError("scene: invalid point counts");
  if (!(c.object_spacing > 0.0)) throw ConfigError("scene: object spacing must be positive");
  if (c.route.empty() && (c.straight_min_frames < 1 || c.straight_max_frames < c.straight_min_frames ||
                          c.turn_frames < 1 || c.turn_max_deg < c.turn_min_deg))
    throw ConfigError("scene: invalid route ranges");
  for (const auto& seg : c.route)
    if (seg.frames < 1) throw ConfigError("scene: route segment with no frames");
  for (const auto& obj : c.objects) {
    if (!(obj.true_height > 0.0) || !(obj.width > 0.0) || obj.surface_points < 1 || obj.background_points < 0)
      throw ConfigError("scene: object dimensions must be positive");
  }
}

std::vector<double> yaw_rates(const SceneConfig& c, std::uint64_t seed) {
  std::vector<double> rates;
  rates.reserve(static_cast<std::size_t>(c.n_frames));
  if (!c.route.empty()) {
    for (const auto& seg : c.route)
      for (int i = 0; i < seg.frames; ++i) rates.push_back(seg.yaw_rate_deg);
    while (static_cast<int>(rates.size()) < c.n_frames) rates.push_back(c.route.back().yaw_rate_deg);
  } else {
    CounterRng rng(seed, kRouteStream);
    while (static_cast<int>(rates.size()) < c.n_frames) {
      const int straight = c.straight_min_frames +
                           static_cast<int>(rng.uniform() * (c.straight_max_frames - c.straight_min_frames + 1));
      rates.insert(rates.end(), static_cast<std::size_t>(straight), 0.0);
      const double angle = rng.uniform(c.turn_min_deg, c.turn_max_deg) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      rates.insert(rates.end(), static_cast<std::size_t>(c.turn_frames), angle / c.turn_frames);
    }
  }
  rates.resize(static_cast<std::size_t>(c.n_frames));
  return rates;
}

void add_object_points(SyntheticScene& scene, std::size_t object_index, std::uint64_t seed) {
  const SceneObject& obj = scene.objects[object_index];
  CounterRng rng(seed, kPointStream, object_index);
  const Vec3 lat = obj.lateral_axis();
  const Vec3 n = obj.normal();
  const Vec3 down{0.0, 1.0, 0.0};
  std::vector<std::size_t> surface;
  auto push = [&](const Vec3& p, bool on_surface) {
    const std::size_t idx = scene.points.size();
    scene.points.push_back({static_cast<std::int64_t>(idx), p});
    scene.point_object.push_back(static_cast<int>(object_index));
    scene.point_on_surface.push_back(on_surface);
    if (on_surface) surface.push_back(idx);
  };
  for (int i = 0; i < obj.surface_points; ++i) {
    const double a = rng.uniform(-0.5, 0.5) * obj.width;
    const double h = rng.uniform() * obj.true_height;
    push(obj.footprint_center + a * lat - h * down, true);
  }
  for (int i = 0; i < obj.background_points; ++i) {
    const double a = rng.uniform(-1.0, 1.0) * obj.width;
    const double h = rng.uniform() * 2.0 * obj.true_height;
    const double back = obj.background_offset * rng.uniform(0.8, 1.2);
    push(obj.footprint_center - back * n + a * lat - h * down, false);
  }
  scene.object_surface.push_back(std::move(surface));
}

}  // namespace

Vec3 SceneObject::normal() const { return heading(facing_yaw); }
Vec3 SceneObject::lateral_axis() const { return {std::cos(facing_yaw), 0.0, -std::sin(facing_yaw)}; }

SyntheticScene generate_scene(const SceneConfig& config, std::uint64_t seed) {
  check_config(config);
  SyntheticScene scene;
  scene.config = config;
  scene.intrinsics = config.intrinsics;

  const auto rates = yaw_rates(config, seed);
  std::vector<double> yaws;
  double yaw = 0.0;
  Vec3 pos = Vec3::Zero();
  for (int k = 0; k < config.n_frames; ++k) {
    if (k > 0) {
      const double next = yaw + rates[static_cast<std::size_t>(k)] * kDeg;
      pos += config.speed * heading(0.5 * (yaw + next));
      yaw = next;
    }
    yaws.push_back(yaw);
    scene.trajectory.push_back(Pose{yaw_rotation(yaw), pos, k});
  }

  if (!config.objects.empty()) {
    scene.objects = config.objects;
  } else {
    CounterRng rng(seed, kObjectStream);
    const double total = config.speed * (config.n_frames - 1);
    double s = config.object_spacing * rng.uniform(0.5, 1.5);
    while (s < total) {
      const auto k = static_cast<std::size_t>(s / config.speed);
      const Vec3 right = yaw_rotation(yaws[k]) * Vec3::UnitX();
      const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
      SceneObject obj;
      obj.class_label = config.class_label;
      obj.true_height = std::max(0.2 * config.height_mean, rng.normal(config.height_mean, config.height_std));
      obj.width = config.object_width;
      obj.footprint_center = scene.trajectory[k].translation + heading(yaws[k]) * (s - k * config.speed) +
                             side * rng.uniform(config.lateral_min, config.lateral_max) * right +
                             Vec3{0.0, config.camera_height, 0.0};
      obj.facing_yaw = yaws[k] + std::numbers::pi;
      obj.surface_points = config.surface_points;
      obj.background_points = config.background_points;
      obj.background_offset = rng.uniform(config.background_offset_min, config.background_offset_max);
      scene.objects.push_back(obj);
      s += config.object_spacing * rng.uniform(0.5, 1.5);
    }
  }
  for (std::size_t i = 0; i < scene.objects.size(); ++i) add_object_points(scene, i, seed);

  if (config.point_noise > 0.0) {
    for (std::size_t i = 0; i < scene.points.size(); ++i) {
      CounterRng rng(seed, kNoiseStream, i);
      const Vec3 noise{rng.normal(), rng.normal(), rng.normal()};
      scene.points[i].position_world += config.point_noise * noise;
    }
  }
  return scene;
}

std::vector<double> drift_series(const DriftProfile& profile, std::span<const Pose> gt_trajectory) {
  const std::size_t n = gt_trajectory.size();
  if (!(profile.start > 0.0) || (profile.kind == DriftKind::Linear && !(profile.end > 0.0)))
    throw ConfigError("drift: scale must stay positive");
  std::vector<double> s(n, profile.start);
  switch (profile.kind) {
    case DriftKind::Constant:
      break;
    case DriftKind::Linear:
      for (std::size_t k = 0; k < n && n > 1; ++k)
        s[k] = profile.start + (profile.end - profile.start) * static_cast<double>(k) / static_cast<double>(n - 1);
      break;
    case DriftKind::RandomWalk: {
      CounterRng rng(profile.seed, kDriftStream);
      double log_s = std::log(profile.start);
      for (std::size_t k = 1; k < n; ++k) {
        log_s += profile.sigma * rng.normal();
        s[k] = std::exp(log_s);
      }
      break;
    }
    case DriftKind::RotationCoupled: {
      // Random walk in log-scale indexed by turned angle: variance grows
      // with degrees turned, so the scale only moves through turns.
      CounterRng rng(profile.seed, kDriftStream);
      double log_s = std::log(profile.start);
      for (std::size_t k = 1; k < n; ++k) {
        const double omega = angular_displacement(gt_trajectory[k - 1], gt_trajectory[k]);
        const double xi = rng.normal();
        log_s += profile.bias * omega + profile.gain * std::sqrt(omega) * xi;
        s[k] = std::exp(log_s);
      }
      break;
    }
  }
  return s;
}

std::vector<std::size_t> visible_points(const SyntheticScene& scene, const Pose& pose) {
  std::vector<std::size_t> ids;
  const Vec3 cam = pose.translation;
  const double range2 = scene.config.max_range * scene.config.max_range;
  const auto& k = scene.intrinsics;
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    const Vec3& p = scene.points[i].position_world;
    if ((p - cam).squaredNorm() > range2) continue;
    const Vec3 pc = pose.world_to_camera(p);
    if (!(pc.z() > 0.1)) continue;
    const Vec2 px = k.project(pc);
    if (px.x() < 0.0 || px.y() < 0.0 || px.x() > k.width || px.y() > k.height) continue;
    if (scene.point_on_surface[i]) {
      const auto& obj = scene.objects[static_cast<std::size_t>(scene.point_object[i])];
      if (obj.normal().dot(cam - p) <= 0.0) continue;
    }
    ids.push_back(i);
  }
  return ids;
}

SlamOutput apply_drift(const SyntheticScene& scene, const DriftProfile& profile,
                       std::span<const std::int64_t> view_frames) {
  const auto& gt = scene.trajectory;
  const auto s = drift_series(profile, gt);

  SlamOutput out;
  out.true_kappa.reserve(s.size());
  for (double v : s) out.true_kappa.push_back(1.0 / v);
  // Same incremental recursion the corrector inverts, driven by s*.
  out.trajectory = correct_trajectory(gt, s).poses;

  auto emit = [&](std::size_t k) {
    LocalMapView view;
    view.frame_index = gt[k].frame_index;
    for (std::size_t id : visible_points(scene, gt[k])) {
      const Vec3 p_cam = gt[k].world_to_camera(scene.points[id].position_world);
      view.points.push_back({scene.points[id].id, out.trajectory[k].transform(s[k] * p_cam)});
    }
    out.views.push_back(std::move(view));
  };
  if (view_frames.empty()) {
    for (std::size_t k = 0; k < gt.size(); ++k) emit(k);
  } else {
    std::vector<std::int64_t> frames(view_frames.begin(), view_frames.end());
    std::sort(frames.begin(), frames.end());
    frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
    for (auto f : frames)
      if (f >= 0 && static_cast<std::size_t>(f) < gt.size()) emit(static_cast<std::size_t>(f));
  }
  return out;
}

std::vector<Detection> render_detections(const SyntheticScene& scene, const Pose& pose, std::int64_t frame,
                                         const RenderOptions& options, std::uint64_t seed) {
  std::vector<Detection> out;
  if (options.cadence > 1 && frame % options.cadence != 0) return out;
  const auto& k = scene.intrinsics;
  const Vec3 cam = pose.translation;
  const double cos_max = std::cos(options.max_view_angle_deg * kDeg);

  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& obj = scene.objects[i];
    const Vec3 center = obj.footprint_center - Vec3{0.0, 0.5 * obj.true_height, 0.0};
    const Vec3 to_cam = cam - center;
    const double dist = to_cam.norm();
    if (dist > options.max_range || dist <= 0.0) continue;
    if (obj.normal().dot(to_cam) < cos_max * dist) continue;

    const Vec3 lat = 0.5 * obj.width * obj.lateral_axis();
    const Vec3 top{0.0, -obj.true_height, 0.0};
    const Vec3 corners[4] = {obj.footprint_center - lat, obj.footprint_center + lat,
                             obj.footprint_center - lat + top, obj.footprint_center + lat + top};
    Rect r{HUGE_VAL, HUGE_VAL, -HUGE_VAL, -HUGE_VAL};
    bool in_front = true;
    for (const auto& c : corners) {
      const Vec3 pc = pose.world_to_camera(c);
      if (!(pc.z() > 0.1)) {
        in_front = false;
        break;
      }
      const Vec2 px = k.project(pc);
      r.x_min = std::min(r.x_min, px.x());
      r.y_min = std::min(r.y_min, px.y());
      r.x_max = std::max(r.x_max, px.x());
      r.y_max = std::max(r.y_max, px.y());
    }
    if (!in_front) continue;
    if (r.x_min < 0.0 || r.y_min < 0.0 || r.x_max > k.width || r.y_max > k.height) continue;
    if (r.height() < options.min_pixels) continue;

    CounterRng rng(seed, kDetectionStream, splitmix64(static_cast<std::uint64_t>(frame)) ^ i);
    if (options.pixel_noise > 0.0) {
      r.x_min += options.pixel_noise * rng.normal();
      r.y_min += options.pixel_noise * rng.normal();
      r.x_max += options.pixel_noise * rng.normal();
      r.y_max += options.pixel_noise * rng.normal();
      if (!is_valid(r)) continue;
    }
    out.push_back({frame, obj.class_label, rng.uniform(options.confidence_min, options.confidence_max), r});
  }
  return out;
}

SyntheticDataset make_dataset(const SyntheticScene& scene, const DriftProfile& drift, const RenderOptions& render,
                              std::uint64_t seed) {
  SyntheticDataset out;
  out.gt_trajectory = scene.trajectory;

  std::vector<Detection> detections;
  std::vector<std::int64_t> frames;
  for (const auto& pose : scene.trajectory) {
    auto dets = render_detections(scene, pose, pose.frame_index, render, seed);
    if (!dets.empty()) frames.push_back(pose.frame_index);
    detections.insert(detections.end(), dets.begin(), dets.end());
  }
  SlamOutput slam = apply_drift(scene, drift, frames);

  Dataset& d = out.dataset;
  d.intrinsics = scene.intrinsics;
  d.poses = std::move(slam.trajectory);
  d.views = std::move(slam.views);
  d.detections = std::move(detections);
  // A zero-spread scene still needs a proper (positive std) prior.
  const GaussianHeight height{scene.config.height_mean, std::max(scene.config.height_std, 1e-3)};
  d.priors[scene.config.class_label] = HeightPrior{scene.config.class_label, height};
  for (const auto& obj : scene.objects) {
    if (!d.priors.contains(obj.class_label)) d.priors[obj.class_label] = HeightPrior{obj.class_label, height};
  }
  out.true_kappa = std::move(slam.true_kappa);
  return out;
}

}  // namespace scaledrift
