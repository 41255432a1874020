// Randomized invariants, 1000 cases each.
#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "scaledrift/evaluation.hpp"
#include "scaledrift/io_formats.hpp"
#include "scaledrift/observation_geometry.hpp"
#include "scaledrift/scale_filter.hpp"
#include "scaledrift/trajectory_correction.hpp"

using namespace scaledrift;

namespace {

constexpr int kCases = 1000;

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
  Mat3 rotation() {
    Eigen::Quaterniond q(std::normal_distribution<double>()(gen), std::normal_distribution<double>()(gen),
                         std::normal_distribution<double>()(gen), std::normal_distribution<double>()(gen));
    return q.normalized().toRotationMatrix();
  }
  Vec3 vec(double r) { return {uniform(-r, r), uniform(-r, r), uniform(-r, r)}; }
  Pose pose(double r) {
    Pose p;
    p.rotation = rotation();
    p.translation = vec(r);
    return p;
  }
};

Mat3 axis_rotation(double rad, const Vec3& axis) { return Eigen::AngleAxisd(rad, axis).toRotationMatrix(); }

// A vertical planar object seen by a slightly tilted camera.
struct DetectionCase {
  CameraIntrinsics k{500, 500, 640, 360, 1280, 720};
  WorldConfig world;
  Pose pose;
  LocalMapView view;
  Detection det;
  PriorTable priors{{"car", HeightPrior{"car", GaussianHeight{1.5, 0.1}}}};

  ObservationResult observe() const { return observe_detection(det, view, pose, k, priors, world); }

  // Moves the whole world by `g`: poses, points and the vertical.
  DetectionCase transformed(const Pose& g) const {
    DetectionCase c = *this;
    c.pose = g * pose;
    for (auto& p : c.view.points) p.position_world = g.transform(p.position_world);
    c.world.up_world = g.rotation * world.up_world;
    return c;
  }
  DetectionCase scaled(double s) const {
    DetectionCase c = *this;
    c.pose.translation *= s;
    for (auto& p : c.view.points) p.position_world *= s;
    return c;
  }
};

DetectionCase random_detection(Rng& rng) {
  DetectionCase c;
  const double yaw = rng.uniform(-M_PI, M_PI);
  c.pose.rotation = axis_rotation(yaw, Vec3::UnitY()) * axis_rotation(rng.uniform(-0.08, 0.08), Vec3::UnitX()) *
                    axis_rotation(rng.uniform(-0.08, 0.08), Vec3::UnitZ());
  c.pose.translation = Vec3(rng.uniform(-50, 50), 0, rng.uniform(-50, 50));
  const Mat3 heading = axis_rotation(yaw, Vec3::UnitY());
  const double depth = rng.uniform(6, 25);
  const double height = rng.uniform(1.0, 2.0);
  const double width = rng.uniform(1.0, 2.5);
  const Vec3 foot = c.pose.translation + heading * Vec3(rng.uniform(-3, 3), 1.65, depth);
  const Vec3 lat = heading * Vec3::UnitX();
  const Vec3 up = c.world.up_world;

  Rect r{HUGE_VAL, HUGE_VAL, -HUGE_VAL, -HUGE_VAL};
  for (double a : {-0.5, 0.5})
    for (double h : {0.0, 1.0}) {
      const Vec2 px = c.k.project(c.pose.world_to_camera(foot + a * width * lat + h * height * up));
      r = {std::min(r.x_min, px.x()), std::min(r.y_min, px.y()), std::max(r.x_max, px.x()), std::max(r.y_max, px.y())};
    }
  c.det = {0, "car", 0.9, r};
  const int n = 10 + static_cast<int>(rng.uniform(0, 40));
  for (int i = 0; i < n; ++i) {
    const Vec3 p = foot + rng.uniform(-0.45, 0.45) * width * lat + rng.uniform(0.05, 0.95) * height * up;
    c.view.points.push_back({i, p});
  }
  return c;
}

const ScaleObservation& as_obs(const ObservationResult& r) { return std::get<ScaleObservation>(r); }

}  // namespace

TEST(Property, ScaleEquivariance) {
  Rng rng(101);
  for (int i = 0; i < kCases; ++i) {
    const auto c = random_detection(rng);
    const double s = std::exp(rng.uniform(-3, 3));
    const auto a = c.observe();
    const auto b = c.scaled(s).observe();
    ASSERT_TRUE(std::holds_alternative<ScaleObservation>(a)) << std::get<NoObservation>(a).detail;
    ASSERT_TRUE(std::holds_alternative<ScaleObservation>(b));
    EXPECT_NEAR(as_obs(b).kappa_hat * s / as_obs(a).kappa_hat, 1.0, 1e-9) << "case " << i;
    EXPECT_NEAR(as_obs(b).height_hat / (s * as_obs(a).height_hat), 1.0, 1e-9);
  }
}

TEST(Property, RigidWorldInvariance) {
  Rng rng(102);
  for (int i = 0; i < kCases; ++i) {
    const auto c = random_detection(rng);
    const Pose g = rng.pose(100);
    const auto a = c.observe();
    const auto b = c.transformed(g).observe();
    ASSERT_TRUE(std::holds_alternative<ScaleObservation>(b));
    EXPECT_NEAR(as_obs(b).kappa_hat, as_obs(a).kappa_hat, 1e-9 * as_obs(a).kappa_hat) << "case " << i;
    EXPECT_NEAR(as_obs(b).sigma_m, as_obs(a).sigma_m, 1e-9);
  }
}

TEST(Property, ExtremitiesAreCoplanarWithTheVertical) {
  Rng rng(103);
  const CameraIntrinsics k{500, 500, 640, 360, 1280, 720};
  for (int i = 0; i < kCases; ++i) {
    const Vec3 up = (Vec3(0, -1, 0) + rng.vec(0.2)).normalized();
    const Vec3 p(rng.uniform(-3, 3), rng.uniform(-1, 1), rng.uniform(5, 30));
    const Vec2 c = k.project(p);
    const Rect r{c.x() - rng.uniform(5, 200), c.y() - rng.uniform(5, 200), c.x() + rng.uniform(5, 200),
                 c.y() + rng.uniform(5, 200)};
    const auto e = vertical_extremities(p, r, k, up);
    const Vec3 n = p.cross(up).normalized();  // normal of the plane through the centre and the vertical
    EXPECT_NEAR(n.dot(k.back_project(e.top).normalized()), 0.0, 1e-9);
    EXPECT_NEAR(n.dot(k.back_project(e.bottom).normalized()), 0.0, 1e-9);
    const auto h = object_height_points(e, p, k, up);
    EXPECT_NEAR((h.p_top - p).cross(up).norm(), 0.0, 1e-9);
    EXPECT_NEAR((h.p_bottom - p).cross(up).norm(), 0.0, 1e-9);
    EXPECT_GE((h.p_top - h.p_bottom).dot(up), -1e-9);
  }
}

TEST(Property, HistogramStaysNormalized) {
  Rng rng(104);
  const HeightPrior car{"car", GaussianHeight{1.5, 0.1}};
  auto h = HistogramScaleState::uniform(0.1, 10.0, 512);
  h.height_grid.bins = 64;
  for (int i = 0; i < kCases; ++i) {
    h = histogram_predict(h, rng.uniform(0, 0.2));
    ScaleObservation o;
    o.kappa_hat = rng.uniform(0.3, 5);
    o.height_hat = 1.5 / o.kappa_hat;
    o.depth = rng.uniform(3, 40);
    o.sigma_d = rng.uniform(0, 3);
    o.sigma_m = observation_sigma(1.5, o.height_hat, o.depth, o.sigma_d, 1e-3);
    const auto u = histogram_update(h, o, car);
    double sum = 0.0;
    for (double w : u.state.weights) {
      ASSERT_GE(w, 0.0);
      sum += w;
    }
    ASSERT_NEAR(sum, 1.0, 1e-9) << "case " << i;
    h = u.state;
  }
}

TEST(Property, VarianceMonotonicity) {
  Rng rng(105);
  const HeightPrior car{"car", GaussianHeight{1.5, 0.1}};
  for (int i = 0; i < kCases; ++i) {
    const GaussianScaleState s{rng.uniform(0.2, 5), rng.uniform(1e-6, 1)};
    ScaleObservation o;
    o.kappa_hat = rng.uniform(0.2, 5);
    o.height_hat = 1.5 / o.kappa_hat;
    o.sigma_m = rng.uniform(1e-3, 1);
    EXPECT_LE(kalman_update(s, o, car).variance, s.variance);
    EXPECT_GE(kalman_predict(s, rng.uniform(0, 0.1)).variance, s.variance);
    DriftParams p;
    const double w1 = rng.uniform(0, 120);
    p.accumulated_omega = w1;
    const double a = transition_sigma(p);
    p.accumulated_omega = w1 + rng.uniform(0, 60);
    EXPECT_GE(transition_sigma(p), a);
  }
}

TEST(Property, KalmanUpdateOrderInvariance) {
  Rng rng(106);
  const HeightPrior car{"car", GaussianHeight{1.5, 0.1}};
  for (int i = 0; i < kCases; ++i) {
    const GaussianScaleState s{rng.uniform(0.2, 5), rng.uniform(1e-4, 1)};
    ScaleObservation a, b;
    for (auto* o : {&a, &b}) {
      o->kappa_hat = rng.uniform(0.2, 5);
      o->height_hat = 1.5 / o->kappa_hat;
      o->sigma_m = rng.uniform(1e-3, 0.5);
    }
    const auto ab = kalman_update(kalman_update(s, a, car), b, car);
    const auto ba = kalman_update(kalman_update(s, b, car), a, car);
    EXPECT_NEAR(ab.mean, ba.mean, 1e-12 * std::max(1.0, std::abs(ab.mean)));
    EXPECT_NEAR(ab.variance, ba.variance, 1e-12 * ab.variance);
  }
}

TEST(Property, TrajectoryRoundTrip) {
  Rng rng(107);
  for (int i = 0; i < kCases; ++i) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform(0, 20));
    std::vector<Pose> poses;
    std::vector<double> kappa, inverse;
    Pose p = rng.pose(10);
    for (std::size_t k = 0; k < n; ++k) {
      p.frame_index = static_cast<std::int64_t>(k);
      poses.push_back(p);
      Pose step = rng.pose(2);
      p = p * step;
      kappa.push_back(std::exp(rng.uniform(-1, 1)));
      inverse.push_back(1.0 / kappa.back());
    }
    const auto there = correct_trajectory(poses, kappa);
    const auto back = correct_trajectory(there.poses, inverse);
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_TRUE(back.poses[k].rotation.isApprox(poses[k].rotation, 1e-12));
      EXPECT_LT((back.poses[k].translation - poses[k].translation).norm(), 1e-9);
      // Scaling never touches orientation.
      EXPECT_EQ(there.poses[k].rotation, poses[k].rotation);
    }
  }
}

TEST(Property, PoseCompositionClosure) {
  Rng rng(108);
  for (int i = 0; i < kCases; ++i) {
    Pose acc = Pose::identity();
    for (int j = 0; j < 10; ++j) acc = acc * rng.pose(5);
    EXPECT_TRUE(is_rotation(acc.rotation, 1e-12));
    const Pose id = acc.inverse() * acc;
    EXPECT_TRUE(id.rotation.isApprox(Mat3::Identity(), 1e-12));
    EXPECT_LT(id.translation.norm(), 1e-9);
  }
}

TEST(Property, RelativeErrorRigidInvariance) {
  Rng rng(109);
  EvaluationOptions opt{{5, 10}, 1};
  for (int i = 0; i < kCases; ++i) {
    std::vector<Pose> gt, est;
    Pose p = Pose::identity();
    const bool l_shaped = i % 2 == 1;
    for (int k = 0; k < 16; ++k) {
      p.frame_index = k;
      gt.push_back(p);
      Pose e = p;
      e.translation *= rng.uniform(0.5, 2.0);
      est.push_back(e);
      p.translation += (l_shaped && k >= 8) ? Vec3::UnitX() : Vec3::UnitZ();
    }
    const auto base = relative_translation_error(gt, est, opt);
    const Pose g = rng.pose(100);
    for (auto& e : est) e = g * e;
    const auto moved = relative_translation_error(gt, est, opt);
    for (const auto& [length, err] : base.per_length) EXPECT_NEAR(moved.per_length.at(length), err, 1e-9);
  }
}

TEST(Property, StraightLineScaleError) {
  Rng rng(110);
  EvaluationOptions opt{{5, 10, 20}, 1};
  for (int i = 0; i < kCases; ++i) {
    const double s = rng.uniform(0.1, 3);
    const Vec3 dir = rng.vec(1).normalized();
    std::vector<Pose> gt, est;
    for (int k = 0; k < 30; ++k) {
      Pose p;
      p.frame_index = k;
      p.translation = dir * k;
      gt.push_back(p);
      p.translation *= s;
      est.push_back(p);
    }
    const auto r = relative_translation_error(gt, est, opt);
    for (const auto& [length, err] : r.per_length) EXPECT_NEAR(err, std::abs(s - 1), 1e-9);
  }
}

TEST(Property, IoRoundTrip) {
  Rng rng(111);
  for (int i = 0; i < kCases; ++i) {
    std::vector<Pose> poses;
    std::vector<KappaSample> kappas;
    ErrorReport report;
    for (int k = 0; k < 5; ++k) {
      Pose p = rng.pose(std::pow(10.0, rng.uniform(-5, 5)));
      p.frame_index = k;
      poses.push_back(p);
      kappas.push_back({k, std::exp(rng.uniform(-5, 5)), rng.uniform(0, 1)});
      report.per_length[100.0 * (k + 1)] = rng.uniform(0, 1);
      report.counts[100.0 * (k + 1)] = k + 1;
    }
    report.overall = rng.uniform(0, 1);
    report.n_subsequences = 15;

    std::stringstream ps, ks, rs;
    write_poses(ps, poses);
    write_kappa_series(ks, kappas);
    write_key_values(rs, report_to_key_values(report));
    const auto p2 = parse_poses(ps, "p");
    const auto k2 = parse_kappa_series(ks, "k");
    const auto r2 = report_from_key_values(parse_key_values(rs, "r"));
    for (int k = 0; k < 5; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      EXPECT_LT((p2[uk].rotation - poses[uk].rotation).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_EQ(p2[uk].translation, poses[uk].translation);
      EXPECT_EQ(k2[uk].kappa, kappas[uk].kappa);
      EXPECT_EQ(k2[uk].variance, kappas[uk].variance);
    }
    EXPECT_EQ(r2.per_length, report.per_length);
    EXPECT_EQ(r2.counts, report.counts);
    EXPECT_EQ(r2.overall, report.overall);
  }
}
