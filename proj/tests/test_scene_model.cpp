#include <gtest/gtest.h>

#include "scaledrift/scene_model.hpp"

using namespace scaledrift;

namespace {

const CameraIntrinsics kCam{100, 100, 50, 50, 100, 100};

bool has_issue(const ValidationReport& r, const std::string& message, const std::string& location = "") {
  for (const auto& i : r.issues)
    if (i.message == message && (location.empty() || i.location == location)) return true;
  return false;
}

}  // namespace

TEST(ValidateDataset, EmptyDatasetIsClean) {
  EXPECT_TRUE(validate_dataset({}, {}, {}, kCam).ok());
}

TEST(ValidateDataset, ScaledRotationIsReported) {
  Pose p;
  p.rotation = 2.0 * Mat3::Identity();
  const std::vector<Pose> poses{p};
  const auto report = validate_dataset(poses, {}, {}, kCam);
  ASSERT_EQ(report.issues.size(), 1u);
  EXPECT_TRUE(has_issue(report, "rotation not orthonormal", "frame 0"));
  EXPECT_NE(report.to_string().find("rotation not orthonormal at frame 0"), std::string::npos);
}

TEST(ValidateDataset, DegenerateRect) {
  const std::vector<Pose> poses{Pose::identity()};
  const std::vector<Detection> dets{{0, "car", 0.9, Rect{10, 10, 10, 20}}};
  EXPECT_TRUE(has_issue(validate_dataset(poses, {}, dets, kCam), "degenerate rect"));
}

TEST(ValidateDataset, RectOutsideImageAndUnknownFrame) {
  const std::vector<Pose> poses{Pose::identity()};
  const std::vector<Detection> dets{{0, "car", 0.9, Rect{200, 200, 220, 240}}, {4, "car", 0.9, Rect{1, 1, 5, 5}}};
  const auto report = validate_dataset(poses, {}, dets, kCam);
  EXPECT_TRUE(has_issue(report, "rect outside image"));
  EXPECT_TRUE(has_issue(report, "detection references unknown frame"));
}

TEST(ValidateDataset, FrameOrderAndConfidence) {
  const std::vector<Pose> poses{Pose::identity(1), Pose::identity(1)};
  const std::vector<Detection> dets{{1, "car", 1.5, Rect{1, 1, 5, 5}}};
  const auto report = validate_dataset(poses, {}, dets, kCam);
  EXPECT_TRUE(has_issue(report, "frame indices not strictly increasing"));
  EXPECT_TRUE(has_issue(report, "confidence outside [0,1]"));
}

TEST(ValidateDataset, NonFiniteMapPoint) {
  const std::vector<Pose> poses{Pose::identity()};
  const std::vector<LocalMapView> views{{0, {{3, Vec3(0, std::nan(""), 1)}}}};
  EXPECT_TRUE(has_issue(validate_dataset(poses, views, {}, kCam), "non-finite map point", "frame 0, point 3"));
}

TEST(ValidatePriors, GaussianAndHistogramRules) {
  PriorTable t;
  t["car"] = {"car", GaussianHeight{-1.0, 0.1}};
  t["sign"] = {"sign", HistogramHeight{{1.0, 2.0, 3.0}, {0.5, 0.4}}};
  const auto report = validate_priors(t);
  EXPECT_TRUE(has_issue(report, "non-positive mean height"));
  EXPECT_TRUE(has_issue(report, "histogram weights do not sum to 1"));

  PriorTable good;
  good["sign"] = {"sign", HistogramHeight{{1.0, 2.0, 3.0}, {0.25, 0.75}}};
  EXPECT_TRUE(validate_priors(good).ok());
  EXPECT_DOUBLE_EQ(good["sign"].mean(), 0.25 * 1.5 + 0.75 * 2.5);
}

TEST(ValidateConfig, Defaults) {
  EXPECT_TRUE(validate_config(WorldConfig{}).ok());
  WorldConfig bad;
  bad.up_world = Vec3(0, 2, 0);
  bad.min_points_per_detection = 0;
  EXPECT_EQ(validate_config(bad).issues.size(), 2u);
}

TEST(Pose, ComposeInverseIsIdentity) {
  Pose p;
  p.rotation = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  p.translation = Vec3(1, -2, 5);
  const Pose q = p * p.inverse();
  EXPECT_TRUE(q.rotation.isApprox(Mat3::Identity(), 1e-12));
  EXPECT_LT(q.translation.norm(), 1e-12);
  EXPECT_TRUE(p.world_to_camera(p.transform(Vec3(4, 5, 6))).isApprox(Vec3(4, 5, 6), 1e-12));
}

TEST(Intrinsics, ProjectBackProjectRoundTrip) {
  const Vec3 p(1.0, -0.5, 4.0);
  const Vec2 px = kCam.project(p);
  EXPECT_TRUE((kCam.back_project(px) * p.z()).isApprox(p, 1e-12));
}
