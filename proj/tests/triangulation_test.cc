#include <gtest/gtest.h>

#include "hybridcal/error.h"
#include "hybridcal/triangulation.h"
#include "support.h"

namespace hybridcal {
namespace {

using testing::make_two_view;
using testing::Rng;
using testing::TwoViewScene;

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kInvalidArgument;
}

// Pinhole image of X regardless of the sign of its depth.
PixelPoint mirror_project(const Matrix3& K, const RigidTransform& pose,
                          const Vector3& x) {
  return (K * pose.apply(x)).hnormalized();
}

TEST(ProjectionMatrix, RejectsBadIntrinsics) {
  Matrix3 k = Matrix3::Identity();
  k(1, 0) = 0.5;
  EXPECT_EQ(code_of([&] { ProjectionMatrix(k, RigidTransform()); }),
            ErrorCode::kInvalidCamera);
  k = Matrix3::Identity();
  k(0, 0) = -1.0;
  EXPECT_EQ(code_of([&] { ProjectionMatrix(k, RigidTransform()); }),
            ErrorCode::kInvalidCamera);
}

TEST(ProjectionMatrix, MatrixIsKTimesPose) {
  Rng rng(1);
  const RigidTransform pose = rng.transform();
  const Matrix3 k = testing::plain_camera().K();
  const ProjectionMatrix p(k, pose);
  EXPECT_LT((p.matrix() - k * pose.matrix3x4()).norm(), 1e-12);
}

TEST(TriangulatePoint, RecoversKnownPoint) {
  const CameraModel c = testing::plain_camera();
  const RigidTransform pose2(rotation_from_axis_angle(Vector3(0, 0.1, 0)),
                             Vector3(-0.5, 0.02, 0.01));
  const Vector3 x(0.3, -0.2, 4.0);
  const ProjectionMatrix p1(c.K(), RigidTransform());
  const ProjectionMatrix p2(c.K(), pose2);
  const Vector3 got = triangulate_point(
      p1, p2, project(c, RigidTransform(), x), project(c, pose2, x));
  EXPECT_LT((got - x).norm() / x.norm(), 1e-8);
}

TEST(TriangulatePoint, ZeroBaselineIsAtInfinity) {
  const CameraModel c = testing::plain_camera();
  const ProjectionMatrix p(c.K(), RigidTransform());
  const PixelPoint x = project(c, RigidTransform(), {0.3, -0.2, 4.0});
  EXPECT_EQ(code_of([&] { triangulate_point(p, p, x, x); }),
            ErrorCode::kAtInfinity);
}

TEST(TriangulatePoint, ParallelRaysAreAtInfinity) {
  const CameraModel c = testing::plain_camera();
  const RigidTransform pose2(Matrix3::Identity(), Vector3(-1, 0, 0));
  const ProjectionMatrix p1(c.K(), RigidTransform());
  const ProjectionMatrix p2(c.K(), pose2);
  const PixelPoint x(900, 600);
  EXPECT_EQ(code_of([&] { triangulate_point(p1, p2, x, x); }),
            ErrorCode::kAtInfinity);
}

TEST(TriangulatePoint, BehindCamera) {
  const CameraModel c = testing::plain_camera();
  const RigidTransform pose2(Matrix3::Identity(), Vector3(-1, 0, 0));
  const Vector3 x(0.2, 0.1, -5.0);
  const ProjectionMatrix p1(c.K(), RigidTransform());
  const ProjectionMatrix p2(c.K(), pose2);
  EXPECT_EQ(code_of([&] {
              triangulate_point(p1, p2,
                                mirror_project(c.K(), RigidTransform(), x),
                                mirror_project(c.K(), pose2, x));
            }),
            ErrorCode::kBehindCamera);
}

TEST(TriangulatePoint, NoiseMatchesFirstOrderPropagation) {
  // Rectified pair: depth error is Z^2 / (f b) times the disparity error,
  // which carries sqrt(2) px for 1 px noise on both images.
  const double f = 1000.0;
  const double b = 0.5;
  const double z = 4.0;
  const CameraModel c(f, f, 812, 617, {0, 0, 0}, 1624, 1234);
  const RigidTransform pose2(Matrix3::Identity(), Vector3(-b, 0, 0));
  const ProjectionMatrix p1(c.K(), RigidTransform());
  const ProjectionMatrix p2(c.K(), pose2);
  Rng rng(2);
  const int trials = 4000;
  double sum_sq = 0.0;
  for (int k = 0; k < trials; ++k) {
    const Vector3 x(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), z);
    const PixelPoint x1 = project(c, RigidTransform(), x) +
                          PixelPoint(rng.normal(1.0), rng.normal(1.0));
    const PixelPoint x2 =
        project(c, pose2, x) + PixelPoint(rng.normal(1.0), rng.normal(1.0));
    sum_sq += (triangulate_point(p1, p2, x1, x2) - x).squaredNorm();
  }
  const double empirical = std::sqrt(sum_sq / trials);
  const double analytic = z * z / (f * b) * std::sqrt(2.0);
  EXPECT_LT(empirical, 3.0 * analytic);
  EXPECT_GT(empirical, analytic / 3.0);
}

TEST(TriangulateSet, NoiselessInliers) {
  Rng rng(3);
  const TwoViewScene s = make_two_view(rng, 50);
  const ProjectionMatrix p1(s.camera1.K(), RigidTransform());
  const ProjectionMatrix p2(s.camera2.K(), s.relative);
  const TriangulatedSet set = triangulate_set(p1, p2, s.corrs);
  ASSERT_EQ(set.points.size(), 50u);
  EXPECT_TRUE(set.dropped.empty());
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(set.sources[i], i);
    EXPECT_LT((set.points[i] - s.points[i]).norm(), 1e-8);
  }
}

TEST(TriangulateSet, EmptyInput) {
  const CameraModel c = testing::plain_camera();
  const ProjectionMatrix p(c.K(), RigidTransform());
  EXPECT_EQ(code_of([&] { triangulate_set(p, p, {}); }),
            ErrorCode::kEmptyResult);
}

TEST(TriangulateSet, ReportsBehindCameraDrop) {
  Rng rng(4);
  TwoViewScene s = make_two_view(rng, 20);
  const Vector3 behind(0.1, 0.2, -6.0);
  s.corrs[7] = {mirror_project(s.camera1.K(), RigidTransform(), behind),
                mirror_project(s.camera2.K(), s.relative, behind)};
  const ProjectionMatrix p1(s.camera1.K(), RigidTransform());
  const ProjectionMatrix p2(s.camera2.K(), s.relative);
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 20; ++i) labels.push_back(100 + i);
  const TriangulatedSet set = triangulate_set(p1, p2, s.corrs, labels);
  EXPECT_EQ(set.points.size(), 19u);
  ASSERT_EQ(set.dropped.size(), 1u);
  EXPECT_EQ(set.dropped[0].source, 107u);
  EXPECT_EQ(set.dropped[0].reason, ErrorCode::kBehindCamera);
}

TEST(MeanReprojectionError, ExactObservationsAreZero) {
  Rng rng(5);
  const TwoViewScene s = make_two_view(rng, 30);
  const std::vector<View> views{{s.camera1, RigidTransform()},
                                {s.camera2, s.relative}};
  std::vector<Observation> obs;
  for (std::size_t i = 0; i < 30; ++i) {
    obs.push_back({0, i, s.corrs[i].x1});
    obs.push_back({1, i, s.corrs[i].x2});
  }
  EXPECT_LT(mean_reprojection_error(views, s.points, obs), 1e-10);
}

TEST(MeanReprojectionError, ThreeFourFive) {
  const CameraModel c = testing::plain_camera();
  const std::vector<View> views{{c, RigidTransform()}};
  const std::vector<Vector3> pts{{0.1, 0.1, 3.0}};
  const std::vector<Observation> obs{
      {0, 0, project(c, RigidTransform(), pts[0]) + PixelPoint(3, 4)}};
  EXPECT_NEAR(mean_reprojection_error(views, pts, obs), 5.0, 1e-12);
}

TEST(MeanReprojectionError, MatchesLoopOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const TwoViewScene s = make_two_view(rng, 25);
    const std::vector<View> views{{s.camera1, RigidTransform()},
                                  {s.camera2, s.relative}};
    std::vector<Observation> obs;
    double total = 0.0;
    for (std::size_t i = 0; i < 25; ++i) {
      for (std::size_t cam = 0; cam < 2; ++cam) {
        const PixelPoint px =
            (cam == 0 ? s.corrs[i].x1 : s.corrs[i].x2) +
            PixelPoint(rng.normal(1.0), rng.normal(1.0));
        obs.push_back({cam, i, px});
        // Independent projection: K (X_cam / Z).
        const Vector3 xc = views[cam].pose.apply(s.points[i]);
        const PixelPoint ideal = (views[cam].camera.K() * xc).hnormalized();
        total += (ideal - px).norm();
      }
    }
    EXPECT_NEAR(mean_reprojection_error(views, s.points, obs), total / 50.0,
                1e-12);
  }
}

TEST(MeanReprojectionError, NoObservations) {
  EXPECT_EQ(code_of([] { mean_reprojection_error({}, {}, {}); }),
            ErrorCode::kNoObservations);
}

}  // namespace
}  // namespace hybridcal
