#include "hybridcal/triangulation.h"

#include <cmath>

#include <Eigen/SVD>

namespace hybridcal {

ProjectionMatrix::ProjectionMatrix(const Matrix3& K, const RigidTransform& pose)
    : K_(K), pose_(pose) {
  if (!(K(0, 0) > 0.0) || !(K(1, 1) > 0.0) || K(1, 0) != 0.0 ||
      K(2, 0) != 0.0 || K(2, 1) != 0.0 || K(2, 2) != 1.0) {
    throw Error(ErrorCode::kInvalidCamera, "K must be upper triangular with "
                                           "positive focal lengths");
  }
  K_inv_ = K_.inverse();
}

Eigen::Matrix<double, 3, 4> ProjectionMatrix::matrix() const {
  return K_ * pose_.matrix3x4();
}

NormalizedPoint ProjectionMatrix::normalize(const PixelPoint& p) const {
  return (K_inv_ * p.homogeneous()).hnormalized();
}

Eigen::Vector4d triangulate_homogeneous(const RigidTransform& pose1,
                                        const RigidTransform& pose2,
                                        const NormalizedPoint& n1,
                                        const NormalizedPoint& n2) {
  const Eigen::Matrix<double, 3, 4> m1 = pose1.matrix3x4();
  const Eigen::Matrix<double, 3, 4> m2 = pose2.matrix3x4();
  Eigen::Matrix4d a;
  a.row(0) = n1.x() * m1.row(2) - m1.row(0);
  a.row(1) = n1.y() * m1.row(2) - m1.row(1);
  a.row(2) = n2.x() * m2.row(2) - m2.row(0);
  a.row(3) = n2.y() * m2.row(2) - m2.row(1);
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  return svd.matrixV().col(3);
}

Vector3 triangulate_point(const ProjectionMatrix& p1,
                          const ProjectionMatrix& p2, const PixelPoint& x1,
                          const PixelPoint& x2) {
  const NormalizedPoint n1 = p1.normalize(x1);
  const NormalizedPoint n2 = p2.normalize(x2);

  // Parallel rays leave a two-dimensional null space; the DLT solution is
  // then arbitrary.
  const Vector3 ray1 = p1.pose().rotation().transpose() * n1.homogeneous();
  const Vector3 ray2 = p2.pose().rotation().transpose() * n2.homogeneous();
  const Vector3 baseline = camera_center(p2.pose()) - camera_center(p1.pose());
  const double parallax = angle_between(ray1, ray2);
  if (parallax < 1e-12 || baseline.norm() < 1e-12 * (1.0 + ray1.norm())) {
    throw Error(ErrorCode::kAtInfinity, "rays are parallel");
  }

  const Eigen::Vector4d h =
      triangulate_homogeneous(p1.pose(), p2.pose(), n1, n2);
  if (std::abs(h(3)) < 1e-12 * h.norm()) {
    throw Error(ErrorCode::kAtInfinity, "point is at infinity");
  }
  const Vector3 x = h.hnormalized();
  if (p1.pose().apply(x).z() <= 0.0 || p2.pose().apply(x).z() <= 0.0) {
    throw Error(ErrorCode::kBehindCamera, "triangulated point is behind a "
                                          "camera");
  }
  return x;
}

TriangulatedSet triangulate_set(const ProjectionMatrix& p1,
                                const ProjectionMatrix& p2,
                                std::span<const Correspondence> corrs,
                                std::span<const std::size_t> sources) {
  if (!sources.empty() && sources.size() != corrs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "source label count mismatch");
  }
  TriangulatedSet out;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const std::size_t label = sources.empty() ? i : sources[i];
    try {
      out.points.push_back(triangulate_point(p1, p2, corrs[i].x1, corrs[i].x2));
      out.sources.push_back(label);
    } catch (const Error& e) {
      out.dropped.push_back({label, e.code()});
    }
  }
  if (out.points.empty()) {
    throw Error(ErrorCode::kEmptyResult, "no correspondence triangulated");
  }
  return out;
}

double mean_reprojection_error(std::span<const View> views,
                               std::span<const Vector3> points,
                               std::span<const Observation> observations) {
  if (observations.empty()) {
    throw Error(ErrorCode::kNoObservations, "no observations");
  }
  double sum = 0.0;
  for (const Observation& obs : observations) {
    if (obs.camera >= views.size() || obs.point >= points.size()) {
      throw Error(ErrorCode::kInvalidArgument, "observation index out of range");
    }
    const View& view = views[obs.camera];
    sum += (project(view.camera, view.pose, points[obs.point]) - obs.pixel)
               .norm();
  }
  return sum / static_cast<double>(observations.size());
}

}  // namespace hybridcal
