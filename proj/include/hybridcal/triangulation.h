#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hybridcal/error.h"
#include "hybridcal/geometry.h"
#include "hybridcal/matching.h"

namespace hybridcal {

// P = K [R | t]. K and the pose are kept apart so that triangulation can
// work in K-normalized coordinates.
class ProjectionMatrix {
 public:
  // Throws InvalidCamera unless K is upper triangular with positive focal
  // entries and K(2,2) = 1, which makes det of the left 3x3 block positive.
  ProjectionMatrix(const Matrix3& K, const RigidTransform& pose);

  const Matrix3& K() const { return K_; }
  const RigidTransform& pose() const { return pose_; }
  Eigen::Matrix<double, 3, 4> matrix() const;

  NormalizedPoint normalize(const PixelPoint& p) const;

 private:
  Matrix3 K_;
  Matrix3 K_inv_;
  RigidTransform pose_;
};

// Linear DLT triangulation of undistorted pixels. Throws AtInfinity when the
// homogeneous solution has |w| < 1e-12 or the rays are parallel, and
// BehindCamera when either depth is not positive.
Vector3 triangulate_point(const ProjectionMatrix& p1,
                          const ProjectionMatrix& p2, const PixelPoint& x1,
                          const PixelPoint& x2);

// Same system expressed directly in normalized coordinates. Returns the
// homogeneous solution (unit norm) without any checks.
Eigen::Vector4d triangulate_homogeneous(const RigidTransform& pose1,
                                        const RigidTransform& pose2,
                                        const NormalizedPoint& n1,
                                        const NormalizedPoint& n2);

struct DroppedPoint {
  std::size_t source = 0;
  ErrorCode reason = ErrorCode::kAtInfinity;
};

struct TriangulatedSet {
  std::vector<Vector3> points;
  // Index of the generating correspondence for each point.
  std::vector<std::size_t> sources;
  std::vector<DroppedPoint> dropped;
};

// Triangulates every correspondence (undistorted pixels). `sources` labels
// them; when empty the labels are 0..n-1. Failing points are reported in
// `dropped`. Throws EmptyResult when no point survives.
TriangulatedSet triangulate_set(const ProjectionMatrix& p1,
                                const ProjectionMatrix& p2,
                                std::span<const Correspondence> corrs,
                                std::span<const std::size_t> sources = {});

struct Observation {
  std::size_t camera = 0;
  std::size_t point = 0;
  PixelPoint pixel;
};

struct View {
  CameraModel camera;
  RigidTransform pose;
};

// Mean Euclidean distance between project(view, point) and the measured
// pixel. Throws NoObservations on empty input, InvalidArgument on bad indices.
double mean_reprojection_error(std::span<const View> views,
                               std::span<const Vector3> points,
                               std::span<const Observation> observations);

}  // namespace hybridcal
