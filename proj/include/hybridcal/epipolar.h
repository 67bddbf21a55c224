#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hybridcal/geometry.h"
#include "hybridcal/matching.h"

namespace hybridcal {

// Rank-2 matrix with x2^T F x1 = 0, stored with unit Frobenius norm and its
// largest-magnitude entry positive.
class FundamentalMatrix {
 public:
  // Enforces rank 2, unit norm and the sign convention.
  static FundamentalMatrix from_matrix(const Matrix3& m);

  const Matrix3& matrix() const { return f_; }
  FundamentalMatrix transposed() const { return from_matrix(f_.transpose()); }

 private:
  explicit FundamentalMatrix(const Matrix3& f) : f_(f) {}
  Matrix3 f_;
};

struct NormalizedPoints {
  std::vector<PixelPoint> points;
  Matrix3 transform;
};

// Hartley conditioning: centroid to the origin, mean distance sqrt(2).
// Throws Degenerate when fewer than two distinct points are given.
NormalizedPoints normalize_points(std::span<const PixelPoint> points);

// Normalized 8-point estimate from >= 8 undistorted correspondences.
// Throws TooFewPoints or Degenerate (design matrix rank < 8).
FundamentalMatrix eight_point(std::span<const Correspondence> corrs);

// K2^-T [t]x R K1^-1 for a transform mapping camera-1 coordinates into
// camera 2. Throws ZeroBaseline when ||t|| < 1e-12.
FundamentalMatrix fundamental_from_calibration(const Matrix3& K1,
                                               const Matrix3& K2,
                                               const RigidTransform& relative);

// First-order geometric error, in squared pixels. +inf for a zero gradient.
double sampson_distance(const Matrix3& F, const Correspondence& c);

struct RansacConfig {
  double threshold = 1.0;  // pixels; inliers have Sampson distance < t^2
  double confidence = 0.999;
  int max_iterations = 10000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RansacResult {
  FundamentalMatrix F;
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
  int iterations = 0;
};

// Seeded RANSAC over minimal 8-point samples. The sample for iteration k is
// derived from (seed, k) only. Throws NoConsensus when fewer than 8 inliers
// are found.
RansacResult ransac_fundamental(std::span<const Correspondence> corrs,
                                const RansacConfig& config);

struct PoseHypothesis {
  Matrix3 rotation;
  Vector3 translation;  // unit length
  // Points in front of both cameras, per candidate (R1,t) (R1,-t) (R2,t)
  // (R2,-t).
  std::array<std::size_t, 4> front_counts{};
  int winner = 0;

  RigidTransform transform() const { return {rotation, translation}; }
};

// The four essential decompositions, in the order used by recover_pose.
std::array<RigidTransform, 4> essential_candidates(const Matrix3& E);

// Essential decomposition with chirality selection. Correspondences are
// undistorted pixels. Throws ChiralityAmbiguous when the maximum front count
// is shared, and EmptyResult when no correspondence is given.
PoseHypothesis recover_pose(const FundamentalMatrix& F, const Matrix3& K1,
                            const Matrix3& K2,
                            std::span<const Correspondence> corrs);

// Line (a,b,c) in image 2 with a^2 + b^2 = 1. Throws DegenerateLine when x1
// is (numerically) the epipole.
Eigen::Vector3d epipolar_line(const Matrix3& F, const PixelPoint& x1);

double point_line_distance(const Eigen::Vector3d& line, const PixelPoint& p);

}  // namespace hybridcal
