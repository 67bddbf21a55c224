#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace hybridcal {

using PixelPoint = Eigen::Vector2d;
using NormalizedPoint = Eigen::Vector2d;
using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;

// Rigid transform in SE(3). Maps a point from a source frame into a target
// frame: x_target = rotation * x_source + translation. Translations are in
// scene length units (millimeters by convention).
class RigidTransform {
 public:
  // Identity.
  RigidTransform();

  // Throws InvalidRotation unless ||R^T R - I||_F < 1e-12 and det(R) = 1.
  RigidTransform(const Matrix3& rotation, const Vector3& translation);

  // Projects a nearly orthonormal matrix onto SO(3) before construction.
  // Throws InvalidRotation when the input drifts by more than `tolerance`
  // (Frobenius) or is a reflection.
  static RigidTransform from_approximate(const Matrix3& rotation,
                                         const Vector3& translation,
                                         double tolerance = 1e-6);

  const Matrix3& rotation() const { return rotation_; }
  const Vector3& translation() const { return translation_; }

  Vector3 apply(const Vector3& x) const {
    return rotation_ * x + translation_;
  }

  Eigen::Matrix<double, 3, 4> matrix3x4() const;
  Eigen::Matrix4d matrix4x4() const;

 private:
  Matrix3 rotation_;
  Vector3 translation_;
};

// Returns outer * inner, i.e. E^{CA} = E^{CB} E^{BA}.
RigidTransform compose(const RigidTransform& outer, const RigidTransform& inner);
RigidTransform invert(const RigidTransform& transform);

// Optical center in source-frame coordinates, -R^T t.
Vector3 camera_center(const RigidTransform& transform);

// Nearest rotation in the Frobenius sense (polar decomposition via SVD).
Matrix3 nearest_rotation(const Matrix3& m);

double orthonormality_error(const Matrix3& r);

Matrix3 skew(const Vector3& v);

// Rodrigues formula and its inverse.
Matrix3 rotation_from_axis_angle(const Vector3& axis_angle);
Vector3 axis_angle_from_rotation(const Matrix3& rotation);

// Geodesic distance between two rotations in radians. Stable near zero.
double rotation_angle_between(const Matrix3& a, const Matrix3& b);

// Angle between two vectors in radians, via atan2 for small-angle accuracy.
double angle_between(const Vector3& a, const Vector3& b);

// Z-Y-X extrinsic Euler angles in degrees: R = Rz(phi) Ry(theta) Rx(psi).
struct EulerAngles {
  double psi = 0.0;
  double theta = 0.0;
  double phi = 0.0;
};

struct EulerDecomposition {
  EulerAngles angles;
  // Set when |theta| is within 1e-9 degrees of 90; psi is then pinned to 0.
  bool gimbal_lock = false;
};

Matrix3 rotation_from_euler(const EulerAngles& angles);
EulerDecomposition euler_from_rotation(const Matrix3& rotation);

// Pinhole intrinsics with zero skew plus three radial distortion terms that
// act on normalized image coordinates.
class CameraModel {
 public:
  CameraModel() = default;

  // Throws InvalidCamera on non-positive focal lengths, a principal point
  // outside the sensor or a non-positive resolution.
  CameraModel(double fx, double fy, double cx, double cy,
              const std::array<double, 3>& kappa, int width, int height);

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  const std::array<double, 3>& kappa() const { return kappa_; }
  int width() const { return width_; }
  int height() const { return height_; }

  Matrix3 K() const;

  bool has_distortion() const {
    return kappa_[0] != 0.0 || kappa_[1] != 0.0 || kappa_[2] != 0.0;
  }

  bool in_bounds(const PixelPoint& p, double margin = 0.0) const;

  // Pixel <-> normalized coordinates through K only.
  NormalizedPoint to_normalized(const PixelPoint& p) const;
  PixelPoint to_pixel(const NormalizedPoint& n) const;

  // Removes radial distortion from an observed pixel and returns the ideal
  // pinhole pixel under the same K.
  PixelPoint undistort_pixel(const PixelPoint& observed) const;

 private:
  double fx_ = 1.0;
  double fy_ = 1.0;
  double cx_ = 0.0;
  double cy_ = 0.0;
  std::array<double, 3> kappa_{0.0, 0.0, 0.0};
  int width_ = 1;
  int height_ = 1;
};

NormalizedPoint distort(const NormalizedPoint& p,
                        const std::array<double, 3>& kappa);

// Fixed-point inversion of distort(). Throws NonConvergent after 50 sweeps.
NormalizedPoint undistort(const NormalizedPoint& distorted,
                          const std::array<double, 3>& kappa);

// K * distort(perspective division of pose(X)). Throws BehindCamera when the
// camera-frame depth is <= 1e-12.
PixelPoint project(const CameraModel& camera, const RigidTransform& pose,
                   const Vector3& point);

}  // namespace hybridcal
