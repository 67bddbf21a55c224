#include "hybridcal/geometry.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "hybridcal/error.h"

namespace hybridcal {
namespace {

constexpr double kRotationTolerance = 1e-12;
constexpr double kDegPerRad = 180.0 / std::numbers::pi;
constexpr double kRadPerDeg = std::numbers::pi / 180.0;

void check_rotation(const Matrix3& r) {
  if (!r.allFinite()) {
    throw Error(ErrorCode::kInvalidRotation, "rotation has non-finite entries");
  }
  const double drift = orthonormality_error(r);
  const double det = r.determinant();
  if (drift >= kRotationTolerance || std::abs(det - 1.0) > kRotationTolerance) {
    std::ostringstream msg;
    msg << "rotation is not in SO(3) (drift " << drift << ", det " << det << ")";
    throw Error(ErrorCode::kInvalidRotation, msg.str());
  }
}

Matrix3 repair_if_drifted(const Matrix3& r) {
  if (orthonormality_error(r) > kRotationTolerance ||
      std::abs(r.determinant() - 1.0) > kRotationTolerance) {
    return nearest_rotation(r);
  }
  return r;
}

}  // namespace

RigidTransform::RigidTransform()
    : rotation_(Matrix3::Identity()), translation_(Vector3::Zero()) {}

RigidTransform::RigidTransform(const Matrix3& rotation,
                               const Vector3& translation)
    : rotation_(rotation), translation_(translation) {
  check_rotation(rotation_);
  if (!translation_.allFinite()) {
    throw Error(ErrorCode::kInvalidRotation, "translation is not finite");
  }
}

RigidTransform RigidTransform::from_approximate(const Matrix3& rotation,
                                                const Vector3& translation,
                                                double tolerance) {
  if (!rotation.allFinite() || orthonormality_error(rotation) > tolerance ||
      rotation.determinant() <= 0.0) {
    throw Error(ErrorCode::kInvalidRotation,
                "matrix is too far from a proper rotation");
  }
  return RigidTransform(repair_if_drifted(rotation), translation);
}

Eigen::Matrix<double, 3, 4> RigidTransform::matrix3x4() const {
  Eigen::Matrix<double, 3, 4> m;
  m.leftCols<3>() = rotation_;
  m.col(3) = translation_;
  return m;
}

Eigen::Matrix4d RigidTransform::matrix4x4() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topRows<3>() = matrix3x4();
  return m;
}

RigidTransform compose(const RigidTransform& outer,
                       const RigidTransform& inner) {
  const Matrix3 r = repair_if_drifted(outer.rotation() * inner.rotation());
  const Vector3 t = outer.rotation() * inner.translation() + outer.translation();
  return RigidTransform(r, t);
}

RigidTransform invert(const RigidTransform& transform) {
  const Matrix3 rt = transform.rotation().transpose();
  return RigidTransform(rt, -rt * transform.translation());
}

Vector3 camera_center(const RigidTransform& transform) {
  return -transform.rotation().transpose() * transform.translation();
}

Matrix3 nearest_rotation(const Matrix3& m) {
  Eigen::JacobiSVD<Matrix3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 d = Matrix3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0
                ? -1.0
                : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

double orthonormality_error(const Matrix3& r) {
  return (r.transpose() * r - Matrix3::Identity()).norm();
}

Matrix3 skew(const Vector3& v) {
  Matrix3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Matrix3 rotation_from_axis_angle(const Vector3& axis_angle) {
  const double angle = axis_angle.norm();
  if (angle < 1e-12) {
    // Second-order expansion keeps the result orthonormal to rounding.
    return nearest_rotation(Matrix3::Identity() + skew(axis_angle) +
                            0.5 * skew(axis_angle) * skew(axis_angle));
  }
  return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

Vector3 axis_angle_from_rotation(const Matrix3& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.angle() * aa.axis();
}

double rotation_angle_between(const Matrix3& a, const Matrix3& b) {
  const Matrix3 rel = a.transpose() * b;
  const Vector3 vee(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0),
                    rel(1, 0) - rel(0, 1));
  return std::atan2(0.5 * vee.norm(), 0.5 * (rel.trace() - 1.0));
}

double angle_between(const Vector3& a, const Vector3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

Matrix3 rotation_from_euler(const EulerAngles& angles) {
  const Eigen::AngleAxisd rx(angles.psi * kRadPerDeg, Vector3::UnitX());
  const Eigen::AngleAxisd ry(angles.theta * kRadPerDeg, Vector3::UnitY());
  const Eigen::AngleAxisd rz(angles.phi * kRadPerDeg, Vector3::UnitZ());
  return (rz * ry * rx).toRotationMatrix();
}

EulerDecomposition euler_from_rotation(const Matrix3& r) {
  EulerDecomposition out;
  const double cos_theta = std::hypot(r(0, 0), r(1, 0));
  double theta = std::atan2(-r(2, 0), cos_theta) * kDegPerRad;
  if (std::abs(std::abs(theta) - 90.0) <= 1e-9) {
    out.gimbal_lock = true;
    out.angles.psi = 0.0;
    out.angles.theta = theta > 0.0 ? 90.0 : -90.0;
    out.angles.phi = std::atan2(-r(0, 1), r(1, 1)) * kDegPerRad;
    return out;
  }
  out.angles.psi = std::atan2(r(2, 1), r(2, 2)) * kDegPerRad;
  out.angles.theta = theta;
  out.angles.phi = std::atan2(r(1, 0), r(0, 0)) * kDegPerRad;
  return out;
}

CameraModel::CameraModel(double fx, double fy, double cx, double cy,
                         const std::array<double, 3>& kappa, int width,
                         int height)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), kappa_(kappa), width_(width),
      height_(height) {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw Error(ErrorCode::kInvalidCamera, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidCamera, "resolution must be positive");
  }
  if (!(cx >= 0.0 && cx <= width && cy >= 0.0 && cy <= height)) {
    throw Error(ErrorCode::kInvalidCamera,
                "principal point lies outside the sensor");
  }
  for (double k : kappa) {
    if (!std::isfinite(k)) {
      throw Error(ErrorCode::kInvalidCamera, "distortion is not finite");
    }
  }
}

Matrix3 CameraModel::K() const {
  Matrix3 k;
  k << fx_, 0.0, cx_,
       0.0, fy_, cy_,
       0.0, 0.0, 1.0;
  return k;
}

bool CameraModel::in_bounds(const PixelPoint& p, double margin) const {
  return p.allFinite() && p.x() >= margin && p.y() >= margin &&
         p.x() <= width_ - margin && p.y() <= height_ - margin;
}

NormalizedPoint CameraModel::to_normalized(const PixelPoint& p) const {
  return {(p.x() - cx_) / fx_, (p.y() - cy_) / fy_};
}

PixelPoint CameraModel::to_pixel(const NormalizedPoint& n) const {
  return {fx_ * n.x() + cx_, fy_ * n.y() + cy_};
}

PixelPoint CameraModel::undistort_pixel(const PixelPoint& observed) const {
  if (!has_distortion()) return observed;
  return to_pixel(undistort(to_normalized(observed), kappa_));
}

NormalizedPoint distort(const NormalizedPoint& p,
                        const std::array<double, 3>& kappa) {
  const double r2 = p.squaredNorm();
  const double factor =
      1.0 + r2 * (kappa[0] + r2 * (kappa[1] + r2 * kappa[2]));
  return factor * p;
}

NormalizedPoint undistort(const NormalizedPoint& distorted,
                          const std::array<double, 3>& kappa) {
  constexpr int kMaxIterations = 50;
  constexpr double kStepTolerance = 1e-12;
  NormalizedPoint p = distorted;
  for (int i = 0; i < kMaxIterations; ++i) {
    const double r2 = p.squaredNorm();
    const double factor =
        1.0 + r2 * (kappa[0] + r2 * (kappa[1] + r2 * kappa[2]));
    const NormalizedPoint next = distorted / factor;
    const double step = (next - p).norm();
    p = next;
    if (!p.allFinite()) break;
    if (step < kStepTolerance) return p;
  }
  throw Error(ErrorCode::kNonConvergent,
              "undistortion did not converge; distortion is outside its "
              "monotonic range at this radius");
}

PixelPoint project(const CameraModel& camera, const RigidTransform& pose,
                   const Vector3& point) {
  const Vector3 pc = pose.apply(point);
  if (pc.z() <= 1e-12) {
    throw Error(ErrorCode::kBehindCamera, "point is not in front of camera");
  }
  const NormalizedPoint n(pc.x() / pc.z(), pc.y() / pc.z());
  return camera.to_pixel(distort(n, camera.kappa()));
}

}  // namespace hybridcal
