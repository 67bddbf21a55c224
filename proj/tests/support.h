#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "hybridcal/epipolar.h"
#include "hybridcal/geometry.h"
#include "hybridcal/triangulation.h"

namespace hybridcal::testing {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double sigma) {
    return std::normal_distribution<double>(0.0, sigma)(engine_);
  }
  Vector3 vector(double lo, double hi) {
    return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)};
  }
  Matrix3 rotation(double max_angle = kPi) {
    Vector3 axis = vector(-1.0, 1.0);
    while (axis.norm() < 1e-3) axis = vector(-1.0, 1.0);
    return rotation_from_axis_angle(axis.normalized() *
                                    uniform(0.0, max_angle));
  }
  RigidTransform transform(double max_angle = kPi, double extent = 5.0) {
    return {rotation(max_angle), vector(-extent, extent)};
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline CameraModel plain_camera(double f = 1000.0) {
  return CameraModel(f, f, 812.0, 617.0, {0.0, 0.0, 0.0}, 1624, 1234);
}

// Camera 1 at the origin looking down +z, camera 2 displaced and rotated a
// little, both seeing a cloud of points around (0, 0, depth).
struct TwoViewScene {
  CameraModel camera1;
  CameraModel camera2;
  RigidTransform relative;  // camera 1 -> camera 2
  std::vector<Vector3> points;
  std::vector<Correspondence> corrs;
};

inline TwoViewScene make_two_view(Rng& rng, std::size_t n, double depth = 10.0,
                                  double spread = 3.0) {
  TwoViewScene s;
  s.camera1 = plain_camera(1000.0);
  s.camera2 = CameraModel(900.0, 905.0, 800.0, 610.0, {0.0, 0.0, 0.0}, 1624,
                          1234);
  const Vector3 center = rng.vector(-1.0, 1.0) + Vector3(0.0, 0.0, 0.0);
  const Vector3 c2(rng.uniform(1.0, 3.0) * (rng.uniform(0, 1) < 0.5 ? -1 : 1),
                   rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
  // Look from c2 toward the cloud center with a small random roll.
  const Vector3 target(center.x() * 0.1, center.y() * 0.1, depth);
  const Vector3 z = (target - c2).normalized();
  Vector3 x = Vector3::UnitY().cross(z).normalized();
  const Vector3 y = z.cross(x);
  Matrix3 r;
  r.row(0) = x;
  r.row(1) = y;
  r.row(2) = z;
  r = rotation_from_axis_angle(z * rng.uniform(-0.1, 0.1)).transpose() * r;
  r = nearest_rotation(r);
  s.relative = RigidTransform(r, -r * c2);
  while (s.points.size() < n) {
    const Vector3 p(rng.uniform(-spread, spread), rng.uniform(-spread, spread),
                    depth + rng.uniform(-spread, spread));
    const Vector3 q = s.relative.apply(p);
    if (q.z() < 1.0 || p.z() < 1.0) continue;
    const PixelPoint x1 = project(s.camera1, RigidTransform(), p);
    const PixelPoint x2 = project(s.camera2, s.relative, p);
    if (!s.camera1.in_bounds(x1) || !s.camera2.in_bounds(x2)) continue;
    s.points.push_back(p);
    s.corrs.push_back({x1, x2});
  }
  return s;
}

inline double deg(double rad) { return rad / kDeg; }

}  // namespace hybridcal::testing
