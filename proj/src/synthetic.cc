#include "hybridcal/synthetic.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "hybridcal/epipolar.h"
#include "hybridcal/error.h"

namespace hybridcal {
namespace {

constexpr double kRadPerDeg = std::numbers::pi / 180.0;
constexpr double kDegPerRad = 180.0 / std::numbers::pi;
constexpr double kBorderMargin = 10.0;     // px kept free around the sensor
constexpr double kOutlierClearance = 5.0;  // px from the true epipolar line
constexpr int kMaxAttemptsPerPoint = 20000;

// Portable variates on top of mt19937_64 so that scenes are byte-identical
// across standard library implementations.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(id),
                      static_cast<std::uint32_t>(id >> 32)};
    rng_.seed(seq);
  }

  double uniform() {  // [0, 1)
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    spare_ = radius * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return radius * std::cos(2.0 * std::numbers::pi * u2);
  }

  Vector3 unit_vector() {
    Vector3 v(normal(), normal(), normal());
    while (v.norm() < 1e-9) v = Vector3(normal(), normal(), normal());
    return v.normalized();
  }

  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

 private:
  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

RigidTransform look_at(const Vector3& center, const Vector3& target) {
  const Vector3 z = (target - center).normalized();
  const Vector3 x = Vector3::UnitY().cross(z).normalized();
  const Vector3 y = z.cross(x);
  Matrix3 r;
  r.row(0) = x;
  r.row(1) = y;
  r.row(2) = z;
  r = nearest_rotation(r);
  return RigidTransform(r, -r * center);
}

std::optional<PixelPoint> try_project(const CameraModel& camera,
                                      const RigidTransform& pose,
                                      const Vector3& x) {
  if (pose.apply(x).z() <= 1e-6) return std::nullopt;
  const PixelPoint p = project(camera, pose, x);
  if (!camera.in_bounds(p, kBorderMargin)) return std::nullopt;
  return p;
}

PixelPoint clamp_to_sensor(const CameraModel& camera, PixelPoint p) {
  p.x() = std::clamp(p.x(), 0.0, static_cast<double>(camera.width()));
  p.y() = std::clamp(p.y(), 0.0, static_cast<double>(camera.height()));
  return p;
}

struct CameraPose {
  CameraModel camera;
  RigidTransform world_to_camera;
};

Vector3 sample_in_cube(Stream& stream, double extent) {
  return {stream.uniform(-extent, extent), stream.uniform(-extent, extent),
          stream.uniform(-extent, extent)};
}

// Rejection-samples a world point visible in both views.
Vector3 sample_visible(Stream& stream, double extent, const CameraPose& a,
                       const CameraPose& b) {
  for (int attempt = 0; attempt < kMaxAttemptsPerPoint; ++attempt) {
    const Vector3 x = sample_in_cube(stream, extent);
    if (try_project(a.camera, a.world_to_camera, x) &&
        try_project(b.camera, b.world_to_camera, x)) {
      return x;
    }
  }
  throw Error(ErrorCode::kInfeasibleConfig,
              "could not place a point visible in both cameras");
}

LinkObservations render_link(Stream& stream, RigId rig_i, RigId rig_j,
                             const CameraPose& a, const CameraPose& b,
                             const std::vector<Vector3>& points, double sigma,
                             std::size_t outlier_count,
                             std::size_t protected_prefix) {
  LinkObservations link;
  link.rig_i = rig_i;
  link.rig_j = rig_j;
  link.points = points;
  link.outlier.assign(points.size(), false);
  for (const Vector3& x : points) {
    PixelPoint x1 = project(a.camera, a.world_to_camera, x);
    PixelPoint x2 = project(b.camera, b.world_to_camera, x);
    if (sigma > 0.0) {
      x1 += sigma * PixelPoint(stream.normal(), stream.normal());
      x2 += sigma * PixelPoint(stream.normal(), stream.normal());
    }
    link.correspondences.push_back(
        {clamp_to_sensor(a.camera, x1), clamp_to_sensor(b.camera, x2)});
  }
  if (outlier_count == 0) return link;

  // Partial Fisher-Yates over the unprotected indices.
  std::vector<std::size_t> pool;
  for (std::size_t k = protected_prefix; k < points.size(); ++k) {
    pool.push_back(k);
  }
  outlier_count = std::min(outlier_count, pool.size());
  const RigidTransform relative =
      compose(b.world_to_camera, invert(a.world_to_camera));
  const Matrix3 f =
      fundamental_from_calibration(a.camera.K(), b.camera.K(), relative)
          .matrix();
  for (std::size_t n = 0; n < outlier_count; ++n) {
    const std::size_t pick = n + stream.index(pool.size() - n);
    std::swap(pool[n], pool[pick]);
    const std::size_t k = pool[n];
    const PixelPoint ideal1 =
        a.camera.undistort_pixel(link.correspondences[k].x1);
    for (int attempt = 0;; ++attempt) {
      if (attempt > kMaxAttemptsPerPoint) {
        throw Error(ErrorCode::kInfeasibleConfig,
                    "could not place an outlier away from the epipolar line");
      }
      const PixelPoint candidate(
          stream.uniform(kBorderMargin, b.camera.width() - kBorderMargin),
          stream.uniform(kBorderMargin, b.camera.height() - kBorderMargin));
      // Sampson distance never exceeds the image-2 line distance, so this
      // keeps the outlier clear under either measure.
      const double d = std::sqrt(sampson_distance(
          f, {ideal1, b.camera.undistort_pixel(candidate)}));
      if (d >= kOutlierClearance) {
        link.correspondences[k].x2 = candidate;
        link.outlier[k] = true;
        break;
      }
    }
  }
  return link;
}

CameraModel perturb(const CameraModel& c, double amount, Stream& stream) {
  if (amount == 0.0) return c;
  const auto factor = [&] { return 1.0 + stream.uniform(-amount, amount); };
  const double fx = c.fx() * factor();
  const double fy = c.fy() * factor();
  const double cx = c.cx() * factor();
  const double cy = c.cy() * factor();
  return CameraModel(fx, fy, cx, cy, c.kappa(), c.width(), c.height());
}

}  // namespace

CameraModel CameraTemplate::model() const {
  return CameraModel(focal, focal, 0.5 * width, 0.5 * height, kappa, width,
                     height);
}

void SceneConfig::validate() const {
  const auto fail = [](const char* what) {
    throw Error(ErrorCode::kInfeasibleConfig, what);
  };
  if (rig_count < 2) fail("rig_count must be at least 2");
  if (!(noise_sigma >= 0.0) || !(analysis_noise_sigma >= 0.0)) {
    fail("noise sigma must be non-negative");
  }
  if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0)) {
    fail("outlier_fraction must lie in [0, 1)");
  }
  if (points_per_pair < 8) fail("points_per_pair must be at least 8");
  if (analysis_points < 0) fail("analysis_points must be non-negative");
  if (!(inter_rig_baseline > 0.0) || !(scene_distance > 0.0) ||
      !(stereo_baseline > 0.0) || !(point_extent > 0.0)) {
    fail("lengths must be positive");
  }
  if (inter_rig_baseline >= 2.0 * scene_distance) {
    fail("inter_rig_baseline must be shorter than the circle diameter");
  }
  if (!(look_at_jitter >= 0.0)) fail("look_at_jitter must be non-negative");
  if (!(intrinsics_perturbation >= 0.0 && intrinsics_perturbation < 0.5)) {
    fail("intrinsics_perturbation must lie in [0, 0.5)");
  }
  if (!(object_length > 0.0)) fail("object_length must be positive");
  if (scale_mode == ScaleMode::kObject && points_per_pair < 10) {
    fail("object scale mode needs at least 10 points per pair");
  }
  if (static_cast<double>(points_per_pair) * (1.0 - outlier_fraction) < 8.0) {
    fail("fewer than 8 inliers per pair");
  }
}

SceneConfig reference_scene_config() { return SceneConfig{}; }

SyntheticScene generate_scene(const SceneConfig& config) {
  try {
    config.validate();
    config.wide.model();
    config.analysis.model();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInfeasibleConfig) throw;
    throw Error(ErrorCode::kInfeasibleConfig, e.what());
  }

  SyntheticScene scene;
  Stream layout(config.seed, 0);
  Stream perturbation(config.seed, 1);

  const double step =
      2.0 * std::asin(config.inter_rig_baseline / (2.0 * config.scene_distance));
  const CameraModel wide = config.wide.model();
  const CameraModel analysis = config.analysis.model();
  const Matrix3 toe_in =
      rotation_from_axis_angle(Vector3::UnitY() *
                               std::atan2(config.stereo_baseline,
                                          config.scene_distance));
  const RigidTransform rig_extrinsic(
      toe_in, -toe_in * Vector3(config.stereo_baseline, 0.0, 0.0));

  std::vector<CameraPose> wide_views;
  std::vector<CameraPose> analysis_views;
  for (int k = 0; k < config.rig_count; ++k) {
    const RigId id = k + 1;
    const double angle = (k - 0.5 * (config.rig_count - 1)) * step;
    const Vector3 center(config.scene_distance * std::sin(angle), 0.0,
                         -config.scene_distance * std::cos(angle));
    RigidTransform pose = look_at(center, Vector3::Zero());
    if (config.look_at_jitter > 0.0) {
      const Vector3 axis = layout.unit_vector();
      const double jitter =
          layout.uniform(-config.look_at_jitter, config.look_at_jitter);
      pose = compose(RigidTransform(
                         rotation_from_axis_angle(axis * jitter * kRadPerDeg),
                         Vector3::Zero()),
                     pose);
    }
    scene.truth.network.rigs.push_back({id, wide, analysis, rig_extrinsic});
    scene.truth.wide_world.emplace(id, pose);
    wide_views.push_back({wide, pose});
    analysis_views.push_back({analysis, compose(rig_extrinsic, pose)});
  }

  // Every point of the cube must be in front of every wide camera.
  for (const CameraPose& view : wide_views) {
    for (int corner = 0; corner < 8; ++corner) {
      const Vector3 x((corner & 1 ? 1 : -1) * config.point_extent,
                      (corner & 2 ? 1 : -1) * config.point_extent,
                      (corner & 4 ? 1 : -1) * config.point_extent);
      if (view.world_to_camera.apply(x).z() <= 0.0) {
        throw Error(ErrorCode::kInfeasibleConfig,
                    "point extent reaches behind a wide camera");
      }
    }
  }

  const RigId root = 1;
  const RigidTransform root_inv = invert(scene.truth.wide_world.at(root));
  for (const auto& [id, pose] : scene.truth.wide_world) {
    const RigidTransform relative = compose(pose, root_inv);
    scene.truth.wide_poses.emplace(id, relative);
    scene.truth.analysis_poses.emplace(id, compose(rig_extrinsic, relative));
  }

  std::vector<std::pair<int, int>> links;
  for (int k = 0; k + 1 < config.rig_count; ++k) links.emplace_back(k, k + 1);
  if (config.close_loop && config.rig_count >= 3) {
    links.emplace_back(config.rig_count - 1, 0);
  }

  const std::size_t outliers = static_cast<std::size_t>(
      std::lround(config.outlier_fraction * config.points_per_pair));
  for (std::size_t l = 0; l < links.size(); ++l) {
    const auto [a, b] = links[l];
    const RigId id_a = a + 1;
    const RigId id_b = b + 1;
    Stream points_stream(config.seed, 2 + 2 * l);
    Stream analysis_stream(config.seed, 3 + 2 * l);

    std::vector<Vector3> points;
    std::size_t protected_prefix = 0;
    if (config.scale_mode == ScaleMode::kObject) {
      for (int attempt = 0;; ++attempt) {
        if (attempt > kMaxAttemptsPerPoint) {
          throw Error(ErrorCode::kInfeasibleConfig,
                      "could not place the known-size object");
        }
        const Vector3 end_a = sample_visible(points_stream, config.point_extent,
                                             wide_views[a], wide_views[b]);
        const Vector3 end_b =
            end_a + config.object_length * points_stream.unit_vector();
        if (try_project(wide, wide_views[a].world_to_camera, end_b) &&
            try_project(wide, wide_views[b].world_to_camera, end_b)) {
          points.push_back(end_a);
          points.push_back(end_b);
          break;
        }
      }
      protected_prefix = 2;
    }
    while (points.size() < static_cast<std::size_t>(config.points_per_pair)) {
      points.push_back(sample_visible(points_stream, config.point_extent,
                                      wide_views[a], wide_views[b]));
    }
    scene.wide.push_back(render_link(points_stream, id_a, id_b, wide_views[a],
                                     wide_views[b], points, config.noise_sigma,
                                     outliers, protected_prefix));

    std::vector<Vector3> analysis_points;
    while (analysis_points.size() <
           static_cast<std::size_t>(config.analysis_points)) {
      analysis_points.push_back(sample_visible(analysis_stream,
                                               config.point_extent,
                                               analysis_views[a],
                                               analysis_views[b]));
    }
    scene.analysis.push_back(render_link(
        analysis_stream, id_a, id_b, analysis_views[a], analysis_views[b],
        analysis_points, config.analysis_noise_sigma, 0, 0));

    RigLink link{id_a, id_b, std::nullopt};
    if (config.scale_mode == ScaleMode::kObject) {
      link.scale = KnownObject{0, 1, config.object_length};
    } else {
      link.scale = MeasuredBaseline{
          (camera_center(wide_views[a].world_to_camera) -
           camera_center(wide_views[b].world_to_camera))
              .norm()};
    }
    scene.truth.network.links.push_back(link);
  }

  scene.network = scene.truth.network;
  for (HybridRig& rig : scene.network.rigs) {
    rig.wide = perturb(rig.wide, config.intrinsics_perturbation, perturbation);
    rig.analysis =
        perturb(rig.analysis, config.intrinsics_perturbation, perturbation);
  }
  return scene;
}

TransformError compare_transforms(const RigidTransform& truth,
                                  const RigidTransform& recovered) {
  TransformError e;
  e.rotation_deg =
      rotation_angle_between(truth.rotation(), recovered.rotation()) *
      kDegPerRad;
  const double true_length = truth.translation().norm();
  const double recovered_length = recovered.translation().norm();
  if (true_length < 1e-9) {
    e.direction_deg = 0.0;
    e.scale_error = recovered_length;
  } else {
    e.direction_deg =
        angle_between(truth.translation(), recovered.translation()) *
        kDegPerRad;
    e.scale_error = std::abs(recovered_length / true_length - 1.0);
  }
  return e;
}

EvaluationReport evaluate(const GroundTruth& truth,
                          const std::map<RigId, RigidTransform>& wide_poses,
                          const std::map<RigId, RigidTransform>& analysis_poses) {
  const auto keys = [](const std::map<RigId, RigidTransform>& m) {
    std::set<RigId> out;
    for (const auto& [id, pose] : m) out.insert(id);
    return out;
  };
  if (keys(truth.wide_poses) != keys(wide_poses) ||
      keys(truth.analysis_poses) != keys(analysis_poses)) {
    throw Error(ErrorCode::kRigMismatch,
                "recovered rig ids differ from the ground truth");
  }
  EvaluationReport report;
  for (const auto& [id, true_wide] : truth.wide_poses) {
    RigError rig;
    rig.id = id;
    rig.wide = compare_transforms(true_wide, wide_poses.at(id));
    rig.analysis = compare_transforms(truth.analysis_poses.at(id),
                                      analysis_poses.at(id));
    report.rigs.push_back(rig);
  }
  return report;
}

double EvaluationReport::max_rotation_deg() const {
  double m = 0.0;
  for (const RigError& r : rigs) {
    m = std::max({m, r.wide.rotation_deg, r.analysis.rotation_deg});
  }
  return m;
}

double EvaluationReport::max_direction_deg() const {
  double m = 0.0;
  for (const RigError& r : rigs) {
    m = std::max({m, r.wide.direction_deg, r.analysis.direction_deg});
  }
  return m;
}

double EvaluationReport::max_scale_error() const {
  double m = 0.0;
  for (const RigError& r : rigs) {
    m = std::max({m, r.wide.scale_error, r.analysis.scale_error});
  }
  return m;
}

}  // namespace hybridcal
