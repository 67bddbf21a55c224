#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "hybridcal/geometry.h"
#include "hybridcal/matching.h"
#include "hybridcal/rig_network.h"

namespace hybridcal {

struct CameraTemplate {
  double focal = 909.0;  // pixels
  int width = 1624;
  int height = 1234;
  std::array<double, 3> kappa{0.0, 0.0, 0.0};

  CameraModel model() const;
};

enum class ScaleMode { kBaseline, kObject };

// Rigs stand on a circle around the scene center, adjacent rigs separated by
// `inter_rig_baseline`, each wide camera looking at the center up to a random
// jitter. The analysis camera sits `stereo_baseline` to the right of the
// wide camera and is toed in slightly.
struct SceneConfig {
  int rig_count = 2;
  bool close_loop = false;
  double inter_rig_baseline = 2000.0;  // mm
  double scene_distance = 3000.0;      // mm, circle radius
  double stereo_baseline = 60.0;       // mm
  double look_at_jitter = 2.0;         // degrees
  double point_extent = 1000.0;        // mm, half-size of the point cube
  CameraTemplate wide{909.0, 1624, 1234, {-0.08, 0.01, 0.0}};
  CameraTemplate analysis{2727.0, 1624, 1234, {0.02, 0.0, 0.0}};
  int points_per_pair = 200;
  int analysis_points = 60;
  double noise_sigma = 0.0;           // px, wide correspondences
  double analysis_noise_sigma = 0.0;  // px, analysis correspondences
  double outlier_fraction = 0.0;
  // Relative perturbation of fx, fy, cx, cy in the emitted network only.
  double intrinsics_perturbation = 0.0;
  ScaleMode scale_mode = ScaleMode::kBaseline;
  double object_length = 79.8;  // mm
  std::uint64_t seed = 1;

  // Throws InfeasibleConfig.
  void validate() const;
};

// The fixed desk scene: two rigs, 1624x1234 sensors, ~4 mm and ~12 mm
// equivalent focal lengths, 60 mm stereo baseline, 2 m between rigs, 200
// points.
SceneConfig reference_scene_config();

struct GroundTruth {
  RigNetwork network;  // exact intrinsics and rig extrinsics
  // World -> wide camera for every rig.
  std::map<RigId, RigidTransform> wide_world;
  // Root wide frame -> rig wide frame, i.e. the registration target.
  std::map<RigId, RigidTransform> wide_poses;
  // Root wide frame -> rig analysis frame.
  std::map<RigId, RigidTransform> analysis_poses;
  double scale = 1.0;
};

struct LinkObservations {
  RigId rig_i = 0;
  RigId rig_j = 0;
  std::vector<Correspondence> correspondences;
  std::vector<bool> outlier;
  std::vector<Vector3> points;  // world coordinates, one per correspondence
};

struct SyntheticScene {
  GroundTruth truth;
  // What a calibrator receives: possibly perturbed intrinsics, exact rig
  // extrinsics and a scale constraint per link.
  RigNetwork network;
  std::vector<LinkObservations> wide;      // one per network link
  std::vector<LinkObservations> analysis;  // held-out validation
};

SyntheticScene generate_scene(const SceneConfig& config);

// Geodesic rotation distance, angle between translation directions and
// relative translation length error. When the true translation is zero the
// direction error is 0 and the scale error is the recovered length.
struct TransformError {
  double rotation_deg = 0.0;
  double direction_deg = 0.0;
  double scale_error = 0.0;
};

TransformError compare_transforms(const RigidTransform& truth,
                                  const RigidTransform& recovered);

struct RigError {
  RigId id = 0;
  TransformError wide;
  TransformError analysis;
};

struct EvaluationReport {
  std::vector<RigError> rigs;
  std::optional<double> mean_reprojection_error;

  double max_rotation_deg() const;
  double max_direction_deg() const;
  double max_scale_error() const;
};

// Errors of recovered root-relative wide and analysis poses. Throws
// RigMismatch when the rig id sets differ.
EvaluationReport evaluate(const GroundTruth& truth,
                          const std::map<RigId, RigidTransform>& wide_poses,
                          const std::map<RigId, RigidTransform>& analysis_poses);

}  // namespace hybridcal
