#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "hybridcal/bundle_adjust.h"
#include "hybridcal/epipolar.h"
#include "hybridcal/geometry.h"
#include "hybridcal/matching.h"
#include "hybridcal/triangulation.h"

namespace hybridcal {

using RigId = int;

// A wide-FOV registration camera and a long-focal analysis camera on one
// rigid mount. `rig_extrinsic` maps wide-camera coordinates into
// analysis-camera coordinates.
struct HybridRig {
  RigId id = 0;
  CameraModel wide;
  CameraModel analysis;
  RigidTransform rig_extrinsic;
};

// Two triangulated points of known separation. Indices refer to positions in
// the pair's correspondence list.
struct KnownObject {
  std::size_t point_a = 0;
  std::size_t point_b = 0;
  double length = 0.0;  // mm
};

// Measured distance between the two wide-camera centers.
struct MeasuredBaseline {
  double distance = 0.0;  // mm
};

using ScaleConstraint = std::variant<KnownObject, MeasuredBaseline>;

struct RigLink {
  RigId rig_i = 0;
  RigId rig_j = 0;
  std::optional<ScaleConstraint> scale;
};

struct RigNetwork {
  std::vector<HybridRig> rigs;
  std::vector<RigLink> links;

  // Throws SchemaError on duplicate ids or links to unknown rigs.
  void validate() const;
  const HybridRig& rig(RigId id) const;
  // Smallest rig id; its wide camera defines the reference frame.
  RigId root() const;
  bool connected() const;
};

enum class ScaleStatus { kUnitGauge, kMetric };

// Relative pose between two cameras plus the structure it explains. The pose
// maps camera-i coordinates into camera-j coordinates; points live in the
// camera-i frame.
struct PairEstimate {
  RigId rig_i = 0;
  RigId rig_j = 0;
  CameraModel camera_i;
  CameraModel camera_j;
  RigidTransform relative;
  std::vector<Vector3> points;
  // Correspondence index of every point and its raw (distorted) pixels.
  std::vector<std::size_t> sources;
  std::vector<Correspondence> observations;
  std::vector<bool> inliers;
  std::vector<DroppedPoint> dropped;
  ScaleStatus status = ScaleStatus::kUnitGauge;
  std::optional<ScaleConstraint> constraint;
  std::optional<BaReport> refinement;

  BaProblem to_problem() const;
  double mean_reprojection_error() const;
};

// RANSAC fundamental -> chirality pose -> linear triangulation between two
// arbitrary cameras. Correspondences are raw pixels. The result is in the
// unit-translation gauge.
PairEstimate estimate_relative_pose(const CameraModel& camera_i,
                                    const CameraModel& camera_j,
                                    std::span<const Correspondence> corrs,
                                    const RansacConfig& ransac);

PairEstimate estimate_pair_pose(const HybridRig& rig_i, const HybridRig& rig_j,
                                std::span<const Correspondence> corrs,
                                const RansacConfig& ransac);

// Similarity rescale that makes the estimate satisfy the constraint. Throws
// DegenerateConstraint when the current length is below 1e-9 or a referenced
// point was not triangulated.
PairEstimate enforce_scale(const PairEstimate& estimate,
                           const ScaleConstraint& constraint);

// Pairwise bundle adjustment with camera i fixed at the origin and the
// baseline held at unit length; a metric estimate is rescaled back through
// its constraint afterwards.
PairEstimate refine_pair(const PairEstimate& estimate,
                         const SolverConfig& config);

struct CycleDiscrepancy {
  RigId rig_i = 0;
  RigId rig_j = 0;
  double rotation_deg = 0.0;
  double translation_mm = 0.0;
};

struct Registration {
  // Rig id -> transform from the root wide camera frame into the rig's wide
  // camera frame.
  std::map<RigId, RigidTransform> wide_poses;
  // One entry per edge not used by the spanning tree.
  std::vector<CycleDiscrepancy> cycles;
};

// Breadth-first spanning tree from the root with ascending-id tie-break.
// Throws DisconnectedNetwork or MixedScale.
Registration register_network(const RigNetwork& network,
                              std::span<const PairEstimate> estimates);

// Loop-closure residual of every estimate against registered poses.
std::vector<CycleDiscrepancy> edge_discrepancies(
    const std::map<RigId, RigidTransform>& wide_poses,
    std::span<const PairEstimate> estimates);

// E_i^s = E_i^{sl} E_i^l, the analysis camera pose in the reference frame.
RigidTransform analysis_camera_pose(const RigNetwork& network,
                                    const Registration& registration, RigId i);

// E_ji^s = E_j^{sl} E_j^l (E_i^{sl} E_i^l)^-1. Throws UnknownRig.
RigidTransform analysis_pose(RigId i, RigId j, const RigNetwork& network,
                             const Registration& registration);

struct GlobalRefinement {
  Registration registration;
  BaReport report;
};

// Joint bundle adjustment over every wide camera and every pair's points
// (kept disjoint). The root is fixed and the root-to-second-rig baseline
// length is frozen. Needs at least three registered rigs.
GlobalRefinement global_refine(const RigNetwork& network,
                               const Registration& registration,
                               std::span<const PairEstimate> estimates,
                               const SolverConfig& config);

// Joint cost of all pair point sets under registered poses, the starting
// cost of global_refine.
double joint_cost(const RigNetwork& network,
                  const std::map<RigId, RigidTransform>& wide_poses,
                  std::span<const PairEstimate> estimates);

// Re-estimates a rig's wide-to-analysis transform from correspondences
// between its two cameras, with the measured stereo baseline as scale.
PairEstimate estimate_rig_extrinsic(const HybridRig& rig,
                                    std::span<const Correspondence> corrs,
                                    double baseline_mm,
                                    const RansacConfig& ransac,
                                    const SolverConfig& solver);

struct PipelineOptions {
  RansacConfig ransac;
  SolverConfig solver;
  bool global_refinement = true;
};

struct PipelineResult {
  std::vector<PairEstimate> estimates;
  Registration registration;
  std::optional<BaReport> global_report;
};

// Pairwise estimation, scale enforcement, refinement, registration and the
// optional joint refinement. `correspondences[k]` belongs to network.links[k].
PipelineResult calibrate_network(
    const RigNetwork& network,
    const std::vector<std::vector<Correspondence>>& correspondences,
    const PipelineOptions& options);

}  // namespace hybridcal
