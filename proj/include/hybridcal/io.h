#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hybridcal/rig_network.h"
#include "hybridcal/synthetic.h"

namespace hybridcal::io {

using nlohmann::json;

// All interchange is JSON. Lengths are millimeters, angles degrees,
// rotations 3x3 row-major. Parse failures throw SchemaError.

json camera_to_json(const CameraModel& camera);
CameraModel camera_from_json(const json& j);

json transform_to_json(const RigidTransform& transform);
RigidTransform transform_from_json(const json& j);

json network_to_json(const RigNetwork& network);
RigNetwork network_from_json(const json& j);

enum class CameraLevel { kWide, kAnalysis };

struct CorrespondenceFile {
  RigId rig_i = 0;
  RigId rig_j = 0;
  CameraLevel level = CameraLevel::kWide;
  std::string origin = "matched";  // "manual" | "matched" | "synthetic"
  std::vector<Correspondence> correspondences;
};

json correspondences_to_json(const CorrespondenceFile& file);
CorrespondenceFile correspondences_from_json(const json& j);

// Throws SchemaError when a coordinate falls outside the declared cameras.
void check_bounds(const CorrespondenceFile& file, const RigNetwork& network);

struct PairSummary {
  RigId rig_i = 0;
  RigId rig_j = 0;
  std::size_t correspondences = 0;
  std::size_t inliers = 0;
  std::size_t points = 0;
  double mean_reprojection_error = 0.0;  // px, after refinement
  int ba_iterations = 0;
};

struct PoseFile {
  RigId reference_rig = 0;
  std::map<RigId, RigidTransform> wide_poses;
  std::map<RigId, RigidTransform> analysis_poses;
  std::vector<PairSummary> pairs;
  std::vector<CycleDiscrepancy> cycles;
  std::optional<BaReport> global;
};

PoseFile make_pose_file(const RigNetwork& network, const PipelineResult& result);
json pose_file_to_json(const PoseFile& file);
PoseFile pose_file_from_json(const json& j);

json ground_truth_to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const json& j);

json scene_config_to_json(const SceneConfig& config);
// Missing keys keep the reference-scene defaults.
SceneConfig scene_config_from_json(const json& j);

json descriptors_to_json(const DescriptorSet& set);
DescriptorSet descriptors_from_json(const json& j);

json evaluation_to_json(const EvaluationReport& report);

json read_json(const std::filesystem::path& path);
// Two-space indented with a trailing newline; byte-stable for equal input.
void write_json(const std::filesystem::path& path, const json& j);
std::string dump(const json& j);

}  // namespace hybridcal::io
