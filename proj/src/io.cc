#include "hybridcal/io.h"

#include <fstream>
#include <sstream>

#include "hybridcal/error.h"

namespace hybridcal::io {
namespace {

[[noreturn]] void schema_error(const std::string& what) {
  throw Error(ErrorCode::kSchemaError, what);
}

template <typename Fn>
auto guarded(const char* what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    schema_error(std::string(what) + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSchemaError) throw;
    schema_error(std::string(what) + ": " + e.what());
  }
}

json point_to_json(const PixelPoint& p) { return json::array({p.x(), p.y()}); }

PixelPoint point_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) schema_error("pixel must be [u, v]");
  const PixelPoint p(j.at(0).get<double>(), j.at(1).get<double>());
  if (!p.allFinite()) schema_error("pixel is not finite");
  return p;
}

constexpr double kFileRotationTolerance = 1e-4;

json euler_to_json(const Matrix3& r) {
  const EulerAngles a = euler_from_rotation(r).angles;
  return json::array({a.psi, a.theta, a.phi});
}

json constraint_to_json(const ScaleConstraint& c) {
  if (const auto* object = std::get_if<KnownObject>(&c)) {
    return {{"type", "known_object"},
            {"points", json::array({object->point_a, object->point_b})},
            {"length_mm", object->length}};
  }
  return {{"type", "measured_baseline"},
          {"distance_mm", std::get<MeasuredBaseline>(c).distance}};
}

ScaleConstraint constraint_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "known_object") {
    const json& pts = j.at("points");
    if (!pts.is_array() || pts.size() != 2) {
      schema_error("known_object needs two point indices");
    }
    KnownObject object{pts.at(0).get<std::size_t>(),
                       pts.at(1).get<std::size_t>(),
                       j.at("length_mm").get<double>()};
    if (!(object.length > 0.0)) schema_error("length_mm must be positive");
    return object;
  }
  if (type == "measured_baseline") {
    MeasuredBaseline baseline{j.at("distance_mm").get<double>()};
    if (!(baseline.distance > 0.0)) schema_error("distance_mm must be positive");
    return baseline;
  }
  schema_error("unknown scale constraint type '" + type + "'");
}

json pair_ids(RigId i, RigId j) { return json::array({i, j}); }

std::pair<RigId, RigId> pair_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) schema_error("pair must be [i, j]");
  return {j.at(0).get<RigId>(), j.at(1).get<RigId>()};
}

json report_to_json(const BaReport& r) {
  return {{"iterations", r.iterations},
          {"accepted_steps", r.accepted_steps},
          {"initial_mean_error_px", r.initial_mean_error},
          {"final_mean_error_px", r.final_mean_error},
          {"initial_cost", r.initial_cost},
          {"final_cost", r.final_cost},
          {"convergence", std::string(convergence_reason_name(r.reason))}};
}

BaReport report_from_json(const json& j) {
  BaReport r;
  r.iterations = j.at("iterations").get<int>();
  r.accepted_steps = j.at("accepted_steps").get<int>();
  r.initial_mean_error = j.at("initial_mean_error_px").get<double>();
  r.final_mean_error = j.at("final_mean_error_px").get<double>();
  r.initial_cost = j.at("initial_cost").get<double>();
  r.final_cost = j.at("final_cost").get<double>();
  const std::string reason = j.at("convergence").get<std::string>();
  if (reason == "gradient") {
    r.reason = ConvergenceReason::kGradient;
  } else if (reason == "step") {
    r.reason = ConvergenceReason::kStep;
  } else {
    r.reason = ConvergenceReason::kIterationCap;
  }
  return r;
}

json rig_map_to_json(const std::map<RigId, RigidTransform>& poses) {
  json out = json::array();
  for (const auto& [id, pose] : poses) {
    out.push_back({{"id", id}, {"transform", transform_to_json(pose)}});
  }
  return out;
}

std::map<RigId, RigidTransform> rig_map_from_json(const json& j) {
  std::map<RigId, RigidTransform> out;
  for (const json& entry : j) {
    if (!out.emplace(entry.at("id").get<RigId>(),
                     transform_from_json(entry.at("transform")))
             .second) {
      schema_error("duplicate rig id in pose list");
    }
  }
  return out;
}

}  // namespace

json camera_to_json(const CameraModel& c) {
  return {{"fx", c.fx()},
          {"fy", c.fy()},
          {"cx", c.cx()},
          {"cy", c.cy()},
          {"kappa", json::array({c.kappa()[0], c.kappa()[1], c.kappa()[2]})},
          {"width", c.width()},
          {"height", c.height()}};
}

CameraModel camera_from_json(const json& j) {
  return guarded("camera", [&] {
    std::array<double, 3> kappa{0.0, 0.0, 0.0};
    if (j.contains("kappa")) {
      const json& k = j.at("kappa");
      if (!k.is_array() || k.size() != 3) schema_error("kappa needs 3 values");
      for (std::size_t i = 0; i < 3; ++i) kappa[i] = k.at(i).get<double>();
    }
    if (j.contains("skew") && j.at("skew").get<double>() != 0.0) {
      schema_error("skew must be 0");
    }
    return CameraModel(j.at("fx").get<double>(), j.at("fy").get<double>(),
                       j.at("cx").get<double>(), j.at("cy").get<double>(),
                       kappa, j.at("width").get<int>(),
                       j.at("height").get<int>());
  });
}

json transform_to_json(const RigidTransform& t) {
  json rotation = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rotation.push_back(t.rotation()(r, c));
  }
  return {{"rotation", rotation},
          {"translation", json::array({t.translation().x(),
                                       t.translation().y(),
                                       t.translation().z()})}};
}

RigidTransform transform_from_json(const json& j) {
  return guarded("transform", [&] {
    const json& rot = j.at("rotation");
    const json& tr = j.at("translation");
    if (!rot.is_array() || rot.size() != 9) {
      schema_error("rotation needs 9 row-major values");
    }
    if (!tr.is_array() || tr.size() != 3) schema_error("translation needs 3");
    Matrix3 r;
    for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = rot.at(i).get<double>();
    const Vector3 t(tr.at(0).get<double>(), tr.at(1).get<double>(),
                    tr.at(2).get<double>());
    // Hand-edited files often carry only five or six digits.
    return RigidTransform::from_approximate(r, t, kFileRotationTolerance);
  });
}

json network_to_json(const RigNetwork& network) {
  json rigs = json::array();
  for (const HybridRig& r : network.rigs) {
    rigs.push_back({{"id", r.id},
                    {"wide", camera_to_json(r.wide)},
                    {"analysis", camera_to_json(r.analysis)},
                    {"rig_extrinsic", transform_to_json(r.rig_extrinsic)}});
  }
  json links = json::array();
  for (const RigLink& l : network.links) {
    json entry = {{"pair", pair_ids(l.rig_i, l.rig_j)}};
    if (l.scale) entry["scale"] = constraint_to_json(*l.scale);
    links.push_back(entry);
  }
  return {{"rigs", rigs}, {"links", links}};
}

RigNetwork network_from_json(const json& j) {
  return guarded("network", [&] {
    RigNetwork network;
    for (const json& r : j.at("rigs")) {
      network.rigs.push_back({r.at("id").get<RigId>(),
                              camera_from_json(r.at("wide")),
                              camera_from_json(r.at("analysis")),
                              transform_from_json(r.at("rig_extrinsic"))});
    }
    for (const json& l : j.at("links")) {
      const auto [i, k] = pair_from_json(l.at("pair"));
      RigLink link{i, k, std::nullopt};
      if (l.contains("scale")) link.scale = constraint_from_json(l.at("scale"));
      network.links.push_back(link);
    }
    network.validate();
    return network;
  });
}

json correspondences_to_json(const CorrespondenceFile& file) {
  json list = json::array();
  for (const Correspondence& c : file.correspondences) {
    list.push_back({{"x1", point_to_json(c.x1)}, {"x2", point_to_json(c.x2)}});
  }
  return {{"pair", pair_ids(file.rig_i, file.rig_j)},
          {"level", file.level == CameraLevel::kWide ? "wide" : "analysis"},
          {"origin", file.origin},
          {"correspondences", list}};
}

CorrespondenceFile correspondences_from_json(const json& j) {
  return guarded("correspondences", [&] {
    CorrespondenceFile file;
    std::tie(file.rig_i, file.rig_j) = pair_from_json(j.at("pair"));
    const std::string level = j.value("level", std::string("wide"));
    if (level == "wide") {
      file.level = CameraLevel::kWide;
    } else if (level == "analysis") {
      file.level = CameraLevel::kAnalysis;
    } else {
      schema_error("level must be 'wide' or 'analysis'");
    }
    file.origin = j.value("origin", std::string("matched"));
    if (file.origin != "manual" && file.origin != "matched" &&
        file.origin != "synthetic") {
      schema_error("origin must be manual, matched or synthetic");
    }
    for (const json& c : j.at("correspondences")) {
      file.correspondences.push_back(
          {point_from_json(c.at("x1")), point_from_json(c.at("x2"))});
    }
    return file;
  });
}

void check_bounds(const CorrespondenceFile& file, const RigNetwork& network) {
  const auto camera = [&](RigId id) -> const CameraModel& {
    const HybridRig& rig = guarded("correspondences", [&]() -> const HybridRig& {
      return network.rig(id);
    });
    return file.level == CameraLevel::kWide ? rig.wide : rig.analysis;
  };
  const CameraModel& a = camera(file.rig_i);
  const CameraModel& b = camera(file.rig_j);
  for (std::size_t k = 0; k < file.correspondences.size(); ++k) {
    if (!a.in_bounds(file.correspondences[k].x1) ||
        !b.in_bounds(file.correspondences[k].x2)) {
      schema_error("correspondence " + std::to_string(k) +
                   " lies outside the sensor");
    }
  }
}

PoseFile make_pose_file(const RigNetwork& network,
                        const PipelineResult& result) {
  PoseFile file;
  file.reference_rig = network.root();
  file.wide_poses = result.registration.wide_poses;
  for (const auto& [id, pose] : file.wide_poses) {
    file.analysis_poses.emplace(
        id, analysis_camera_pose(network, result.registration, id));
  }
  for (const PairEstimate& e : result.estimates) {
    PairSummary s;
    s.rig_i = e.rig_i;
    s.rig_j = e.rig_j;
    s.correspondences = e.inliers.size();
    s.inliers = static_cast<std::size_t>(
        std::count(e.inliers.begin(), e.inliers.end(), true));
    s.points = e.points.size();
    s.mean_reprojection_error = e.mean_reprojection_error();
    s.ba_iterations = e.refinement ? e.refinement->iterations : 0;
    file.pairs.push_back(s);
  }
  file.cycles = result.registration.cycles;
  file.global = result.global_report;
  return file;
}

json pose_file_to_json(const PoseFile& file) {
  json rigs = json::array();
  for (const auto& [id, wide] : file.wide_poses) {
    const RigidTransform& analysis = file.analysis_poses.at(id);
    rigs.push_back({{"id", id},
                    {"wide_pose", transform_to_json(wide)},
                    {"wide_euler_deg", euler_to_json(wide.rotation())},
                    {"analysis_pose", transform_to_json(analysis)},
                    {"analysis_euler_deg", euler_to_json(analysis.rotation())}});
  }
  json pairs = json::array();
  for (const PairSummary& s : file.pairs) {
    json entry = {{"pair", pair_ids(s.rig_i, s.rig_j)},
                  {"correspondences", s.correspondences},
                  {"inliers", s.inliers},
                  {"points", s.points},
                  {"mean_reprojection_error_px", s.mean_reprojection_error},
                  {"ba_iterations", s.ba_iterations}};
    const auto ai = file.analysis_poses.find(s.rig_i);
    const auto aj = file.analysis_poses.find(s.rig_j);
    if (ai != file.analysis_poses.end() && aj != file.analysis_poses.end()) {
      const RigidTransform rel = compose(aj->second, invert(ai->second));
      entry["analysis_relative"] = transform_to_json(rel);
      entry["analysis_relative_euler_deg"] = euler_to_json(rel.rotation());
    }
    pairs.push_back(entry);
  }
  json cycles = json::array();
  for (const CycleDiscrepancy& c : file.cycles) {
    cycles.push_back({{"pair", pair_ids(c.rig_i, c.rig_j)},
                      {"rotation_deg", c.rotation_deg},
                      {"translation_mm", c.translation_mm}});
  }
  json out = {{"reference_rig", file.reference_rig},
              {"euler_convention", "R = Rz(phi) Ry(theta) Rx(psi), [psi, theta, phi]"},
              {"rigs", rigs},
              {"pairs", pairs},
              {"cycles", cycles}};
  if (file.global) out["global_refinement"] = report_to_json(*file.global);
  return out;
}

PoseFile pose_file_from_json(const json& j) {
  return guarded("poses", [&] {
    PoseFile file;
    file.reference_rig = j.at("reference_rig").get<RigId>();
    for (const json& r : j.at("rigs")) {
      const RigId id = r.at("id").get<RigId>();
      file.wide_poses.emplace(id, transform_from_json(r.at("wide_pose")));
      file.analysis_poses.emplace(id,
                                  transform_from_json(r.at("analysis_pose")));
    }
    for (const json& p : j.at("pairs")) {
      PairSummary s;
      std::tie(s.rig_i, s.rig_j) = pair_from_json(p.at("pair"));
      s.correspondences = p.at("correspondences").get<std::size_t>();
      s.inliers = p.at("inliers").get<std::size_t>();
      s.points = p.at("points").get<std::size_t>();
      s.mean_reprojection_error =
          p.at("mean_reprojection_error_px").get<double>();
      if (s.mean_reprojection_error < 0.0) {
        schema_error("negative reprojection error");
      }
      s.ba_iterations = p.at("ba_iterations").get<int>();
      file.pairs.push_back(s);
    }
    for (const json& c : j.value("cycles", json::array())) {
      CycleDiscrepancy d;
      std::tie(d.rig_i, d.rig_j) = pair_from_json(c.at("pair"));
      d.rotation_deg = c.at("rotation_deg").get<double>();
      d.translation_mm = c.at("translation_mm").get<double>();
      file.cycles.push_back(d);
    }
    if (j.contains("global_refinement")) {
      file.global = report_from_json(j.at("global_refinement"));
    }
    return file;
  });
}

json ground_truth_to_json(const GroundTruth& truth) {
  return {{"network", network_to_json(truth.network)},
          {"wide_world", rig_map_to_json(truth.wide_world)},
          {"wide_poses", rig_map_to_json(truth.wide_poses)},
          {"analysis_poses", rig_map_to_json(truth.analysis_poses)},
          {"scale", truth.scale}};
}

GroundTruth ground_truth_from_json(const json& j) {
  return guarded("truth", [&] {
    GroundTruth truth;
    truth.network = network_from_json(j.at("network"));
    truth.wide_world = rig_map_from_json(j.at("wide_world"));
    truth.wide_poses = rig_map_from_json(j.at("wide_poses"));
    truth.analysis_poses = rig_map_from_json(j.at("analysis_poses"));
    truth.scale = j.value("scale", 1.0);
    return truth;
  });
}

json scene_config_to_json(const SceneConfig& c) {
  const auto camera = [](const CameraTemplate& t) {
    return json{{"focal", t.focal},
                {"width", t.width},
                {"height", t.height},
                {"kappa", json::array({t.kappa[0], t.kappa[1], t.kappa[2]})}};
  };
  return {{"rig_count", c.rig_count},
          {"close_loop", c.close_loop},
          {"inter_rig_baseline_mm", c.inter_rig_baseline},
          {"scene_distance_mm", c.scene_distance},
          {"stereo_baseline_mm", c.stereo_baseline},
          {"look_at_jitter_deg", c.look_at_jitter},
          {"point_extent_mm", c.point_extent},
          {"wide_camera", camera(c.wide)},
          {"analysis_camera", camera(c.analysis)},
          {"points_per_pair", c.points_per_pair},
          {"analysis_points", c.analysis_points},
          {"noise_sigma_px", c.noise_sigma},
          {"analysis_noise_sigma_px", c.analysis_noise_sigma},
          {"outlier_fraction", c.outlier_fraction},
          {"intrinsics_perturbation", c.intrinsics_perturbation},
          {"scale_mode",
           c.scale_mode == ScaleMode::kObject ? "object" : "baseline"},
          {"object_length_mm", c.object_length},
          {"seed", c.seed}};
}

SceneConfig scene_config_from_json(const json& j) {
  return guarded("scene config", [&] {
    SceneConfig c = reference_scene_config();
    const auto camera = [](const json& t, CameraTemplate base) {
      base.focal = t.value("focal", base.focal);
      base.width = t.value("width", base.width);
      base.height = t.value("height", base.height);
      if (t.contains("kappa")) {
        const json& k = t.at("kappa");
        if (!k.is_array() || k.size() != 3) schema_error("kappa needs 3");
        for (std::size_t i = 0; i < 3; ++i) base.kappa[i] = k.at(i).get<double>();
      }
      return base;
    };
    c.rig_count = j.value("rig_count", c.rig_count);
    c.close_loop = j.value("close_loop", c.close_loop);
    c.inter_rig_baseline = j.value("inter_rig_baseline_mm", c.inter_rig_baseline);
    c.scene_distance = j.value("scene_distance_mm", c.scene_distance);
    c.stereo_baseline = j.value("stereo_baseline_mm", c.stereo_baseline);
    c.look_at_jitter = j.value("look_at_jitter_deg", c.look_at_jitter);
    c.point_extent = j.value("point_extent_mm", c.point_extent);
    if (j.contains("wide_camera")) c.wide = camera(j.at("wide_camera"), c.wide);
    if (j.contains("analysis_camera")) {
      c.analysis = camera(j.at("analysis_camera"), c.analysis);
    }
    c.points_per_pair = j.value("points_per_pair", c.points_per_pair);
    c.analysis_points = j.value("analysis_points", c.analysis_points);
    c.noise_sigma = j.value("noise_sigma_px", c.noise_sigma);
    c.analysis_noise_sigma =
        j.value("analysis_noise_sigma_px", c.analysis_noise_sigma);
    c.outlier_fraction = j.value("outlier_fraction", c.outlier_fraction);
    c.intrinsics_perturbation =
        j.value("intrinsics_perturbation", c.intrinsics_perturbation);
    const std::string mode = j.value("scale_mode", std::string("baseline"));
    if (mode == "object") {
      c.scale_mode = ScaleMode::kObject;
    } else if (mode == "baseline") {
      c.scale_mode = ScaleMode::kBaseline;
    } else {
      schema_error("scale_mode must be 'baseline' or 'object'");
    }
    c.object_length = j.value("object_length_mm", c.object_length);
    c.seed = j.value("seed", c.seed);
    return c;
  });
}

json descriptors_to_json(const DescriptorSet& set) {
  json keypoints = json::array();
  for (const PixelPoint& p : set.keypoints) keypoints.push_back(point_to_json(p));
  json descriptors = json::array();
  for (Eigen::Index r = 0; r < set.descriptors.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < set.descriptors.cols(); ++c) {
      row.push_back(set.descriptors(r, c));
    }
    descriptors.push_back(row);
  }
  return {{"keypoints", keypoints}, {"descriptors", descriptors}};
}

DescriptorSet descriptors_from_json(const json& j) {
  return guarded("descriptors", [&] {
    DescriptorSet set;
    for (const json& p : j.at("keypoints")) {
      set.keypoints.push_back(point_from_json(p));
    }
    const json& rows = j.at("descriptors");
    const std::size_t dim = rows.empty() ? 0 : rows.at(0).size();
    set.descriptors.resize(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows.at(r).size() != dim) {
        schema_error("descriptors must share one dimension");
      }
      for (std::size_t c = 0; c < dim; ++c) {
        set.descriptors(static_cast<Eigen::Index>(r),
                        static_cast<Eigen::Index>(c)) =
            rows.at(r).at(c).get<double>();
      }
    }
    set.validate();
    return set;
  });
}

json evaluation_to_json(const EvaluationReport& report) {
  const auto error = [](const TransformError& e) {
    return json{{"rotation_deg", e.rotation_deg},
                {"direction_deg", e.direction_deg},
                {"scale_error", e.scale_error}};
  };
  json rigs = json::array();
  for (const RigError& r : report.rigs) {
    rigs.push_back({{"id", r.id},
                    {"wide", error(r.wide)},
                    {"analysis", error(r.analysis)}});
  }
  json out = {{"rigs", rigs},
              {"max_rotation_deg", report.max_rotation_deg()},
              {"max_direction_deg", report.max_direction_deg()},
              {"max_scale_error", report.max_scale_error()}};
  if (report.mean_reprojection_error) {
    out["mean_reprojection_error_px"] = *report.mean_reprojection_error;
  }
  return out;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) schema_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    schema_error(path.string() + ": " + e.what());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::kInvalidArgument, "cannot write " + path.string());
  }
  out << dump(j);
}

}  // namespace hybridcal::io
