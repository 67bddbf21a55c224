#include "hybridcal/cli.h"

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hybridcal/error.h"
#include "hybridcal/io.h"

namespace hybridcal {
namespace {

namespace fs = std::filesystem;
using io::json;

std::string correspondence_name(RigId i, RigId j, io::CameraLevel level) {
  return "corr_" + std::to_string(i) + "_" + std::to_string(j) +
         (level == io::CameraLevel::kWide ? "_wide.json" : "_analysis.json");
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kInvalidArgument, "cannot create " + dir.string());
  }
}

struct SimulateArgs {
  std::string config;
  std::string out;
};

void cmd_simulate(const SimulateArgs& args) {
  const SceneConfig config =
      args.config.empty() ? reference_scene_config()
                          : io::scene_config_from_json(io::read_json(args.config));
  const SyntheticScene scene = generate_scene(config);
  const fs::path dir(args.out);
  ensure_directory(dir);
  io::write_json(dir / "network.json", io::network_to_json(scene.network));
  const auto emit = [&](const std::vector<LinkObservations>& links,
                        io::CameraLevel level) {
    for (const LinkObservations& link : links) {
      io::CorrespondenceFile file;
      file.rig_i = link.rig_i;
      file.rig_j = link.rig_j;
      file.level = level;
      file.origin = "synthetic";
      file.correspondences = link.correspondences;
      io::write_json(dir / correspondence_name(link.rig_i, link.rig_j, level),
                     io::correspondences_to_json(file));
    }
  };
  emit(scene.wide, io::CameraLevel::kWide);
  emit(scene.analysis, io::CameraLevel::kAnalysis);
  io::write_json(dir / "truth.json", io::ground_truth_to_json(scene.truth));
}

struct CalibrateArgs {
  std::string network;
  std::string correspondences;
  std::string out;
  std::uint64_t seed = 0;
  double ransac_threshold = 1.0;
  bool skip_global_ba = false;
};

void cmd_calibrate(const CalibrateArgs& args) {
  const RigNetwork network = io::network_from_json(io::read_json(args.network));
  std::vector<std::vector<Correspondence>> corrs;
  for (const RigLink& link : network.links) {
    const fs::path path = fs::path(args.correspondences) /
                          correspondence_name(link.rig_i, link.rig_j,
                                              io::CameraLevel::kWide);
    io::CorrespondenceFile file =
        io::correspondences_from_json(io::read_json(path));
    if (file.rig_i != link.rig_i || file.rig_j != link.rig_j ||
        file.level != io::CameraLevel::kWide) {
      throw Error(ErrorCode::kSchemaError,
                  path.string() + " does not describe the wide pair of its link");
    }
    io::check_bounds(file, network);
    corrs.push_back(std::move(file.correspondences));
  }
  PipelineOptions options;
  options.ransac.seed = args.seed;
  options.ransac.threshold = args.ransac_threshold;
  options.ransac.validate();
  options.global_refinement = !args.skip_global_ba;
  const PipelineResult result = calibrate_network(network, corrs, options);
  const fs::path out(args.out);
  if (out.has_parent_path()) ensure_directory(out.parent_path());
  io::write_json(out, io::pose_file_to_json(io::make_pose_file(network, result)));
}

struct EpilinesArgs {
  std::string poses;
  std::string network;
  std::vector<RigId> pair;
  std::string points;
  std::string level = "s";
};

std::vector<PixelPoint> read_points(const json& j) {
  std::vector<PixelPoint> points;
  try {
    if (j.is_object() && j.contains("correspondences")) {
      for (const Correspondence& c :
           io::correspondences_from_json(j).correspondences) {
        points.push_back(c.x1);
      }
      return points;
    }
    const json& list = j.is_object() ? j.at("points") : j;
    for (const json& p : list) {
      if (!p.is_array() || p.size() != 2) {
        throw Error(ErrorCode::kSchemaError, "points must be [u, v] pairs");
      }
      points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("points: ") + e.what());
  }
  return points;
}

std::string format_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v == 0.0 ? 0.0 : v);
  return buf;
}

void cmd_epilines(const EpilinesArgs& args, std::ostream& out) {
  if (args.pair.size() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "--pair expects i,j");
  }
  if (args.level != "s" && args.level != "l") {
    throw Error(ErrorCode::kInvalidArgument, "--camera-level must be s or l");
  }
  const RigNetwork network = io::network_from_json(io::read_json(args.network));
  const io::PoseFile poses = io::pose_file_from_json(io::read_json(args.poses));
  const bool analysis = args.level == "s";
  const auto& table = analysis ? poses.analysis_poses : poses.wide_poses;
  const RigId i = args.pair[0];
  const RigId j = args.pair[1];
  const auto pi = table.find(i);
  const auto pj = table.find(j);
  if (pi == table.end() || pj == table.end()) {
    throw Error(ErrorCode::kUnknownRig, "pair is not registered in the pose file");
  }
  const CameraModel& ci = analysis ? network.rig(i).analysis : network.rig(i).wide;
  const CameraModel& cj = analysis ? network.rig(j).analysis : network.rig(j).wide;
  const RigidTransform rel = compose(pj->second, invert(pi->second));
  const Matrix3 F = fundamental_from_calibration(ci.K(), cj.K(), rel).matrix();
  for (const PixelPoint& p : read_points(io::read_json(args.points))) {
    try {
      const Eigen::Vector3d line = epipolar_line(F, ci.undistort_pixel(p));
      out << format_g9(line(0)) << ' ' << format_g9(line(1)) << ' '
          << format_g9(line(2)) << '\n';
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateLine) throw;
      out << error_name(e.code()) << '\n';
    }
  }
}

struct EvaluateArgs {
  std::string truth;
  std::string estimate;
};

void cmd_evaluate(const EvaluateArgs& args, std::ostream& out) {
  const GroundTruth truth = io::ground_truth_from_json(io::read_json(args.truth));
  const io::PoseFile poses =
      io::pose_file_from_json(io::read_json(args.estimate));
  out << io::dump(io::evaluation_to_json(
      evaluate(truth, poses.wide_poses, poses.analysis_poses)));
}

struct MatchArgs {
  std::string a;
  std::string b;
  std::vector<RigId> pair{1, 2};
  double tau = 0.8;
  std::string out;
};

void cmd_match(const MatchArgs& args, std::ostream& out) {
  if (args.pair.size() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "--pair expects i,j");
  }
  const DescriptorSet a = io::descriptors_from_json(io::read_json(args.a));
  const DescriptorSet b = io::descriptors_from_json(io::read_json(args.b));
  io::CorrespondenceFile file;
  file.rig_i = args.pair[0];
  file.rig_j = args.pair[1];
  file.origin = "matched";
  file.correspondences = match_descriptors(a, b, args.tau);
  const json doc = io::correspondences_to_json(file);
  if (args.out.empty()) {
    out << io::dump(doc);
  } else {
    io::write_json(args.out, doc);
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Extrinsic calibration of hybrid stereo rig networks"};
  app.require_subcommand(1);

  SimulateArgs simulate;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic scene");
  sim->add_option("--config", simulate.config, "Scene config JSON");
  sim->add_option("--out", simulate.out, "Output directory")->required();

  CalibrateArgs calibrate;
  auto* cal = app.add_subcommand("calibrate", "Estimate rig poses");
  cal->add_option("--network", calibrate.network, "Network JSON")->required();
  cal->add_option("--correspondences", calibrate.correspondences,
                  "Directory of correspondence files")
      ->required();
  cal->add_option("--out", calibrate.out, "Pose file to write")->required();
  cal->add_option("--seed", calibrate.seed, "RANSAC seed");
  cal->add_option("--ransac-threshold", calibrate.ransac_threshold,
                  "Sampson threshold in pixels");
  cal->add_flag("--skip-global-ba", calibrate.skip_global_ba,
                "Skip the joint refinement");

  EpilinesArgs epilines;
  auto* epi = app.add_subcommand("epilines", "Print epipolar lines");
  epi->add_option("--poses", epilines.poses, "Pose file")->required();
  epi->add_option("--network", epilines.network, "Network JSON")->required();
  epi->add_option("--pair", epilines.pair, "Rig pair i,j")
      ->required()
      ->delimiter(',');
  epi->add_option("--points", epilines.points, "Points JSON")->required();
  epi->add_option("--camera-level", epilines.level, "s (analysis) or l (wide)");

  EvaluateArgs evaluate_args;
  auto* ev = app.add_subcommand("evaluate", "Compare a pose file to truth");
  ev->add_option("--truth", evaluate_args.truth, "Ground truth JSON")->required();
  ev->add_option("--estimate", evaluate_args.estimate, "Pose file")->required();

  MatchArgs match;
  auto* mat = app.add_subcommand("match", "Married ratio-test matching");
  mat->add_option("--a", match.a, "Descriptor file of image 1")->required();
  mat->add_option("--b", match.b, "Descriptor file of image 2")->required();
  mat->add_option("--pair", match.pair, "Rig pair i,j")->delimiter(',');
  mat->add_option("--tau", match.tau, "Uniqueness ratio");
  mat->add_option("--out", match.out, "Correspondence file to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream parse_out;
    std::ostringstream parse_err;
    const int code = app.exit(e, parse_out, parse_err);
    out << parse_out.str();
    err << parse_err.str();
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) cmd_simulate(simulate);
    if (*cal) cmd_calibrate(calibrate);
    if (*epi) cmd_epilines(epilines, out);
    if (*ev) cmd_evaluate(evaluate_args, out);
    if (*mat) cmd_match(match, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_input_error(e.code()) ? 2 : 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace hybridcal
