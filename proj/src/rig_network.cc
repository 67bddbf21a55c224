#include "hybridcal/rig_network.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <set>

#include "hybridcal/error.h"

namespace hybridcal {
namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

std::size_t rig_index(const RigNetwork& network, RigId id) {
  for (std::size_t i = 0; i < network.rigs.size(); ++i) {
    if (network.rigs[i].id == id) return i;
  }
  throw Error(ErrorCode::kUnknownRig, "unknown rig " + std::to_string(id));
}

PairEstimate scaled(const PairEstimate& estimate, double s) {
  PairEstimate out = estimate;
  out.relative = RigidTransform(estimate.relative.rotation(),
                                s * estimate.relative.translation());
  for (Vector3& x : out.points) x *= s;
  return out;
}

}  // namespace

void RigNetwork::validate() const {
  std::set<RigId> ids;
  for (const HybridRig& r : rigs) {
    if (!ids.insert(r.id).second) {
      throw Error(ErrorCode::kSchemaError,
                  "duplicate rig id " + std::to_string(r.id));
    }
  }
  if (rigs.empty()) throw Error(ErrorCode::kSchemaError, "network has no rigs");
  for (const RigLink& link : links) {
    if (!ids.count(link.rig_i) || !ids.count(link.rig_j)) {
      throw Error(ErrorCode::kSchemaError, "link references an unknown rig");
    }
    if (link.rig_i == link.rig_j) {
      throw Error(ErrorCode::kSchemaError, "link joins a rig to itself");
    }
  }
}

const HybridRig& RigNetwork::rig(RigId id) const {
  return rigs[rig_index(*this, id)];
}

RigId RigNetwork::root() const {
  if (rigs.empty()) throw Error(ErrorCode::kSchemaError, "network has no rigs");
  RigId root = rigs.front().id;
  for (const HybridRig& r : rigs) root = std::min(root, r.id);
  return root;
}

bool RigNetwork::connected() const {
  std::set<RigId> reached{root()};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const RigLink& link : links) {
      const bool has_i = reached.count(link.rig_i) > 0;
      const bool has_j = reached.count(link.rig_j) > 0;
      if (has_i != has_j) {
        reached.insert(has_i ? link.rig_j : link.rig_i);
        grew = true;
      }
    }
  }
  return reached.size() == rigs.size();
}

BaProblem PairEstimate::to_problem() const {
  BaProblem problem;
  problem.cameras.push_back({camera_i, RigidTransform(), true});
  problem.cameras.push_back({camera_j, relative, false});
  problem.points = points;
  for (std::size_t k = 0; k < points.size(); ++k) {
    problem.observations.push_back({0, k, observations[k].x1});
    problem.observations.push_back({1, k, observations[k].x2});
  }
  return problem;
}

double PairEstimate::mean_reprojection_error() const {
  return hybridcal::mean_reprojection_error(to_problem());
}

PairEstimate estimate_relative_pose(const CameraModel& camera_i,
                                    const CameraModel& camera_j,
                                    std::span<const Correspondence> corrs,
                                    const RansacConfig& ransac) {
  std::vector<Correspondence> undistorted;
  undistorted.reserve(corrs.size());
  for (const Correspondence& c : corrs) {
    undistorted.push_back(
        {camera_i.undistort_pixel(c.x1), camera_j.undistort_pixel(c.x2)});
  }
  const RansacResult consensus = ransac_fundamental(undistorted, ransac);

  std::vector<Correspondence> inliers;
  std::vector<std::size_t> labels;
  for (std::size_t k = 0; k < undistorted.size(); ++k) {
    if (consensus.inliers[k]) {
      inliers.push_back(undistorted[k]);
      labels.push_back(k);
    }
  }
  const PoseHypothesis pose =
      recover_pose(consensus.F, camera_i.K(), camera_j.K(), inliers);

  const ProjectionMatrix p1(camera_i.K(), RigidTransform());
  const ProjectionMatrix p2(camera_j.K(), pose.transform());
  const TriangulatedSet set = triangulate_set(p1, p2, inliers, labels);

  PairEstimate out;
  out.camera_i = camera_i;
  out.camera_j = camera_j;
  out.relative = pose.transform();
  out.points = set.points;
  out.sources = set.sources;
  out.dropped = set.dropped;
  out.inliers = consensus.inliers;
  for (std::size_t s : set.sources) out.observations.push_back(corrs[s]);
  return out;
}

PairEstimate estimate_pair_pose(const HybridRig& rig_i, const HybridRig& rig_j,
                                std::span<const Correspondence> corrs,
                                const RansacConfig& ransac) {
  PairEstimate out = estimate_relative_pose(rig_i.wide, rig_j.wide, corrs,
                                            ransac);
  out.rig_i = rig_i.id;
  out.rig_j = rig_j.id;
  return out;
}

PairEstimate enforce_scale(const PairEstimate& estimate,
                           const ScaleConstraint& constraint) {
  double current = 0.0;
  double target = 0.0;
  if (const auto* object = std::get_if<KnownObject>(&constraint)) {
    const auto find = [&](std::size_t source) -> const Vector3& {
      const auto it = std::find(estimate.sources.begin(),
                                estimate.sources.end(), source);
      if (it == estimate.sources.end()) {
        throw Error(ErrorCode::kDegenerateConstraint,
                    "known-object endpoint " + std::to_string(source) +
                        " was not triangulated");
      }
      return estimate.points[static_cast<std::size_t>(
          it - estimate.sources.begin())];
    };
    current = (find(object->point_a) - find(object->point_b)).norm();
    target = object->length;
  } else {
    current = camera_center(estimate.relative).norm();
    target = std::get<MeasuredBaseline>(constraint).distance;
  }
  if (!(target > 0.0)) {
    throw Error(ErrorCode::kDegenerateConstraint,
                "constraint length must be positive");
  }
  if (current < 1e-9) {
    throw Error(ErrorCode::kDegenerateConstraint,
                "constrained length is degenerate");
  }
  PairEstimate out = scaled(estimate, target / current);
  out.status = ScaleStatus::kMetric;
  out.constraint = constraint;
  return out;
}

PairEstimate refine_pair(const PairEstimate& estimate,
                         const SolverConfig& config) {
  const double length = estimate.relative.translation().norm();
  if (length < 1e-12) {
    throw Error(ErrorCode::kZeroBaseline, "pair has no baseline");
  }
  const PairEstimate unit = scaled(estimate, 1.0 / length);
  BaProblem problem = unit.to_problem();
  problem.scale_gauge = ScaleGauge::kFixedBaseline;
  problem.gauge_camera_a = 0;
  problem.gauge_camera_b = 1;

  const BaResult solved = solve(problem, config);
  PairEstimate out = unit;
  out.relative = solved.problem.cameras[1].pose;
  out.points = solved.problem.points;
  out.refinement = solved.report;
  if (estimate.status == ScaleStatus::kMetric) {
    out = estimate.constraint ? enforce_scale(out, *estimate.constraint)
                              : scaled(out, length);
  }
  return out;
}

std::vector<CycleDiscrepancy> edge_discrepancies(
    const std::map<RigId, RigidTransform>& wide_poses,
    std::span<const PairEstimate> estimates) {
  std::vector<CycleDiscrepancy> out;
  for (const PairEstimate& e : estimates) {
    const auto pi = wide_poses.find(e.rig_i);
    const auto pj = wide_poses.find(e.rig_j);
    if (pi == wide_poses.end() || pj == wide_poses.end()) {
      throw Error(ErrorCode::kUnknownRig, "estimate references unregistered rig");
    }
    const RigidTransform loop =
        compose(e.relative, compose(pi->second, invert(pj->second)));
    out.push_back({e.rig_i, e.rig_j,
                   rotation_angle_between(Matrix3::Identity(),
                                          loop.rotation()) *
                       kDegPerRad,
                   loop.translation().norm()});
  }
  return out;
}

Registration register_network(const RigNetwork& network,
                              std::span<const PairEstimate> estimates) {
  network.validate();
  for (const PairEstimate& e : estimates) {
    if (e.status != ScaleStatus::kMetric) {
      throw Error(ErrorCode::kMixedScale,
                  "pair (" + std::to_string(e.rig_i) + "," +
                      std::to_string(e.rig_j) + ") has no metric scale");
    }
    rig_index(network, e.rig_i);
    rig_index(network, e.rig_j);
  }

  Registration reg;
  const RigId root = network.root();
  reg.wide_poses.emplace(root, RigidTransform());
  std::vector<bool> used(estimates.size(), false);
  std::deque<RigId> queue{root};
  while (!queue.empty()) {
    const RigId current = queue.front();
    queue.pop_front();
    // Neighbours in ascending id order; the first estimate for a neighbour
    // wins.
    std::map<RigId, std::size_t> next;
    for (std::size_t k = 0; k < estimates.size(); ++k) {
      const PairEstimate& e = estimates[k];
      RigId other = 0;
      if (e.rig_i == current) {
        other = e.rig_j;
      } else if (e.rig_j == current) {
        other = e.rig_i;
      } else {
        continue;
      }
      if (reg.wide_poses.count(other) || next.count(other)) continue;
      next.emplace(other, k);
    }
    for (const auto& [other, k] : next) {
      const PairEstimate& e = estimates[k];
      const RigidTransform& base = reg.wide_poses.at(current);
      // e.relative maps rig_i coordinates into rig_j coordinates.
      const RigidTransform pose = e.rig_i == current
                                      ? compose(e.relative, base)
                                      : compose(invert(e.relative), base);
      reg.wide_poses.emplace(other, pose);
      used[k] = true;
      queue.push_back(other);
    }
  }
  if (reg.wide_poses.size() != network.rigs.size()) {
    throw Error(ErrorCode::kDisconnectedNetwork,
                "adjacency graph does not reach every rig");
  }
  std::vector<PairEstimate> off_tree;
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    if (!used[k]) off_tree.push_back(estimates[k]);
  }
  reg.cycles = edge_discrepancies(reg.wide_poses, off_tree);
  return reg;
}

RigidTransform analysis_camera_pose(const RigNetwork& network,
                                    const Registration& registration,
                                    RigId i) {
  const auto it = registration.wide_poses.find(i);
  if (it == registration.wide_poses.end()) {
    throw Error(ErrorCode::kUnknownRig,
                "rig " + std::to_string(i) + " is not registered");
  }
  return compose(network.rig(i).rig_extrinsic, it->second);
}

RigidTransform analysis_pose(RigId i, RigId j, const RigNetwork& network,
                             const Registration& registration) {
  return compose(analysis_camera_pose(network, registration, j),
                 invert(analysis_camera_pose(network, registration, i)));
}

namespace {

struct JointProblem {
  BaProblem problem;
  std::vector<RigId> order;
};

JointProblem build_joint_problem(
    const RigNetwork& network,
    const std::map<RigId, RigidTransform>& wide_poses,
    std::span<const PairEstimate> estimates) {
  JointProblem joint;
  std::map<RigId, std::size_t> camera_of;
  for (const auto& [id, pose] : wide_poses) {
    camera_of.emplace(id, joint.order.size());
    joint.order.push_back(id);
    joint.problem.cameras.push_back(
        {network.rig(id).wide, pose, id == network.root()});
  }
  for (const PairEstimate& e : estimates) {
    const auto ci = camera_of.find(e.rig_i);
    const auto cj = camera_of.find(e.rig_j);
    if (ci == camera_of.end() || cj == camera_of.end()) {
      throw Error(ErrorCode::kUnknownRig, "estimate references unregistered rig");
    }
    const RigidTransform to_reference = invert(wide_poses.at(e.rig_i));
    for (std::size_t k = 0; k < e.points.size(); ++k) {
      const std::size_t index = joint.problem.points.size();
      joint.problem.points.push_back(to_reference.apply(e.points[k]));
      joint.problem.observations.push_back(
          {ci->second, index, e.observations[k].x1});
      joint.problem.observations.push_back(
          {cj->second, index, e.observations[k].x2});
    }
  }
  return joint;
}

}  // namespace

double joint_cost(const RigNetwork& network,
                  const std::map<RigId, RigidTransform>& wide_poses,
                  std::span<const PairEstimate> estimates) {
  return reprojection_cost(
      build_joint_problem(network, wide_poses, estimates).problem);
}

GlobalRefinement global_refine(const RigNetwork& network,
                               const Registration& registration,
                               std::span<const PairEstimate> estimates,
                               const SolverConfig& config) {
  if (registration.wide_poses.size() < 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "joint refinement needs at least three rigs");
  }
  JointProblem joint =
      build_joint_problem(network, registration.wide_poses, estimates);
  joint.problem.scale_gauge = ScaleGauge::kFixedBaseline;
  joint.problem.gauge_camera_a = 0;  // root: smallest id sorts first
  joint.problem.gauge_camera_b = 1;

  const BaResult solved = solve(joint.problem, config);
  GlobalRefinement out;
  for (std::size_t c = 0; c < joint.order.size(); ++c) {
    out.registration.wide_poses.emplace(joint.order[c],
                                        solved.problem.cameras[c].pose);
  }
  // Same off-tree edges as the input registration.
  std::vector<PairEstimate> off_tree;
  for (const CycleDiscrepancy& d : registration.cycles) {
    for (const PairEstimate& e : estimates) {
      if (e.rig_i == d.rig_i && e.rig_j == d.rig_j) {
        off_tree.push_back(e);
        break;
      }
    }
  }
  // After the joint solve the loop closes exactly, so the residual
  // disagreement is spread over every edge. Report the worst one.
  const std::vector<CycleDiscrepancy> all =
      edge_discrepancies(out.registration.wide_poses, estimates);
  CycleDiscrepancy worst;
  for (const CycleDiscrepancy& d : all) {
    worst.rotation_deg = std::max(worst.rotation_deg, d.rotation_deg);
    worst.translation_mm = std::max(worst.translation_mm, d.translation_mm);
  }
  for (const PairEstimate& e : off_tree) {
    out.registration.cycles.push_back(
        {e.rig_i, e.rig_j, worst.rotation_deg, worst.translation_mm});
  }
  out.report = solved.report;
  return out;
}

PairEstimate estimate_rig_extrinsic(const HybridRig& rig,
                                    std::span<const Correspondence> corrs,
                                    double baseline_mm,
                                    const RansacConfig& ransac,
                                    const SolverConfig& solver) {
  PairEstimate est =
      estimate_relative_pose(rig.wide, rig.analysis, corrs, ransac);
  est.rig_i = rig.id;
  est.rig_j = rig.id;
  est = enforce_scale(est, MeasuredBaseline{baseline_mm});
  return refine_pair(est, solver);
}

PipelineResult calibrate_network(
    const RigNetwork& network,
    const std::vector<std::vector<Correspondence>>& correspondences,
    const PipelineOptions& options) {
  network.validate();
  if (correspondences.size() != network.links.size()) {
    throw Error(ErrorCode::kSchemaError,
                "one correspondence set is required per link");
  }
  if (!network.connected()) {
    throw Error(ErrorCode::kDisconnectedNetwork,
                "adjacency graph does not reach every rig");
  }

  PipelineResult result;
  for (std::size_t k = 0; k < network.links.size(); ++k) {
    const RigLink& link = network.links[k];
    RansacConfig ransac = options.ransac;
    ransac.seed = options.ransac.seed + k;
    PairEstimate est = estimate_pair_pose(network.rig(link.rig_i),
                                          network.rig(link.rig_j),
                                          correspondences[k], ransac);
    if (link.scale) est = enforce_scale(est, *link.scale);
    result.estimates.push_back(refine_pair(est, options.solver));
  }
  result.registration = register_network(network, result.estimates);
  if (options.global_refinement && network.rigs.size() >= 3) {
    GlobalRefinement global = global_refine(network, result.registration,
                                            result.estimates, options.solver);
    result.registration = std::move(global.registration);
    result.global_report = global.report;
  }
  return result;
}

}  // namespace hybridcal
