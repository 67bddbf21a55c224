#include <gtest/gtest.h>

#include "hybridcal/error.h"
#include "hybridcal/rig_network.h"
#include "hybridcal/synthetic.h"
#include "support.h"

namespace hybridcal {
namespace {

using testing::deg;

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kInvalidArgument;
}

RansacConfig seeded(std::uint64_t seed) {
  RansacConfig cfg;
  cfg.seed = seed;
  return cfg;
}

// Truth transform from rig i's wide frame into rig j's wide frame.
RigidTransform true_relative(const GroundTruth& t, RigId i, RigId j) {
  return compose(t.wide_world.at(j), invert(t.wide_world.at(i)));
}

PairEstimate pair_from_scene(const SyntheticScene& s, std::size_t link,
                             std::uint64_t seed = 1) {
  const LinkObservations& obs = s.wide[link];
  return estimate_pair_pose(s.network.rig(obs.rig_i), s.network.rig(obs.rig_j),
                            obs.correspondences, seeded(seed));
}

double rotation_error_deg(const RigidTransform& a, const RigidTransform& b) {
  return deg(rotation_angle_between(a.rotation(), b.rotation()));
}

std::vector<std::vector<Correspondence>> wide_corrs(const SyntheticScene& s) {
  std::vector<std::vector<Correspondence>> out;
  for (const LinkObservations& l : s.wide) out.push_back(l.correspondences);
  return out;
}

TEST(RigNetwork, ValidateAndLookup) {
  const SyntheticScene s = generate_scene(reference_scene_config());
  EXPECT_NO_THROW(s.network.validate());
  EXPECT_EQ(s.network.root(), 1);
  EXPECT_TRUE(s.network.connected());
  EXPECT_EQ(code_of([&] { s.network.rig(9); }), ErrorCode::kUnknownRig);
  RigNetwork dup = s.network;
  dup.rigs.push_back(dup.rigs[0]);
  EXPECT_EQ(code_of([&] { dup.validate(); }), ErrorCode::kSchemaError);
  RigNetwork dangling = s.network;
  dangling.links.push_back({1, 7, std::nullopt});
  EXPECT_EQ(code_of([&] { dangling.validate(); }), ErrorCode::kSchemaError);
}

TEST(EstimatePairPose, NoiselessReferenceScene) {
  const SyntheticScene s = generate_scene(reference_scene_config());
  const PairEstimate e = pair_from_scene(s, 0);
  const RigidTransform truth = true_relative(s.truth, 1, 2);
  EXPECT_LT(rotation_error_deg(e.relative, truth), 1e-6);
  EXPECT_LT(deg(angle_between(e.relative.translation(), truth.translation())),
            1e-6);
  EXPECT_NEAR(e.relative.translation().norm(), 1.0, 1e-12);
  EXPECT_EQ(e.status, ScaleStatus::kUnitGauge);
  EXPECT_EQ(e.points.size(), 200u);
}

TEST(EstimatePairPose, TooFewPoints) {
  const SyntheticScene s = generate_scene(reference_scene_config());
  const std::vector<Correspondence> seven(s.wide[0].correspondences.begin(),
                                          s.wide[0].correspondences.begin() + 7);
  EXPECT_EQ(code_of([&] {
              estimate_pair_pose(s.network.rig(1), s.network.rig(2), seven,
                                 seeded(1));
            }),
            ErrorCode::kTooFewPoints);
}

TEST(EstimatePairPose, ThirtyPercentOutliers) {
  SceneConfig cfg = reference_scene_config();
  cfg.noise_sigma = 0.5;
  cfg.outlier_fraction = 0.3;
  const SyntheticScene s = generate_scene(cfg);
  const PairEstimate e = pair_from_scene(s, 0);
  for (std::size_t k = 0; k < e.inliers.size(); ++k) {
    if (s.wide[0].outlier[k]) EXPECT_FALSE(e.inliers[k]) << k;
  }
  const PairEstimate refined = refine_pair(e, SolverConfig{});
  const double err = rotation_error_deg(refined.relative,
                                        true_relative(s.truth, 1, 2));
  RecordProperty("rotation_error_deg", std::to_string(err));
  EXPECT_LT(err, 0.2);
}

TEST(EnforceScale, KnownObjectScalesByHundred) {
  SceneConfig cfg = reference_scene_config();
  cfg.scale_mode = ScaleMode::kObject;
  const SyntheticScene s = generate_scene(cfg);
  PairEstimate e = pair_from_scene(s, 0);
  ASSERT_EQ(e.sources[0], 0u);
  ASSERT_EQ(e.sources[1], 1u);
  // Bring the brick to 0.798 gauge units first.
  const double brick = (e.points[0] - e.points[1]).norm();
  e = enforce_scale(e, KnownObject{0, 1, 0.798});
  EXPECT_NEAR((e.points[0] - e.points[1]).norm(), 0.798, 1e-12);
  const double baseline = e.relative.translation().norm();
  EXPECT_NEAR(baseline, 0.798 / brick, 1e-9);
  const PairEstimate metric = enforce_scale(e, KnownObject{0, 1, 79.8});
  EXPECT_EQ(metric.status, ScaleStatus::kMetric);
  EXPECT_NEAR(metric.relative.translation().norm(), 100.0 * baseline,
              1e-9 * baseline);
  for (std::size_t k = 0; k < e.points.size(); ++k) {
    EXPECT_LT((metric.points[k] - 100.0 * e.points[k]).norm(),
              1e-10 * metric.points[k].norm());
  }
  // And the result is the true metric baseline.
  EXPECT_NEAR(metric.relative.translation().norm(), 2000.0, 1e-6);
}

TEST(EnforceScale, SatisfiedConstraintIsIdentity) {
  const SyntheticScene s = generate_scene(reference_scene_config());
  const PairEstimate e = pair_from_scene(s, 0);
  const PairEstimate same = enforce_scale(e, MeasuredBaseline{1.0});
  EXPECT_LT((same.relative.translation() - e.relative.translation()).norm(),
            1e-12);
  for (std::size_t k = 0; k < e.points.size(); ++k) {
    EXPECT_LT((same.points[k] - e.points[k]).norm(), 1e-12 * e.points[k].norm());
  }
}

TEST(EnforceScale, ReprojectionInvariant) {
  SceneConfig cfg = reference_scene_config();
  cfg.noise_sigma = 0.5;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    cfg.seed = seed;
    const SyntheticScene s = generate_scene(cfg);
    const PairEstimate e = pair_from_scene(s, 0, seed);
    const PairEstimate m = enforce_scale(e, MeasuredBaseline{2000.0 + seed});
    const Eigen::VectorXd before = residual_vector(e.to_problem()).residuals;
    const Eigen::VectorXd after = residual_vector(m.to_problem()).residuals;
    EXPECT_LT((before - after).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(EnforceScale, DegenerateConstraint) {
  const SyntheticScene s = generate_scene(reference_scene_config());
  const PairEstimate e = pair_from_scene(s, 0);
  EXPECT_EQ(code_of([&] { enforce_scale(e, KnownObject{0, 0, 10.0}); }),
            ErrorCode::kDegenerateConstraint);
  EXPECT_EQ(code_of([&] { enforce_scale(e, KnownObject{0, 5000, 10.0}); }),
            ErrorCode::kDegenerateConstraint);
}

TEST(RefinePair, NoiselessIsUnchanged) {
  const SyntheticScene s = generate_scene(reference_scene_config());
  const PairEstimate e = enforce_scale(pair_from_scene(s, 0), MeasuredBaseline{2000});
  const PairEstimate r = refine_pair(e, SolverConfig{});
  ASSERT_TRUE(r.refinement.has_value());
  EXPECT_LE(r.refinement->iterations, 1);
  EXPECT_LT(rotation_error_deg(r.relative, e.relative), 1e-9);
  EXPECT_LT((r.relative.translation() - e.relative.translation()).norm(),
            1e-9 * 2000.0);
  EXPECT_NEAR(r.relative.translation().norm(), 2000.0, 1e-9);
}

TEST(RefinePair, NoisyErrorBelowBound) {
  SceneConfig cfg = reference_scene_config();
  cfg.noise_sigma = 0.5;
  const SyntheticScene s = generate_scene(cfg);
  const PairEstimate r = refine_pair(
      enforce_scale(pair_from_scene(s, 0), *s.network.links[0].scale),
      SolverConfig{});
  EXPECT_LE(r.mean_reprojection_error(), 0.7);
  EXPECT_NEAR(r.relative.translation().norm(), 2000.0, 1e-9);
}

TEST(RefinePair, ImprovesRotationOnAverage) {
  SceneConfig cfg = reference_scene_config();
  cfg.noise_sigma = 0.5;
  int improved = 0;
  double before_sq = 0.0;
  double after_sq = 0.0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    cfg.seed = 1000 + trial;
    const SyntheticScene s = generate_scene(cfg);
    const RigidTransform truth = true_relative(s.truth, 1, 2);
    const PairEstimate e = pair_from_scene(s, 0, trial);
    const PairEstimate r = refine_pair(e, SolverConfig{});
    const double before = rotation_error_deg(e.relative, truth);
    const double after = rotation_error_deg(r.relative, truth);
    before_sq += before * before;
    after_sq += after * after;
    improved += after < before;
    EXPECT_LE(r.refinement->final_cost, r.refinement->initial_cost);
  }
  RecordProperty("improved", improved);
  // The normalized linear estimate is already close to optimal at this
  // noise level, so single trials can get slightly worse.
  EXPECT_GT(improved, 60);
  EXPECT_LT(after_sq, before_sq);
}

PipelineResult run(const SyntheticScene& s, bool global = true) {
  PipelineOptions options;
  options.ransac.seed = 5;
  options.global_refinement = global;
  return calibrate_network(s.network, wide_corrs(s), options);
}

TEST(Register, TwoRigsUseThePairwisePose) {
  const SyntheticScene s = generate_scene(reference_scene_config());
  const PipelineResult r = run(s);
  ASSERT_EQ(r.estimates.size(), 1u);
  EXPECT_EQ(r.registration.wide_poses.at(1).rotation(), Matrix3::Identity());
  EXPECT_EQ(r.registration.wide_poses.at(2).rotation(),
            r.estimates[0].relative.rotation());
  EXPECT_EQ(r.registration.wide_poses.at(2).translation(),
            r.estimates[0].relative.translation());
  EXPECT_FALSE(r.global_report.has_value());
}

TEST(Register, ChainOfThreeMatchesTruth) {
  SceneConfig cfg = reference_scene_config();
  cfg.rig_count = 3;
  const SyntheticScene s = generate_scene(cfg);
  const PipelineResult r = run(s, false);
  for (RigId id : {2, 3}) {
    const RigidTransform& got = r.registration.wide_poses.at(id);
    const RigidTransform& want = s.truth.wide_poses.at(id);
    EXPECT_LT(rotation_error_deg(got, want), 1e-6);
    EXPECT_LT((got.translation() - want.translation()).norm() /
                  want.translation().norm(),
              1e-6);
  }
}

TEST(Register, ConsistentTriangleHasNoCycleError) {
  SceneConfig cfg = reference_scene_config();
  cfg.rig_count = 3;
  cfg.close_loop = true;
  const SyntheticScene s = generate_scene(cfg);
  const PipelineResult r = run(s, false);
  ASSERT_EQ(r.registration.cycles.size(), 1u);
  EXPECT_LT(r.registration.cycles[0].rotation_deg, 1e-8);
  EXPECT_LT(r.registration.cycles[0].translation_mm, 1e-8 * 2000.0);
}

TEST(Register, Errors) {
  SceneConfig cfg = reference_scene_config();
  cfg.rig_count = 3;
  const SyntheticScene s = generate_scene(cfg);
  PipelineResult r = run(s, false);
  std::vector<PairEstimate> mixed = r.estimates;
  mixed[1].status = ScaleStatus::kUnitGauge;
  EXPECT_EQ(code_of([&] { register_network(s.network, mixed); }),
            ErrorCode::kMixedScale);
  RigNetwork split = s.network;
  split.links.pop_back();
  std::vector<PairEstimate> one(r.estimates.begin(), r.estimates.begin() + 1);
  EXPECT_EQ(code_of([&] { register_network(split, one); }),
            ErrorCode::kDisconnectedNetwork);
}

TEST(Register, ReversedEdgeUsesInverse) {
  SceneConfig cfg = reference_scene_config();
  cfg.rig_count = 3;
  const SyntheticScene s = generate_scene(cfg);
  PipelineResult r = run(s, false);
  // Re-express the 2-3 estimate as 3 -> 2 and register again.
  std::vector<PairEstimate> flipped = r.estimates;
  PairEstimate& e = flipped[1];
  std::swap(e.rig_i, e.rig_j);
  e.relative = invert(e.relative);
  const Registration reg = register_network(s.network, flipped);
  EXPECT_LT(rotation_error_deg(reg.wide_poses.at(3), s.truth.wide_poses.at(3)),
            1e-6);
}

TEST(AnalysisPose, SameRigIsIdentity) {
  const SyntheticScene s = generate_scene(reference_scene_config());
  const PipelineResult r = run(s);
  const RigidTransform id = analysis_pose(2, 2, s.network, r.registration);
  EXPECT_LT((id.rotation() - Matrix3::Identity()).norm(), 1e-12);
  EXPECT_LT(id.translation().norm(), 1e-12);
}

TEST(AnalysisPose, TrivialRigExtrinsics) {
  SyntheticScene s = generate_scene(reference_scene_config());
  for (HybridRig& rig : s.network.rigs) rig.rig_extrinsic = RigidTransform();
  const PipelineResult r = run(s);
  const RigidTransform got = analysis_pose(1, 2, s.network, r.registration);
  const RigidTransform want = compose(r.registration.wide_poses.at(2),
                                      invert(r.registration.wide_poses.at(1)));
  EXPECT_LT((got.rotation() - want.rotation()).norm(), 1e-12);
  EXPECT_LT((got.translation() - want.translation()).norm(), 1e-9);
}

TEST(AnalysisPose, SatisfiesAnalysisEpipolarConstraint) {
  const SyntheticScene s = generate_scene(reference_scene_config());
  const PipelineResult r = run(s);
  const RigidTransform rel = analysis_pose(1, 2, s.network, r.registration);
  const CameraModel& a1 = s.network.rig(1).analysis;
  const CameraModel& a2 = s.network.rig(2).analysis;
  const Matrix3 f = fundamental_from_calibration(a1.K(), a2.K(), rel).matrix();
  double worst = 0.0;
  for (const Correspondence& c : s.analysis[0].correspondences) {
    const Correspondence ideal{a1.undistort_pixel(c.x1), a2.undistort_pixel(c.x2)};
    worst = std::max(worst, std::sqrt(sampson_distance(f, ideal)));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(AnalysisPose, UnknownRig) {
  const SyntheticScene s = generate_scene(reference_scene_config());
  const PipelineResult r = run(s);
  EXPECT_EQ(code_of([&] { analysis_pose(1, 5, s.network, r.registration); }),
            ErrorCode::kUnknownRig);
}

TEST(GlobalRefine, NoiselessIsUnchanged) {
  SceneConfig cfg = reference_scene_config();
  cfg.rig_count = 3;
  cfg.close_loop = true;
  const SyntheticScene s = generate_scene(cfg);
  const PipelineResult before = run(s, false);
  const GlobalRefinement g =
      global_refine(s.network, before.registration, before.estimates, SolverConfig{});
  for (RigId id : {1, 2, 3}) {
    const RigidTransform& a = before.registration.wide_poses.at(id);
    const RigidTransform& b = g.registration.wide_poses.at(id);
    EXPECT_LT(rotation_error_deg(a, b), 1e-9);
    EXPECT_LT((a.translation() - b.translation()).norm(), 1e-9 * 2000.0);
  }
}

TEST(GlobalRefine, NoisyTriangleReducesCycleError) {
  SceneConfig cfg = reference_scene_config();
  cfg.rig_count = 3;
  cfg.close_loop = true;
  cfg.noise_sigma = 0.5;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.seed = seed;
    const SyntheticScene s = generate_scene(cfg);
    const PipelineResult before = run(s, false);
    const GlobalRefinement g = global_refine(s.network, before.registration,
                                             before.estimates, SolverConfig{});
    ASSERT_EQ(before.registration.cycles.size(), 1u);
    ASSERT_EQ(g.registration.cycles.size(), 1u);
    EXPECT_LE(g.registration.cycles[0].rotation_deg,
              before.registration.cycles[0].rotation_deg);
    // Translation is not compared: only one baseline is held fixed, so the
    // other link lengths are free to trade against reprojection error.
    // Joint cost never exceeds the pairwise solutions evaluated jointly.
    const double pairwise =
        joint_cost(s.network, before.registration.wide_poses, before.estimates);
    EXPECT_NEAR(g.report.initial_cost, pairwise, 1e-9 * pairwise);
    EXPECT_LE(g.report.final_cost, pairwise);
  }
}

TEST(GlobalRefine, NeedsThreeRigs) {
  const SyntheticScene s = generate_scene(reference_scene_config());
  const PipelineResult r = run(s);
  EXPECT_THROW(global_refine(s.network, r.registration, r.estimates,
                             SolverConfig{}),
               Error);
}

TEST(Pipeline, MissingScaleIsMixed) {
  SyntheticScene s = generate_scene(reference_scene_config());
  s.network.links[0].scale.reset();
  EXPECT_EQ(code_of([&] { run(s); }), ErrorCode::kMixedScale);
}

TEST(Pipeline, DisconnectedNetwork) {
  SceneConfig cfg = reference_scene_config();
  cfg.rig_count = 3;
  SyntheticScene s = generate_scene(cfg);
  s.network.links.pop_back();
  s.wide.pop_back();
  EXPECT_EQ(code_of([&] { run(s); }), ErrorCode::kDisconnectedNetwork);
}

TEST(RigExtrinsic, RecoversStereoTransform) {
  const SyntheticScene s = generate_scene(reference_scene_config());
  const HybridRig& rig = s.network.rig(1);
  // Points seen by both cameras of rig 1.
  testing::Rng rng(3);
  const RigidTransform wide_pose = s.truth.wide_world.at(1);
  std::vector<Correspondence> corrs;
  while (corrs.size() < 60) {
    const Vector3 x = rng.vector(-800, 800);
    const Vector3 in_wide = wide_pose.apply(x);
    const Vector3 in_analysis = rig.rig_extrinsic.apply(in_wide);
    if (in_wide.z() <= 0 || in_analysis.z() <= 0) continue;
    const PixelPoint p1 = project(rig.wide, wide_pose, x);
    const PixelPoint p2 =
        project(rig.analysis, compose(rig.rig_extrinsic, wide_pose), x);
    if (!rig.wide.in_bounds(p1, 10) || !rig.analysis.in_bounds(p2, 10)) continue;
    corrs.push_back({p1, p2});
  }
  const PairEstimate e =
      estimate_rig_extrinsic(rig, corrs, 60.0, seeded(2), SolverConfig{});
  EXPECT_LT(rotation_error_deg(e.relative, rig.rig_extrinsic), 1e-6);
  EXPECT_LT((e.relative.translation() - rig.rig_extrinsic.translation()).norm(),
            1e-6);
}

}  // namespace
}  // namespace hybridcal
