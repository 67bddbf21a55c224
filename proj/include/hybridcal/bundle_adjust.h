#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "hybridcal/geometry.h"
#include "hybridcal/triangulation.h"

namespace hybridcal {

struct BaCamera {
  CameraModel camera;  // intrinsics are never optimized
  RigidTransform pose;
  bool fixed = false;
};

enum class ScaleGauge {
  kNone,
  // The distance between the centers of two cameras is held at its initial
  // value by a similarity rescale about the origin after every accepted
  // step. Requires every fixed camera to sit at zero translation.
  kFixedBaseline,
};

struct BaProblem {
  std::vector<BaCamera> cameras;
  std::vector<Vector3> points;
  std::vector<Observation> observations;
  ScaleGauge scale_gauge = ScaleGauge::kNone;
  std::size_t gauge_camera_a = 0;
  std::size_t gauge_camera_b = 1;

  // Throws InvalidArgument on bad indices, points seen fewer than twice or an
  // inconsistent scale gauge.
  void validate() const;

  std::size_t free_camera_count() const;
};

struct SolverConfig {
  int max_iterations = 200;
  double gradient_tolerance = 1e-10;
  double step_tolerance = 1e-12;
  double initial_damping = 1e-3;
  double damping_up = 10.0;
  double damping_down = 10.0;

  void validate() const;
};

enum class ConvergenceReason {
  kGradient,
  kStep,
  kIterationCap,
};

std::string_view convergence_reason_name(ConvergenceReason reason);

struct BaReport {
  int iterations = 0;
  int accepted_steps = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double initial_mean_error = 0.0;
  double final_mean_error = 0.0;
  double final_gradient_norm = 0.0;
  ConvergenceReason reason = ConvergenceReason::kIterationCap;
  // Cost after each accepted step, starting with the initial cost.
  std::vector<double> cost_history;
};

struct ResidualEvaluation {
  // project(camera, pose, point) - pixel per observation, stacked (u, v).
  Eigen::VectorXd residuals;
  // Observations whose point is not in front of the camera. Their residual
  // entries are set to zero and the cost is +inf.
  std::vector<std::size_t> behind;

  bool valid() const { return behind.empty(); }
  double cost() const;
};

ResidualEvaluation residual_vector(const BaProblem& problem);

// Sum of squared residual norms, +inf if any point is behind its camera.
double reprojection_cost(const BaProblem& problem);

double mean_reprojection_error(const BaProblem& problem);

// Analytic Jacobian blocks. The pose increment is (omega, dt) with
// R <- exp(omega) R and t <- t + dt; the point increment is additive.
struct ObservationJacobian {
  Eigen::Matrix<double, 2, 6> pose;   // zero and unused for fixed cameras
  Eigen::Matrix<double, 2, 3> point;
};

std::vector<ObservationJacobian> jacobian_blocks(const BaProblem& problem);

// Column layout: 6 columns per free camera in camera order, then 3 columns
// per point. Fixed cameras have no columns.
Eigen::SparseMatrix<double> jacobian(const BaProblem& problem);

// Applies a step laid out like the Jacobian columns.
BaProblem apply_increment(const BaProblem& problem,
                          const Eigen::VectorXd& delta);

// J^T r in the Jacobian column layout.
Eigen::VectorXd gradient(const BaProblem& problem);

struct BaResult {
  BaProblem problem;
  BaReport report;
};

// Levenberg-Marquardt with additive damping; point blocks are eliminated by
// the Schur complement. Throws NumericalFailure, NoDescent, or BehindCamera
// when the initial cost is not finite.
BaResult solve(const BaProblem& problem, const SolverConfig& config);

// Debug path: the same LM loop solving the full dense normal equations.
BaResult solve_dense(const BaProblem& problem, const SolverConfig& config);

}  // namespace hybridcal
