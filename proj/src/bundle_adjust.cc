#include "hybridcal/bundle_adjust.h"

#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "hybridcal/error.h"

namespace hybridcal {
namespace {

constexpr double kMaxDamping = 1e10;

using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix63 = Eigen::Matrix<double, 6, 3>;

// Column offset of each camera, -1 for fixed cameras.
std::vector<Eigen::Index> camera_offsets(const BaProblem& problem) {
  std::vector<Eigen::Index> offsets(problem.cameras.size(), -1);
  Eigen::Index next = 0;
  for (std::size_t i = 0; i < problem.cameras.size(); ++i) {
    if (!problem.cameras[i].fixed) {
      offsets[i] = next;
      next += 6;
    }
  }
  return offsets;
}

Eigen::Index parameter_count(const BaProblem& problem) {
  return static_cast<Eigen::Index>(6 * problem.free_camera_count() +
                                   3 * problem.points.size());
}

double parameter_norm(const BaProblem& problem) {
  double sq = 0.0;
  for (const BaCamera& c : problem.cameras) {
    if (!c.fixed) sq += c.pose.translation().squaredNorm();
  }
  for (const Vector3& x : problem.points) sq += x.squaredNorm();
  return std::sqrt(sq);
}

Eigen::Matrix<double, 2, 3> projection_derivative(const CameraModel& camera,
                                                  const Vector3& pc) {
  const double inv_z = 1.0 / pc.z();
  const double a = pc.x() * inv_z;
  const double b = pc.y() * inv_z;
  Eigen::Matrix<double, 2, 3> d_ab;
  d_ab << inv_z, 0.0, -a * inv_z,
          0.0, inv_z, -b * inv_z;

  const auto& k = camera.kappa();
  const double r2 = a * a + b * b;
  const double f = 1.0 + r2 * (k[0] + r2 * (k[1] + r2 * k[2]));
  const double df = k[0] + r2 * (2.0 * k[1] + 3.0 * k[2] * r2);
  Eigen::Matrix2d d_dist;
  d_dist << f + 2.0 * a * a * df, 2.0 * a * b * df,
            2.0 * a * b * df, f + 2.0 * b * b * df;
  const Eigen::Vector2d focal(camera.fx(), camera.fy());
  return focal.asDiagonal() * d_dist * d_ab;
}

// Keeps the baseline between the two gauge cameras at `target` length.
void renormalize_scale(BaProblem* problem, double target) {
  if (problem->scale_gauge != ScaleGauge::kFixedBaseline) return;
  const double current =
      (camera_center(problem->cameras[problem->gauge_camera_b].pose) -
       camera_center(problem->cameras[problem->gauge_camera_a].pose))
          .norm();
  if (!(current > 0.0)) return;
  const double s = target / current;
  for (BaCamera& c : problem->cameras) {
    c.pose = RigidTransform(c.pose.rotation(), s * c.pose.translation());
  }
  for (Vector3& x : problem->points) x *= s;
}

double gauge_baseline(const BaProblem& problem) {
  if (problem.scale_gauge != ScaleGauge::kFixedBaseline) return 0.0;
  return (camera_center(problem.cameras[problem.gauge_camera_b].pose) -
          camera_center(problem.cameras[problem.gauge_camera_a].pose))
      .norm();
}

struct NormalEquations {
  std::vector<Matrix6> camera_blocks;  // U_i, only for free cameras
  std::vector<Vector6> camera_gradient;
  std::vector<Eigen::Matrix3d> point_blocks;  // V_j
  std::vector<Vector3> point_gradient;
  std::vector<Matrix63> coupling;  // W per observation
};

NormalEquations build_normal_equations(
    const BaProblem& problem, const std::vector<ObservationJacobian>& blocks,
    const Eigen::VectorXd& residuals) {
  NormalEquations ne;
  ne.camera_blocks.assign(problem.cameras.size(), Matrix6::Zero());
  ne.camera_gradient.assign(problem.cameras.size(), Vector6::Zero());
  ne.point_blocks.assign(problem.points.size(), Eigen::Matrix3d::Zero());
  ne.point_gradient.assign(problem.points.size(), Vector3::Zero());
  ne.coupling.assign(problem.observations.size(), Matrix63::Zero());
  for (std::size_t k = 0; k < problem.observations.size(); ++k) {
    const Observation& obs = problem.observations[k];
    const Eigen::Vector2d r = residuals.segment<2>(2 * k);
    const ObservationJacobian& jb = blocks[k];
    ne.point_blocks[obs.point] += jb.point.transpose() * jb.point;
    ne.point_gradient[obs.point] += jb.point.transpose() * r;
    if (!problem.cameras[obs.camera].fixed) {
      ne.camera_blocks[obs.camera] += jb.pose.transpose() * jb.pose;
      ne.camera_gradient[obs.camera] += jb.pose.transpose() * r;
      ne.coupling[k] = jb.pose.transpose() * jb.point;
    }
  }
  return ne;
}

double gradient_inf_norm(const BaProblem& problem, const NormalEquations& ne) {
  double g = 0.0;
  for (std::size_t i = 0; i < problem.cameras.size(); ++i) {
    if (!problem.cameras[i].fixed) {
      g = std::max(g, ne.camera_gradient[i].lpNorm<Eigen::Infinity>());
    }
  }
  for (const Vector3& gp : ne.point_gradient) {
    g = std::max(g, gp.lpNorm<Eigen::Infinity>());
  }
  return g;
}

// Solves (J^T J + lambda I) delta = -J^T r with the points eliminated.
std::optional<Eigen::VectorXd> schur_step(const BaProblem& problem,
                                          const NormalEquations& ne,
                                          double lambda) {
  const auto offsets = camera_offsets(problem);
  const Eigen::Index camera_dim =
      static_cast<Eigen::Index>(6 * problem.free_camera_count());
  const Eigen::Index n = parameter_count(problem);

  std::vector<Eigen::Matrix3d> v_inv(problem.points.size());
  for (std::size_t j = 0; j < problem.points.size(); ++j) {
    const Eigen::Matrix3d v =
        ne.point_blocks[j] + lambda * Eigen::Matrix3d::Identity();
    Eigen::LLT<Eigen::Matrix3d> llt(v);
    if (llt.info() != Eigen::Success) return std::nullopt;
    v_inv[j] = llt.solve(Eigen::Matrix3d::Identity());
  }

  // Observations grouped by point, preserving order.
  std::vector<std::vector<std::size_t>> by_point(problem.points.size());
  for (std::size_t k = 0; k < problem.observations.size(); ++k) {
    by_point[problem.observations[k].point].push_back(k);
  }

  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(camera_dim, camera_dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(camera_dim);
  for (std::size_t i = 0; i < problem.cameras.size(); ++i) {
    if (offsets[i] < 0) continue;
    s.block<6, 6>(offsets[i], offsets[i]) =
        ne.camera_blocks[i] + lambda * Matrix6::Identity();
    rhs.segment<6>(offsets[i]) = -ne.camera_gradient[i];
  }
  for (std::size_t j = 0; j < problem.points.size(); ++j) {
    for (std::size_t a : by_point[j]) {
      const Eigen::Index oa = offsets[problem.observations[a].camera];
      if (oa < 0) continue;
      const Matrix63 wv = ne.coupling[a] * v_inv[j];
      rhs.segment<6>(oa) += wv * ne.point_gradient[j];
      for (std::size_t b : by_point[j]) {
        const Eigen::Index ob = offsets[problem.observations[b].camera];
        if (ob < 0) continue;
        s.block<6, 6>(oa, ob) -= wv * ne.coupling[b].transpose();
      }
    }
  }

  Eigen::VectorXd delta = Eigen::VectorXd::Zero(n);
  if (camera_dim > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) return std::nullopt;
    delta.head(camera_dim) = llt.solve(rhs);
  }
  for (std::size_t j = 0; j < problem.points.size(); ++j) {
    Vector3 b = -ne.point_gradient[j];
    for (std::size_t k : by_point[j]) {
      const Eigen::Index o = offsets[problem.observations[k].camera];
      if (o < 0) continue;
      b -= ne.coupling[k].transpose() * delta.segment<6>(o);
    }
    delta.segment<3>(camera_dim + 3 * static_cast<Eigen::Index>(j)) =
        v_inv[j] * b;
  }
  if (!delta.allFinite()) return std::nullopt;
  return delta;
}

std::optional<Eigen::VectorXd> dense_step(const BaProblem& problem,
                                          const NormalEquations&,
                                          double lambda) {
  const Eigen::MatrixXd j = Eigen::MatrixXd(jacobian(problem));
  const Eigen::VectorXd r = residual_vector(problem).residuals;
  Eigen::MatrixXd h = j.transpose() * j;
  h.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Eigen::VectorXd delta = llt.solve(-j.transpose() * r);
  if (!delta.allFinite()) return std::nullopt;
  return delta;
}

template <typename StepFn>
BaResult run_levenberg_marquardt(const BaProblem& initial,
                                 const SolverConfig& config, StepFn step_fn) {
  initial.validate();
  config.validate();

  BaResult result{initial, {}};
  BaProblem& current = result.problem;
  BaReport& report = result.report;
  const double baseline = gauge_baseline(current);

  ResidualEvaluation eval = residual_vector(current);
  if (!eval.valid()) {
    throw Error(ErrorCode::kBehindCamera,
                "initial parameters place a point behind a camera");
  }
  double cost = eval.cost();
  report.initial_cost = cost;
  report.initial_mean_error = mean_reprojection_error(current);
  report.cost_history.push_back(cost);

  double lambda = config.initial_damping;
  std::vector<ObservationJacobian> blocks = jacobian_blocks(current);
  NormalEquations ne = build_normal_equations(current, blocks, eval.residuals);
  bool done = false;
  while (report.iterations < config.max_iterations) {
    const double grad = gradient_inf_norm(current, ne);
    if (grad < config.gradient_tolerance) {
      report.reason = ConvergenceReason::kGradient;
      done = true;
      break;
    }
    ++report.iterations;

    const std::optional<Eigen::VectorXd> delta = step_fn(current, ne, lambda);
    if (!delta) {
      lambda *= config.damping_up;
      if (lambda >= kMaxDamping) {
        throw Error(ErrorCode::kNumericalFailure,
                    "damped normal equations are not solvable");
      }
      continue;
    }
    const double x_norm = parameter_norm(current);
    if (delta->norm() <=
        config.step_tolerance * (x_norm + config.step_tolerance)) {
      report.reason = ConvergenceReason::kStep;
      done = true;
      break;
    }

    BaProblem trial = apply_increment(current, *delta);
    const double trial_cost = reprojection_cost(trial);
    if (trial_cost < cost) {
      renormalize_scale(&trial, baseline);
      current = std::move(trial);
      eval = residual_vector(current);
      cost = eval.cost();
      report.cost_history.push_back(cost);
      ++report.accepted_steps;
      lambda = std::max(lambda / config.damping_down, 1e-15);
      blocks = jacobian_blocks(current);
      ne = build_normal_equations(current, blocks, eval.residuals);
    } else {
      lambda *= config.damping_up;
      if (lambda >= kMaxDamping) {
        if (report.accepted_steps == 0) {
          throw Error(ErrorCode::kNoDescent,
                      "no descent step found from the initial parameters");
        }
        report.reason = ConvergenceReason::kStep;
        done = true;
        break;
      }
    }
  }
  if (!done) report.reason = ConvergenceReason::kIterationCap;
  report.final_cost = cost;
  report.final_mean_error = mean_reprojection_error(current);
  report.final_gradient_norm = gradient_inf_norm(current, ne);
  return result;
}

}  // namespace

std::string_view convergence_reason_name(ConvergenceReason reason) {
  switch (reason) {
    case ConvergenceReason::kGradient: return "gradient";
    case ConvergenceReason::kStep: return "step";
    case ConvergenceReason::kIterationCap: return "iteration_cap";
  }
  return "unknown";
}

void BaProblem::validate() const {
  std::vector<int> seen(points.size(), 0);
  for (const Observation& obs : observations) {
    if (obs.camera >= cameras.size() || obs.point >= points.size()) {
      throw Error(ErrorCode::kInvalidArgument, "observation index out of range");
    }
    ++seen[obs.point];
  }
  for (int count : seen) {
    if (count < 2) {
      throw Error(ErrorCode::kInvalidArgument,
                  "every point must be observed at least twice");
    }
  }
  if (scale_gauge == ScaleGauge::kFixedBaseline) {
    if (gauge_camera_a >= cameras.size() || gauge_camera_b >= cameras.size() ||
        gauge_camera_a == gauge_camera_b) {
      throw Error(ErrorCode::kInvalidArgument, "invalid scale gauge cameras");
    }
    for (const BaCamera& c : cameras) {
      if (c.fixed && c.pose.translation().norm() > 1e-12) {
        throw Error(ErrorCode::kInvalidArgument,
                    "scale gauge requires fixed cameras at the origin");
      }
    }
  }
}

std::size_t BaProblem::free_camera_count() const {
  std::size_t n = 0;
  for (const BaCamera& c : cameras) n += c.fixed ? 0 : 1;
  return n;
}

void SolverConfig::validate() const {
  if (max_iterations <= 0 || !(gradient_tolerance > 0.0) ||
      !(step_tolerance > 0.0) || !(initial_damping > 0.0) ||
      !(damping_up > 1.0) || !(damping_down > 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid solver configuration");
  }
}

double ResidualEvaluation::cost() const {
  if (!valid()) return std::numeric_limits<double>::infinity();
  return residuals.squaredNorm();
}

ResidualEvaluation residual_vector(const BaProblem& problem) {
  ResidualEvaluation eval;
  eval.residuals.resize(2 * static_cast<Eigen::Index>(problem.observations.size()));
  for (std::size_t k = 0; k < problem.observations.size(); ++k) {
    const Observation& obs = problem.observations[k];
    const BaCamera& cam = problem.cameras.at(obs.camera);
    const Vector3& x = problem.points.at(obs.point);
    if (cam.pose.apply(x).z() <= 1e-12) {
      eval.behind.push_back(k);
      eval.residuals.segment<2>(2 * k).setZero();
      continue;
    }
    eval.residuals.segment<2>(2 * k) =
        project(cam.camera, cam.pose, x) - obs.pixel;
  }
  return eval;
}

double reprojection_cost(const BaProblem& problem) {
  return residual_vector(problem).cost();
}

double mean_reprojection_error(const BaProblem& problem) {
  std::vector<View> views;
  views.reserve(problem.cameras.size());
  for (const BaCamera& c : problem.cameras) views.push_back({c.camera, c.pose});
  return mean_reprojection_error(views, problem.points, problem.observations);
}

std::vector<ObservationJacobian> jacobian_blocks(const BaProblem& problem) {
  std::vector<ObservationJacobian> blocks(problem.observations.size());
  for (std::size_t k = 0; k < problem.observations.size(); ++k) {
    const Observation& obs = problem.observations[k];
    const BaCamera& cam = problem.cameras.at(obs.camera);
    const Vector3& x = problem.points.at(obs.point);
    const Vector3 rotated = cam.pose.rotation() * x;
    const Vector3 pc = rotated + cam.pose.translation();
    if (pc.z() <= 1e-12) {
      throw Error(ErrorCode::kBehindCamera, "point is behind its camera");
    }
    const Eigen::Matrix<double, 2, 3> dp = projection_derivative(cam.camera, pc);
    ObservationJacobian& jb = blocks[k];
    jb.point = dp * cam.pose.rotation();
    if (cam.fixed) {
      jb.pose.setZero();
    } else {
      jb.pose.leftCols<3>() = -dp * skew(rotated);
      jb.pose.rightCols<3>() = dp;
    }
  }
  return blocks;
}

Eigen::SparseMatrix<double> jacobian(const BaProblem& problem) {
  const auto blocks = jacobian_blocks(problem);
  const auto offsets = camera_offsets(problem);
  const Eigen::Index camera_dim =
      static_cast<Eigen::Index>(6 * problem.free_camera_count());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(problem.observations.size() * 18);
  for (std::size_t k = 0; k < problem.observations.size(); ++k) {
    const Observation& obs = problem.observations[k];
    const Eigen::Index row = 2 * static_cast<Eigen::Index>(k);
    const Eigen::Index pcol = camera_dim + 3 * static_cast<Eigen::Index>(obs.point);
    for (int r = 0; r < 2; ++r) {
      if (offsets[obs.camera] >= 0) {
        for (int c = 0; c < 6; ++c) {
          triplets.emplace_back(row + r, offsets[obs.camera] + c,
                                blocks[k].pose(r, c));
        }
      }
      for (int c = 0; c < 3; ++c) {
        triplets.emplace_back(row + r, pcol + c, blocks[k].point(r, c));
      }
    }
  }
  Eigen::SparseMatrix<double> j(
      2 * static_cast<Eigen::Index>(problem.observations.size()),
      parameter_count(problem));
  j.setFromTriplets(triplets.begin(), triplets.end());
  return j;
}

BaProblem apply_increment(const BaProblem& problem,
                          const Eigen::VectorXd& delta) {
  if (delta.size() != parameter_count(problem)) {
    throw Error(ErrorCode::kInvalidArgument, "increment has the wrong size");
  }
  BaProblem out = problem;
  const auto offsets = camera_offsets(problem);
  for (std::size_t i = 0; i < out.cameras.size(); ++i) {
    if (offsets[i] < 0) continue;
    const Eigen::Matrix<double, 6, 1> d = delta.segment<6>(offsets[i]);
    const Matrix3 r = rotation_from_axis_angle(d.head<3>()) *
                      out.cameras[i].pose.rotation();
    out.cameras[i].pose = RigidTransform(nearest_rotation(r),
                                         out.cameras[i].pose.translation() +
                                             d.tail<3>());
  }
  const Eigen::Index camera_dim =
      static_cast<Eigen::Index>(6 * problem.free_camera_count());
  for (std::size_t j = 0; j < out.points.size(); ++j) {
    out.points[j] +=
        delta.segment<3>(camera_dim + 3 * static_cast<Eigen::Index>(j));
  }
  return out;
}

Eigen::VectorXd gradient(const BaProblem& problem) {
  const ResidualEvaluation eval = residual_vector(problem);
  if (!eval.valid()) {
    throw Error(ErrorCode::kBehindCamera, "point is behind its camera");
  }
  return jacobian(problem).transpose() * eval.residuals;
}

BaResult solve(const BaProblem& problem, const SolverConfig& config) {
  return run_levenberg_marquardt(problem, config, schur_step);
}

BaResult solve_dense(const BaProblem& problem, const SolverConfig& config) {
  return run_levenberg_marquardt(problem, config, dense_step);
}

}  // namespace hybridcal
