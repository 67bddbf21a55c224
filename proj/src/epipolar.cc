#include "hybridcal/epipolar.h"

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/SVD>

#include "hybridcal/error.h"
#include "hybridcal/triangulation.h"

namespace hybridcal {
namespace {

constexpr std::size_t kSampleSize = 8;

Matrix3 enforce_rank2(const Matrix3& m) {
  Eigen::JacobiSVD<Matrix3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = svd.singularValues();
  // Already singular to rounding: reconstructing would only add error to the
  // small entries that scale with K^-1.
  if (s(2) <= 1e-15 * s(0)) return m;
  s(2) = 0.0;
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

// Deterministic per-iteration sample. Drawing from (seed, iteration) only
// keeps runs reproducible no matter how iterations are scheduled.
std::array<std::size_t, kSampleSize> draw_sample(std::uint64_t seed,
                                                 std::uint64_t iteration,
                                                 std::size_t n) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration),
                    static_cast<std::uint32_t>(iteration >> 32)};
  std::mt19937_64 rng(seq);
  std::array<std::size_t, kSampleSize> sample{};
  std::size_t filled = 0;
  while (filled < kSampleSize) {
    const std::size_t candidate = static_cast<std::size_t>(rng() % n);
    bool repeated = false;
    for (std::size_t i = 0; i < filled; ++i) {
      repeated = repeated || sample[i] == candidate;
    }
    if (!repeated) sample[filled++] = candidate;
  }
  return sample;
}

std::size_t score(const Matrix3& F, std::span<const Correspondence> corrs,
                  double threshold_sq, std::vector<bool>* mask) {
  std::size_t count = 0;
  mask->assign(corrs.size(), false);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (sampson_distance(F, corrs[i]) < threshold_sq) {
      (*mask)[i] = true;
      ++count;
    }
  }
  return count;
}

std::vector<Correspondence> select(std::span<const Correspondence> corrs,
                                   const std::vector<bool>& mask) {
  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (mask[i]) out.push_back(corrs[i]);
  }
  return out;
}

}  // namespace

FundamentalMatrix FundamentalMatrix::from_matrix(const Matrix3& m) {
  if (!m.allFinite() || m.norm() == 0.0) {
    throw Error(ErrorCode::kDegenerate, "fundamental matrix is zero");
  }
  Matrix3 f = enforce_rank2(m);
  f /= f.norm();
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  f.cwiseAbs().maxCoeff(&row, &col);
  if (f(row, col) < 0.0) f = -f;
  return FundamentalMatrix(f);
}

NormalizedPoints normalize_points(std::span<const PixelPoint> points) {
  if (points.size() < 2) {
    throw Error(ErrorCode::kDegenerate, "need at least two points");
  }
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const PixelPoint& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  double mean_distance = 0.0;
  for (const PixelPoint& p : points) mean_distance += (p - centroid).norm();
  mean_distance /= static_cast<double>(points.size());
  if (!(mean_distance > 0.0) || !std::isfinite(mean_distance)) {
    throw Error(ErrorCode::kDegenerate, "all points coincide");
  }

  const double scale = std::sqrt(2.0) / mean_distance;
  NormalizedPoints out;
  out.transform << scale, 0.0, -scale * centroid.x(),
                   0.0, scale, -scale * centroid.y(),
                   0.0, 0.0, 1.0;
  out.points.reserve(points.size());
  for (const PixelPoint& p : points) out.points.push_back(scale * (p - centroid));
  return out;
}

FundamentalMatrix eight_point(std::span<const Correspondence> corrs) {
  if (corrs.size() < kSampleSize) {
    throw Error(ErrorCode::kTooFewPoints,
                "eight-point needs at least 8 correspondences");
  }
  std::vector<PixelPoint> first;
  std::vector<PixelPoint> second;
  first.reserve(corrs.size());
  second.reserve(corrs.size());
  for (const Correspondence& c : corrs) {
    first.push_back(c.x1);
    second.push_back(c.x2);
  }
  const NormalizedPoints n1 = normalize_points(first);
  const NormalizedPoints n2 = normalize_points(second);

  Eigen::Matrix<double, Eigen::Dynamic, 9> a(corrs.size(), 9);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Eigen::Vector3d p = n1.points[i].homogeneous();
    const Eigen::Vector3d q = n2.points[i].homogeneous();
    // Row-major vec(F): x2^T F x1 = sum_ij q_i F_ij p_j.
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) a(i, 3 * r + c) = q(r) * p(c);
    }
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv.size() < 8 || sv(7) < 1e-10 * sv(0)) {
    throw Error(ErrorCode::kDegenerate, "design matrix has rank below 8");
  }
  const Eigen::Matrix<double, 9, 1> f = svd.matrixV().col(8);
  Matrix3 normalized_f;
  normalized_f << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
  normalized_f = enforce_rank2(normalized_f);
  return FundamentalMatrix::from_matrix(n2.transform.transpose() *
                                        normalized_f * n1.transform);
}

FundamentalMatrix fundamental_from_calibration(const Matrix3& K1,
                                               const Matrix3& K2,
                                               const RigidTransform& relative) {
  if (relative.translation().norm() < 1e-12) {
    throw Error(ErrorCode::kZeroBaseline, "relative translation is zero");
  }
  const Matrix3 essential = skew(relative.translation()) * relative.rotation();
  return FundamentalMatrix::from_matrix(K2.inverse().transpose() * essential *
                                        K1.inverse());
}

double sampson_distance(const Matrix3& F, const Correspondence& c) {
  const Eigen::Vector3d x1 = c.x1.homogeneous();
  const Eigen::Vector3d x2 = c.x2.homogeneous();
  const Eigen::Vector3d fx1 = F * x1;
  const Eigen::Vector3d ftx2 = F.transpose() * x2;
  const double numerator = x2.dot(fx1);
  const double denominator = fx1(0) * fx1(0) + fx1(1) * fx1(1) +
                             ftx2(0) * ftx2(0) + ftx2(1) * ftx2(1);
  if (denominator == 0.0) return std::numeric_limits<double>::infinity();
  return numerator * numerator / denominator;
}

void RansacConfig::validate() const {
  if (!(threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "RANSAC threshold must be > 0");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "RANSAC confidence must lie in (0, 1)");
  }
  if (max_iterations <= 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "RANSAC max_iterations must be positive");
  }
}

RansacResult ransac_fundamental(std::span<const Correspondence> corrs,
                                const RansacConfig& config) {
  config.validate();
  if (corrs.size() < kSampleSize) {
    throw Error(ErrorCode::kTooFewPoints, "RANSAC needs at least 8 points");
  }
  const double threshold_sq = config.threshold * config.threshold;
  const double n = static_cast<double>(corrs.size());

  std::vector<bool> best_mask;
  std::vector<bool> mask;
  std::size_t best_count = 0;
  double required = static_cast<double>(config.max_iterations);
  int iteration = 0;
  std::array<Correspondence, kSampleSize> sample;
  for (; iteration < config.max_iterations && iteration < required;
       ++iteration) {
    const auto indices = draw_sample(config.seed, iteration, corrs.size());
    for (std::size_t i = 0; i < kSampleSize; ++i) sample[i] = corrs[indices[i]];
    Matrix3 f;
    try {
      f = eight_point(sample).matrix();
    } catch (const Error&) {
      continue;
    }
    const std::size_t count = score(f, corrs, threshold_sq, &mask);
    if (count > best_count) {
      best_count = count;
      best_mask = mask;
      const double w = static_cast<double>(count) / n;
      const double all_good = std::pow(w, static_cast<double>(kSampleSize));
      if (all_good >= 1.0) {
        required = 0.0;
      } else {
        // log1p keeps tiny inlier ratios from collapsing the bound to -inf.
        const double denom = std::log1p(-all_good);
        if (denom < 0.0) {
          required = std::log1p(-config.confidence) / denom;
        }
      }
    }
  }
  if (best_count < kSampleSize) {
    throw Error(ErrorCode::kNoConsensus, "fewer than 8 inliers found");
  }

  // Refit on the consensus set until the mask is stable, so the returned
  // mask is always the one induced by the returned matrix.
  FundamentalMatrix best = eight_point(select(corrs, best_mask));
  std::size_t count = score(best.matrix(), corrs, threshold_sq, &mask);
  for (int round = 0; round < 5 && mask != best_mask; ++round) {
    if (count < kSampleSize) break;
    best_mask = mask;
    best = eight_point(select(corrs, best_mask));
    count = score(best.matrix(), corrs, threshold_sq, &mask);
  }
  if (count < kSampleSize) {
    throw Error(ErrorCode::kNoConsensus, "refit lost the consensus set");
  }
  return {best, mask, count, iteration};
}

std::array<RigidTransform, 4> essential_candidates(const Matrix3& E) {
  Eigen::JacobiSVD<Matrix3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 u = svd.matrixU();
  Matrix3 v = svd.matrixV();
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;
  Matrix3 w;
  w << 0.0, -1.0, 0.0,
       1.0, 0.0, 0.0,
       0.0, 0.0, 1.0;
  const Matrix3 r1 = nearest_rotation(u * w * v.transpose());
  const Matrix3 r2 = nearest_rotation(u * w.transpose() * v.transpose());
  const Vector3 t = u.col(2).normalized();
  return {RigidTransform(r1, t), RigidTransform(r1, -t), RigidTransform(r2, t),
          RigidTransform(r2, -t)};
}

PoseHypothesis recover_pose(const FundamentalMatrix& F, const Matrix3& K1,
                            const Matrix3& K2,
                            std::span<const Correspondence> corrs) {
  if (corrs.empty()) {
    throw Error(ErrorCode::kEmptyResult, "pose recovery needs a correspondence");
  }
  Matrix3 essential = K2.transpose() * F.matrix() * K1;
  {
    Eigen::JacobiSVD<Matrix3> svd(essential,
                                  Eigen::ComputeFullU | Eigen::ComputeFullV);
    essential = svd.matrixU() * Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal() *
                svd.matrixV().transpose();
  }
  const auto candidates = essential_candidates(essential);
  const Matrix3 k1_inv = K1.inverse();
  const Matrix3 k2_inv = K2.inverse();
  const RigidTransform identity;

  PoseHypothesis out;
  for (const Correspondence& c : corrs) {
    const NormalizedPoint n1 = (k1_inv * c.x1.homogeneous()).hnormalized();
    const NormalizedPoint n2 = (k2_inv * c.x2.homogeneous()).hnormalized();
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      const Eigen::Vector4d h =
          triangulate_homogeneous(identity, candidates[k], n1, n2);
      if (std::abs(h(3)) < 1e-12) continue;
      const Vector3 x = h.hnormalized();
      if (x.z() > 0.0 && candidates[k].apply(x).z() > 0.0) {
        ++out.front_counts[k];
      }
    }
  }

  int winner = 0;
  for (int k = 1; k < 4; ++k) {
    if (out.front_counts[k] > out.front_counts[winner]) winner = k;
  }
  for (int k = 0; k < 4; ++k) {
    if (k != winner && out.front_counts[k] == out.front_counts[winner]) {
      throw Error(ErrorCode::kChiralityAmbiguous,
                  "two pose candidates share the maximum front count");
    }
  }
  out.winner = winner;
  out.rotation = candidates[winner].rotation();
  out.translation = candidates[winner].translation();
  return out;
}

Eigen::Vector3d epipolar_line(const Matrix3& F, const PixelPoint& x1) {
  const Eigen::Vector3d xh = x1.homogeneous();
  const Eigen::Vector3d line = F * xh;
  const double n = std::hypot(line(0), line(1));
  if (!(n > 1e-12 * F.norm() * xh.norm())) {
    throw Error(ErrorCode::kDegenerateLine, "point is the epipole");
  }
  return line / n;
}

double point_line_distance(const Eigen::Vector3d& line, const PixelPoint& p) {
  return std::abs(line.dot(p.homogeneous())) / line.head<2>().norm();
}

}  // namespace hybridcal
