#include "hybridcal/matching.h"

#include <cmath>
#include <limits>
#include <unordered_map>

#include "hybridcal/error.h"

namespace hybridcal {

void DescriptorSet::validate() const {
  if (static_cast<std::size_t>(descriptors.rows()) != keypoints.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "descriptor and keypoint counts differ");
  }
}

std::vector<RankedMatch> nearest_two(const DescriptorSet& query,
                                     const DescriptorSet& target) {
  query.validate();
  target.validate();
  if (target.size() < 2) {
    throw Error(ErrorCode::kUnderpopulated,
                "target needs at least two descriptors");
  }
  if (query.size() > 0 &&
      query.descriptors.cols() != target.descriptors.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "descriptor dimensions differ");
  }

  std::vector<RankedMatch> out(query.size());
  for (Eigen::Index q = 0; q < query.descriptors.rows(); ++q) {
    double best = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    for (Eigen::Index t = 0; t < target.descriptors.rows(); ++t) {
      const double d2 =
          (query.descriptors.row(q) - target.descriptors.row(t)).squaredNorm();
      // Strict comparisons keep the lower index on ties.
      if (d2 < best) {
        second = best;
        best = d2;
        best_index = static_cast<std::size_t>(t);
      } else if (d2 < second) {
        second = d2;
      }
    }
    out[q].best = {static_cast<std::size_t>(q), best_index, std::sqrt(best)};
    out[q].second_distance = std::sqrt(second);
  }
  return out;
}

std::vector<RankedMatch> ratio_filter(const std::vector<RankedMatch>& matches,
                                      double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw Error(ErrorCode::kInvalidTau, "tau must lie in (0, 1)");
  }
  std::vector<RankedMatch> kept;
  for (const RankedMatch& m : matches) {
    const bool keep = m.second_distance == 0.0
                          ? m.best.distance == 0.0
                          : m.best.distance / m.second_distance < tau;
    if (keep) kept.push_back(m);
  }
  return kept;
}

std::vector<RankedMatch> married_filter(
    const std::vector<RankedMatch>& forward,
    const std::vector<RankedMatch>& backward) {
  std::unordered_map<std::size_t, std::size_t> best_of_b;
  for (const RankedMatch& m : backward) {
    best_of_b.emplace(m.best.index_a, m.best.index_b);
  }
  std::vector<RankedMatch> mutual;
  for (const RankedMatch& m : forward) {
    const auto it = best_of_b.find(m.best.index_b);
    if (it != best_of_b.end() && it->second == m.best.index_a) {
      mutual.push_back(m);
    }
  }
  return mutual;
}

std::vector<Correspondence> match_descriptors(const DescriptorSet& a,
                                              const DescriptorSet& b,
                                              double tau) {
  const auto forward = ratio_filter(nearest_two(a, b), tau);
  const auto backward = ratio_filter(nearest_two(b, a), tau);
  std::vector<Correspondence> out;
  for (const RankedMatch& m : married_filter(forward, backward)) {
    out.push_back({a.keypoints[m.best.index_a], b.keypoints[m.best.index_b]});
  }
  return out;
}

}  // namespace hybridcal
