#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "hybridcal/geometry.h"

namespace hybridcal {

// Descriptors are stored one per row. Detection and extraction happen
// upstream; this module only filters candidate matches.
struct DescriptorSet {
  Eigen::MatrixXd descriptors;
  std::vector<PixelPoint> keypoints;

  std::size_t size() const { return keypoints.size(); }
  // Throws InvalidArgument when row count and keypoint count differ.
  void validate() const;
};

struct CandidateMatch {
  std::size_t index_a = 0;
  std::size_t index_b = 0;
  double distance = 0.0;
};

struct RankedMatch {
  CandidateMatch best;
  double second_distance = 0.0;
};

struct Correspondence {
  PixelPoint x1;
  PixelPoint x2;
};

// Exact two nearest neighbours (Euclidean) in `target` for every row of
// `query`. Ties go to the lower target index. Throws Underpopulated when the
// target holds fewer than two descriptors.
std::vector<RankedMatch> nearest_two(const DescriptorSet& query,
                                     const DescriptorSet& target);

// Keeps matches whose best/second distance ratio is below tau. A zero second
// distance keeps the match only if the best distance is zero as well.
std::vector<RankedMatch> ratio_filter(const std::vector<RankedMatch>& matches,
                                      double tau);

// Keeps forward matches (a -> b) whose partner b has a as its best match in
// the backward list (b -> a).
std::vector<RankedMatch> married_filter(
    const std::vector<RankedMatch>& forward,
    const std::vector<RankedMatch>& backward);

// Ratio test in both directions followed by married matching.
std::vector<Correspondence> match_descriptors(const DescriptorSet& a,
                                              const DescriptorSet& b,
                                              double tau);

}  // namespace hybridcal
