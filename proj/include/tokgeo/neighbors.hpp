#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tokgeo/tensor_io.hpp"

namespace tokgeo {

// Exact k-nearest-neighbor lists for every token of one cloud. Rows are
// sorted by ascending Euclidean distance, ties broken by ascending token
// index, and never contain the query token itself.
struct NeighborGraph {
  std::size_t k = 0;
  std::size_t n_tokens = 0;
  std::size_t ambient_dim = 0;
  std::vector<std::uint32_t> indices;  // n_tokens x k
  std::vector<double> distances;       // n_tokens x k

  std::span<const std::uint32_t> neighbors(std::size_t i) const noexcept {
    return std::span<const std::uint32_t>(indices).subspan(i * k, k);
  }
  std::span<const double> dists(std::size_t i) const noexcept {
    return std::span<const double>(distances).subspan(i * k, k);
  }

  // The first `k_prefix` columns; equal to knn(cloud, k_prefix).
  NeighborGraph truncated(std::size_t k_prefix) const;
};

// Brute-force exact kNN. `threads` splits the query rows; the result does not
// depend on the thread count.
NeighborGraph knn(const PointCloud& cloud, std::size_t k, unsigned threads = 1);

// Distance ratios r_{i,n2} / r_{i,n1}. Tokens whose n1-th neighbor sits at
// distance zero are left out and counted in `degenerate`.
struct RatioSet {
  std::size_t n1 = 1;
  std::size_t n2 = 2;
  std::size_t n_tokens = 0;
  std::size_t degenerate = 0;
  std::size_t ambient_dim = 0;
  std::vector<double> mu;
};

RatioSet mu_ratios(const NeighborGraph& graph, std::size_t n1, std::size_t n2);

struct CosineSimilarity {
  double mean = 0.0;
  std::size_t n_pairs = 0;
  std::size_t zero_rows = 0;
};

// Mean cosine over all unordered pairs of distinct nonzero rows.
CosineSimilarity mean_cosine_similarity(const PointCloud& cloud);

// Apex angle at each token between its first and second neighbor.
struct AngleStats {
  std::vector<double> cosines;  // one per token with nonzero displacements
  double mean_angle_deg = 0.0;
  std::size_t excluded = 0;
};

AngleStats nn_angles(const PointCloud& cloud, const NeighborGraph& graph);

}  // namespace tokgeo
