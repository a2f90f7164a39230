#pragma once

#include <cstddef>
#include <vector>

#include "tokgeo/neighbors.hpp"
#include "tokgeo/tensor_io.hpp"

namespace tokgeo {

inline constexpr std::size_t kDefaultOverlapK = 2;

// Mean fraction of shared first-k neighbors of each token between two
// graphs over the same tokens.
double neighborhood_overlap(const NeighborGraph& graph_l, const NeighborGraph& graph_m, std::size_t k);

// chi[l] is the overlap between layers l and l + 1.
struct OverlapProfile {
  std::size_t k = kDefaultOverlapK;
  std::vector<double> chi;
};

OverlapProfile overlap_profile(const LayerStack& stack, std::size_t k, unsigned threads = 1);

// Same profile from precomputed per-layer graphs (each with graph.k >= k).
OverlapProfile overlap_profile(const std::vector<NeighborGraph>& graphs, std::size_t k);

}  // namespace tokgeo
