#include "tokgeo/overlap.hpp"

#include <algorithm>
#include <iterator>

#include "tokgeo/error.hpp"

namespace tokgeo {

double neighborhood_overlap(const NeighborGraph& graph_l, const NeighborGraph& graph_m, std::size_t k) {
  require(k >= 1, ErrorCode::kInvalidArgument, "k must be positive");
  require(graph_l.n_tokens == graph_m.n_tokens, ErrorCode::kShapeMismatch,
          "overlap needs graphs over the same tokens");
  require(k <= graph_l.k && k <= graph_m.k, ErrorCode::kInvalidArgument, "k exceeds a graph's neighbor count");
  require(graph_l.n_tokens > 0, ErrorCode::kInvalidArgument, "empty graphs");

  const std::size_t n = graph_l.n_tokens;
  std::vector<std::uint32_t> a(k), b(k), common;
  common.reserve(k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto nl = graph_l.neighbors(i).first(k);
    const auto nm = graph_m.neighbors(i).first(k);
    std::copy(nl.begin(), nl.end(), a.begin());
    std::copy(nm.begin(), nm.end(), b.begin());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    common.clear();
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    total += static_cast<double>(common.size()) / static_cast<double>(k);
  }
  return total / static_cast<double>(n);
}

OverlapProfile overlap_profile(const std::vector<NeighborGraph>& graphs, std::size_t k) {
  require(k >= 1, ErrorCode::kInvalidArgument, "k must be positive");
  require(graphs.size() >= 2, ErrorCode::kInvalidArgument, "overlap profile needs at least 2 layers");
  OverlapProfile p;
  p.k = k;
  for (std::size_t l = 0; l + 1 < graphs.size(); ++l)
    p.chi.push_back(neighborhood_overlap(graphs[l], graphs[l + 1], k));
  return p;
}

OverlapProfile overlap_profile(const LayerStack& stack, std::size_t k, unsigned threads) {
  require(k >= 1, ErrorCode::kInvalidArgument, "k must be positive");
  require(stack.n_layers() >= 2, ErrorCode::kInvalidArgument, "overlap profile needs at least 2 layers");
  std::vector<NeighborGraph> graphs;
  graphs.reserve(stack.n_layers());
  for (const auto& layer : stack.layers) graphs.push_back(knn(layer, k, threads));
  return overlap_profile(graphs, k);
}

}  // namespace tokgeo
