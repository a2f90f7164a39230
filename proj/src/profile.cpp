#include "tokgeo/profile.hpp"

#include <algorithm>
#include <cmath>

#include "tokgeo/error.hpp"
#include "tokgeo/neighbors.hpp"
#include "tokgeo/overlap.hpp"

namespace tokgeo {

std::string_view to_string(Metric m) noexcept {
  switch (m) {
    case Metric::kId: return "id";
    case Metric::kOverlap: return "no";
    case Metric::kCosine: return "cosine";
    case Metric::kAngles: return "angles";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  if (name == "id") return Metric::kId;
  if (name == "no") return Metric::kOverlap;
  if (name == "cosine") return Metric::kCosine;
  if (name == "angles") return Metric::kAngles;
  fail(ErrorCode::kInvalidArgument, "unknown metric '" + std::string(name) + "'");
}

void ProfileOptions::validate() const {
  require(!metrics.empty(), ErrorCode::kInvalidArgument, "no metrics selected");
  if (metrics.contains(Metric::kId)) {
    require(!scalings.empty(), ErrorCode::kInvalidArgument, "id metric needs at least one scaling");
    for (std::size_t s : scalings)
      require(s >= 2 && is_power_of_two(s), ErrorCode::kInvalidArgument, "scalings must be powers of two >= 2");
  }
  if (metrics.contains(Metric::kOverlap)) {
    require(!knn.empty(), ErrorCode::kInvalidArgument, "overlap metric needs at least one k");
    for (std::size_t k : knn)
      require(k >= 1 && k <= 64, ErrorCode::kInvalidArgument, "knn values must lie in 1..64");
  }
}

std::vector<std::optional<double>> GeometryProfile::log_id(std::size_t scaling) const {
  std::vector<std::optional<double>> out;
  out.reserve(per_layer.size());
  for (const auto& l : per_layer) {
    const ScaleEntry* e = l.id_estimates.at_scaling(scaling);
    if (e && e->estimate) {
      out.emplace_back(std::log(e->estimate->d_hat));
    } else {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

GeometryProfile compute_profile(const LayerStack& stack, const ProfileOptions& options) {
  options.validate();
  stack.validate();
  const bool want_id = options.metrics.contains(Metric::kId);
  const bool want_no = options.metrics.contains(Metric::kOverlap);
  const bool want_cos = options.metrics.contains(Metric::kCosine);
  const bool want_angles = options.metrics.contains(Metric::kAngles);

  // One graph per layer, wide enough for every consumer; narrower graphs are
  // its prefixes.
  std::size_t k_needed = 0;
  if (want_id) k_needed = std::max(k_needed, *std::max_element(options.scalings.begin(), options.scalings.end()));
  if (want_no) k_needed = std::max(k_needed, *std::max_element(options.knn.begin(), options.knn.end()));
  if (want_angles) k_needed = std::max<std::size_t>(k_needed, 2);

  GeometryProfile p;
  p.prompt_id = stack.prompt_id;
  p.n_tokens = stack.n_tokens;
  p.dim = stack.dim;
  std::vector<NeighborGraph> graphs;
  if (k_needed > 0) {
    require(k_needed < stack.n_tokens, ErrorCode::kInvalidArgument,
            "requested neighborhood " + std::to_string(k_needed) + " needs more than " +
                std::to_string(stack.n_tokens) + " tokens");
    graphs.reserve(stack.n_layers());
    for (const auto& layer : stack.layers) graphs.push_back(knn(layer, k_needed, options.threads));
  }

  for (std::size_t l = 0; l < stack.n_layers(); ++l) {
    LayerGeometry g;
    g.layer = l;
    if (!graphs.empty()) {
      for (std::size_t i = 0; i < stack.n_tokens; ++i)
        if (graphs[l].dists(i)[0] == 0.0) ++g.degenerate_count;
    }
    if (want_id) {
      try {
        g.twonn = twonn(mu_ratios(graphs[l], 1, 2));
      } catch (const Error&) {
        g.twonn.reset();
      }
      g.id_estimates = scale_sweep(graphs[l], options.scalings);
    }
    // A layer of zero rows or coincident points has no cosine or angle; the
    // entry stays empty instead of failing the whole prompt.
    if (want_cos) {
      try {
        g.mean_cosine = mean_cosine_similarity(stack.layers[l]).mean;
      } catch (const Error&) {
      }
    }
    if (want_angles) {
      try {
        g.angle_mean_deg = nn_angles(stack.layers[l], graphs[l]).mean_angle_deg;
      } catch (const Error&) {
      }
    }
    if (want_no && l + 1 < stack.n_layers())
      for (std::size_t k : options.knn) g.overlap_next[k] = neighborhood_overlap(graphs[l], graphs[l + 1], k);
    p.per_layer.push_back(std::move(g));
  }
  return p;
}

}  // namespace tokgeo
