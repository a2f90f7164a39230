#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tokgeo/id_estimators.hpp"
#include "tokgeo/tensor_io.hpp"

namespace tokgeo {

enum class Metric { kId, kOverlap, kCosine, kAngles };

std::string_view to_string(Metric m) noexcept;
Metric parse_metric(std::string_view name);

// What to compute per layer.
struct ProfileOptions {
  std::set<Metric> metrics{Metric::kId, Metric::kOverlap, Metric::kCosine, Metric::kAngles};
  std::vector<std::size_t> scalings{2};  // GRIDE range scalings
  std::vector<std::size_t> knn{2};       // overlap neighborhood sizes
  unsigned threads = 1;

  void validate() const;
};

struct LayerGeometry {
  std::size_t layer = 0;
  std::optional<IdEstimate> twonn;  // absent when not requested or failed
  ScaleSweep id_estimates;
  std::optional<double> mean_cosine;
  std::map<std::size_t, double> overlap_next;  // k -> chi(l, l+1); empty for the final layer
  std::optional<double> angle_mean_deg;
  std::size_t degenerate_count = 0;  // tokens whose first neighbor is at distance zero
};

struct GeometryProfile {
  std::string prompt_id;
  std::optional<unsigned> shuffle_index;
  std::size_t n_tokens = 0;
  std::size_t dim = 0;
  std::vector<LayerGeometry> per_layer;

  // log of the GRIDE estimate at `scaling` for each layer; nullopt where the
  // estimate failed or was not computed.
  std::vector<std::optional<double>> log_id(std::size_t scaling) const;
};

GeometryProfile compute_profile(const LayerStack& stack, const ProfileOptions& options);

}  // namespace tokgeo
