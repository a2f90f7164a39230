#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tokgeo/neighbors.hpp"

namespace tokgeo {

enum class IdMethod { kTwoNN, kGride };

std::string_view to_string(IdMethod method) noexcept;

struct IdEstimate {
  double d_hat = 0.0;
  std::size_t n1 = 1;
  std::size_t n2 = 2;
  std::size_t n_used = 0;      // ratios that entered the estimate
  std::size_t n_excluded = 0;  // zero-distance tokens plus ratios equal to 1
  IdMethod method = IdMethod::kGride;
};

// Lower end of the likelihood search domain; the upper end is 2 * ambient_dim.
inline constexpr double kMinDimension = 1e-6;
// Bisection stops once the bracket is narrower than this.
inline constexpr double kDimensionTolerance = 1e-8;

// Closed form (n - 1) / sum(log mu) over the (1, 2) ratios.
IdEstimate twonn(const RatioSet& ratios);

// Maximum-likelihood dimension under the ratio density below. When
// n2 = n1 + 1 the score equation is linear in 1/d and is solved in closed
// form; otherwise see gride_numeric.
IdEstimate gride(const RatioSet& ratios);

// Always maximizes numerically: brackets the score's sign change by doubling
// from d = 1e-3, then bisects. Throws EstimatorFailure when the maximum sits
// on the boundary of (kMinDimension, 2 * ambient_dim].
IdEstimate gride_numeric(const RatioSet& ratios);

// Density of mu = r_{n2} / r_{n1} for locally uniform points of dimension d,
// supported on mu > 1.
double gride_density(double mu, double d, std::size_t n1, std::size_t n2);

// Log-likelihood of i.i.d. ratios, and its derivative in d.
double gride_log_likelihood(std::span<const double> mu, double d, std::size_t n1, std::size_t n2);
double gride_score(std::span<const double> mu, double d, std::size_t n1, std::size_t n2);

// One entry per range scaling s, estimated at (n1, n2) = (s / 2, s).
struct ScaleEntry {
  std::size_t n1 = 1;
  std::size_t n2 = 2;
  std::optional<IdEstimate> estimate;
  std::string error;  // set when estimate is empty
};

struct ScaleSweep {
  std::vector<ScaleEntry> entries;

  const ScaleEntry* at_scaling(std::size_t n2) const noexcept;
};

// Scalings 2, 4, ..., max_scaling.
ScaleSweep scale_sweep(const NeighborGraph& graph, std::size_t max_scaling);
// Explicit list of power-of-two scalings, in the given order.
ScaleSweep scale_sweep(const NeighborGraph& graph, std::span<const std::size_t> scalings);

bool is_power_of_two(std::size_t v) noexcept;

}  // namespace tokgeo
