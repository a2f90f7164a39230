#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tokgeo/entropy.hpp"
#include "tokgeo/profile.hpp"

namespace tokgeo {

struct Correlation {
  double rho = 0.0;
  double p = 1.0;  // two-sided, from the t statistic with n - 2 degrees of freedom
  std::size_t n = 0;
};

// Throws kUndefinedCorrelation when either input has zero variance and
// kInsufficientData below three pairs.
Correlation pearson(std::span<const double> x, std::span<const double> y);
Correlation spearman(std::span<const double> x, std::span<const double> y);

// 1-based ranks; tied values share the mean of their positions.
std::vector<double> mid_ranks(std::span<const double> v);

double student_t_cdf(double t, double df);

// Two-sided p-value of a sample correlation rho over n pairs.
double correlation_pvalue(double rho, std::size_t n);

// Two-sided permutation p-value: (1 + #{|rho_perm| >= |rho_obs|}) / (1 + n_permutations).
double permutation_pvalue(std::span<const double> x, std::span<const double> y, std::size_t n_permutations,
                          std::uint64_t seed, bool use_ranks = false);

// Standard deviation of the Pearson coefficient over bootstrap resamples of
// the pairs. Resamples with zero variance are skipped.
double bootstrap_pearson_std(std::span<const double> x, std::span<const double> y, std::size_t n_resamples,
                             std::uint64_t seed);

struct LayerCorrelation {
  std::size_t layer = 0;
  std::size_t n = 0;
  std::optional<double> pearson;
  std::optional<double> spearman;
  std::optional<double> p_pearson;
  std::optional<double> p_spearman;
  std::optional<double> p_permutation;
  std::optional<double> bootstrap_std;
  std::string flag;  // non-empty when the layer could not be evaluated
};

struct CorrelationReport {
  std::string x_label;
  std::string y_label;
  std::vector<LayerCorrelation> per_layer;
};

struct CorrelationOptions {
  std::size_t scaling = 2;
  bool log_id = true;            // correlate log(ID) rather than raw ID
  std::size_t bootstrap = 1000;  // 0 disables the resampled spread
  std::size_t permutations = 0;  // 0 disables the permutation p-value
  std::uint64_t seed = 0;
};

// x[prompt][layer] against y[prompt], layer by layer. Missing x values drop
// that prompt from that layer only.
CorrelationReport layerwise_correlation(const std::vector<std::vector<std::optional<double>>>& x,
                                        std::span<const double> y, const CorrelationOptions& options);

// ID of each layer (GRIDE at options.scaling) against the prompt's average
// cross-entropy loss.
CorrelationReport layerwise_id_loss_correlation(std::span<const GeometryProfile> profiles,
                                                std::span<const EntropyReport> entropies,
                                                const CorrelationOptions& options);

}  // namespace tokgeo
