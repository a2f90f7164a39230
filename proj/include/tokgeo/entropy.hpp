#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tokgeo/tensor_io.hpp"

namespace tokgeo {

// All entropies and losses are in nats.

// Mean negative log-likelihood of the true next tokens.
double avg_cross_entropy(const LogitRecord& rec);

// Entropy of softmax(z). Entries equal to -inf are masked and carry no
// weight. Stabilized by shifting with max(z).
double softmax_entropy(std::span<const float> z);
double softmax_entropy(std::span<const double> z);

struct EntropyReport {
  double avg_cross_entropy = 0.0;
  double avg_contextual_entropy = 0.0;  // mean of per_token_softmax_entropy
  std::vector<double> per_token_softmax_entropy;
};

EntropyReport contextual_entropy_report(const LogitRecord& rec);

enum class ToyModel { kUnitBox, kDirichlet };

std::string_view to_string(ToyModel model) noexcept;
ToyModel parse_toy_model(std::string_view name);

struct ToyResult {
  ToyModel model = ToyModel::kUnitBox;
  std::size_t d_m = 1;
  double expected_entropy = 0.0;
  double reference = 0.0;  // log d_m (unit box) or H_{d_m} - 1 (Dirichlet)
  std::size_t n_samples = 0;
  double std_error = 0.0;
};

// Monte Carlo samples are drawn in fixed-size chunks, each with its own
// derived seed, and reduced in chunk order: results depend only on the seed.
inline constexpr std::size_t kMonteCarloChunk = 4096;

// Expected softmax entropy for logits drawn uniformly from [0,1]^d_m.
ToyResult unit_box_expected_entropy(std::size_t d_m, std::size_t n_samples, std::uint64_t seed,
                                    unsigned threads = 1);

// Exact expected entropy of a uniform point on the d_m-simplex: H_{d_m} - 1.
double dirichlet_expected_entropy(std::size_t d_m);

// Monte Carlo estimate of the same quantity from normalized exponentials.
ToyResult dirichlet_mc_entropy(std::size_t d_m, std::size_t n_samples, std::uint64_t seed,
                               unsigned threads = 1);

inline constexpr double kNatsToBits = 1.4426950408889634;  // 1 / ln 2

}  // namespace tokgeo
