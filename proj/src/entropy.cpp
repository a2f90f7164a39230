#include "tokgeo/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>

#include "tokgeo/error.hpp"
#include "tokgeo/rng.hpp"

namespace tokgeo {
namespace {

template <typename T>
double softmax_entropy_impl(std::span<const T> z) {
  double z_max = -std::numeric_limits<double>::infinity();
  for (T v : z) {
    require(!std::isnan(v) && v != std::numeric_limits<T>::infinity(), ErrorCode::kNonFinite,
            "logits must be finite or -inf");
    z_max = std::max(z_max, static_cast<double>(v));
  }
  require(z_max > -std::numeric_limits<double>::infinity(), ErrorCode::kInvalidArgument,
          "every logit is masked");
  // S = log sum e^{y} - sum y e^{y} / sum e^{y} with y = z - max(z).
  double norm = 0.0, weighted = 0.0;
  for (T v : z) {
    if (v == -std::numeric_limits<T>::infinity()) continue;
    const double y = static_cast<double>(v) - z_max;
    const double w = std::exp(y);
    norm += w;
    weighted += y * w;
  }
  return std::max(0.0, std::log(norm) - weighted / norm);
}

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
};

// Runs `sample(rng)` n times across fixed chunks and returns mean and
// standard error.
std::pair<double, double> chunked_monte_carlo(std::size_t n, std::uint64_t seed, unsigned threads,
                                              const std::function<double(Rng&)>& sample) {
  const std::size_t n_chunks = (n + kMonteCarloChunk - 1) / kMonteCarloChunk;
  std::vector<Moments> chunks(n_chunks);
  auto run = [&](std::size_t c) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    const std::size_t count = std::min(kMonteCarloChunk, n - c * kMonteCarloChunk);
    Moments m;
    for (std::size_t i = 0; i < count; ++i) {
      const double v = sample(rng);
      m.sum += v;
      m.sum_sq += v * v;
    }
    chunks[c] = m;
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_chunks)));
  if (workers == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run(c);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < n_chunks; c += workers) run(c);
      });
  }
  Moments total;
  for (const auto& m : chunks) {
    total.sum += m.sum;
    total.sum_sq += m.sum_sq;
  }
  const double nn = static_cast<double>(n);
  const double mean = total.sum / nn;
  const double var = n > 1 ? std::max(0.0, (total.sum_sq - nn * mean * mean) / (nn - 1.0)) : 0.0;
  return {mean, std::sqrt(var / nn)};
}

}  // namespace

double softmax_entropy(std::span<const float> z) { return softmax_entropy_impl(z); }
double softmax_entropy(std::span<const double> z) { return softmax_entropy_impl(z); }

double avg_cross_entropy(const LogitRecord& rec) {
  require(rec.n_tokens > 0 && rec.true_next_loglik.size() == rec.n_tokens, ErrorCode::kInvalidArgument,
          "log-likelihoods missing");
  double s = 0.0;
  for (float l : rec.true_next_loglik) s += l;
  return -s / static_cast<double>(rec.n_tokens);
}

EntropyReport contextual_entropy_report(const LogitRecord& rec) {
  require(rec.n_tokens > 0 && rec.vocab_size > 0, ErrorCode::kInvalidArgument, "empty logit record");
  require(rec.logits.size() == rec.n_tokens * rec.vocab_size, ErrorCode::kShapeMismatch,
          "logits payload does not match n_tokens x vocab_size");
  EntropyReport r;
  r.per_token_softmax_entropy.reserve(rec.n_tokens);
  double s = 0.0;
  for (std::size_t i = 0; i < rec.n_tokens; ++i) {
    const double h = softmax_entropy(rec.row(i));
    r.per_token_softmax_entropy.push_back(h);
    s += h;
  }
  r.avg_contextual_entropy = s / static_cast<double>(rec.n_tokens);
  r.avg_cross_entropy = avg_cross_entropy(rec);
  return r;
}

std::string_view to_string(ToyModel model) noexcept {
  return model == ToyModel::kUnitBox ? "unit-box" : "dirichlet";
}

ToyModel parse_toy_model(std::string_view name) {
  if (name == "unit-box") return ToyModel::kUnitBox;
  if (name == "dirichlet") return ToyModel::kDirichlet;
  fail(ErrorCode::kInvalidArgument, "unknown toy model '" + std::string(name) + "'");
}

ToyResult unit_box_expected_entropy(std::size_t d_m, std::size_t n_samples, std::uint64_t seed,
                                    unsigned threads) {
  require(d_m >= 1, ErrorCode::kInvalidArgument, "d_m must be positive");
  require(n_samples > 0, ErrorCode::kInvalidArgument, "n_samples must be positive");
  ToyResult r;
  r.model = ToyModel::kUnitBox;
  r.d_m = d_m;
  r.n_samples = n_samples;
  r.reference = std::log(static_cast<double>(d_m));
  if (d_m == 1) return r;  // one active logit: p = 1, S = 0 for every draw
  const auto [mean, se] = chunked_monte_carlo(n_samples, seed, threads, [d_m](Rng& rng) {
    thread_local std::vector<double> z;
    z.resize(d_m);
    for (double& v : z) v = rng.uniform();
    return softmax_entropy(std::span<const double>(z));
  });
  r.expected_entropy = mean;
  r.std_error = se;
  return r;
}

double dirichlet_expected_entropy(std::size_t d_m) {
  require(d_m >= 1, ErrorCode::kInvalidArgument, "d_m must be positive");
  // Smallest terms first.
  double h = 0.0;
  for (std::size_t k = d_m; k >= 1; --k) h += 1.0 / static_cast<double>(k);
  return h - 1.0;
}

ToyResult dirichlet_mc_entropy(std::size_t d_m, std::size_t n_samples, std::uint64_t seed, unsigned threads) {
  require(d_m >= 1, ErrorCode::kInvalidArgument, "d_m must be positive");
  require(n_samples > 0, ErrorCode::kInvalidArgument, "n_samples must be positive");
  ToyResult r;
  r.model = ToyModel::kDirichlet;
  r.d_m = d_m;
  r.n_samples = n_samples;
  r.reference = dirichlet_expected_entropy(d_m);
  if (d_m == 1) return r;
  const auto [mean, se] = chunked_monte_carlo(n_samples, seed, threads, [d_m](Rng& rng) {
    thread_local std::vector<double> e;
    e.resize(d_m);
    double total = 0.0;
    for (double& v : e) {
      v = -std::log(rng.uniform_positive());
      total += v;
    }
    double h = 0.0;
    for (double v : e) {
      const double p = v / total;
      if (p > 0.0) h -= p * std::log(p);
    }
    return h;
  });
  r.expected_entropy = mean;
  r.std_error = se;
  return r;
}

}  // namespace tokgeo
