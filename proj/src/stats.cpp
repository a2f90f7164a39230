#include "tokgeo/stats.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <numeric>

#include "tokgeo/error.hpp"
#include "tokgeo/rng.hpp"

namespace tokgeo {
namespace {

// Sample Pearson coefficient; nullopt on zero variance.
std::optional<double> pearson_rho(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

void check_pairs(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorCode::kShapeMismatch, "correlation inputs differ in length");
  require(x.size() >= 3, ErrorCode::kInsufficientData, "correlation needs at least 3 pairs");
  for (std::size_t i = 0; i < x.size(); ++i)
    require(std::isfinite(x[i]) && std::isfinite(y[i]), ErrorCode::kNonFinite, "correlation inputs must be finite");
}

}  // namespace

std::vector<double> mid_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double student_t_cdf(double t, double df) {
  require(df > 0.0, ErrorCode::kInvalidArgument, "degrees of freedom must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * boost::math::ibeta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

double correlation_pvalue(double rho, std::size_t n) {
  require(n >= 3, ErrorCode::kInsufficientData, "p-value needs at least 3 pairs");
  const double r2 = rho * rho;
  if (r2 >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  // Two-sided: P(|T| > |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2), and
  // df / (df + t^2) simplifies to 1 - rho^2.
  return std::clamp(boost::math::ibeta(0.5 * df, 0.5, 1.0 - r2), 0.0, 1.0);
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  check_pairs(x, y);
  const auto rho = pearson_rho(x, y);
  require(rho.has_value(), ErrorCode::kUndefinedCorrelation, "zero variance in a correlation input");
  return {*rho, correlation_pvalue(*rho, x.size()), x.size()};
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  check_pairs(x, y);
  const auto rx = mid_ranks(x);
  const auto ry = mid_ranks(y);
  const auto rho = pearson_rho(rx, ry);
  require(rho.has_value(), ErrorCode::kUndefinedCorrelation, "all-equal input to a rank correlation");
  return {*rho, correlation_pvalue(*rho, x.size()), x.size()};
}

double permutation_pvalue(std::span<const double> x, std::span<const double> y, std::size_t n_permutations,
                          std::uint64_t seed, bool use_ranks) {
  check_pairs(x, y);
  require(n_permutations > 0, ErrorCode::kInvalidArgument, "need at least one permutation");
  std::vector<double> xs(x.begin(), x.end()), ys(y.begin(), y.end());
  if (use_ranks) {
    xs = mid_ranks(x);
    ys = mid_ranks(y);
  }
  const auto observed = pearson_rho(xs, ys);
  require(observed.has_value(), ErrorCode::kUndefinedCorrelation, "zero variance in a correlation input");
  const double threshold = std::abs(*observed) * (1.0 - 1e-12);
  Rng rng(seed);
  std::size_t hits = 0;
  for (std::size_t p = 0; p < n_permutations; ++p) {
    for (std::size_t i = ys.size(); i > 1; --i) std::swap(ys[i - 1], ys[rng.below(i)]);
    if (std::abs(*pearson_rho(xs, ys)) >= threshold) ++hits;
  }
  return static_cast<double>(hits + 1) / static_cast<double>(n_permutations + 1);
}

double bootstrap_pearson_std(std::span<const double> x, std::span<const double> y, std::size_t n_resamples,
                             std::uint64_t seed) {
  check_pairs(x, y);
  Rng rng(seed);
  const std::size_t n = x.size();
  std::vector<double> bx(n), by(n), values;
  values.reserve(n_resamples);
  for (std::size_t b = 0; b < n_resamples; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = rng.below(n);
      bx[i] = x[j];
      by[i] = y[j];
    }
    if (const auto r = pearson_rho(bx, by)) values.push_back(*r);
  }
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

CorrelationReport layerwise_correlation(const std::vector<std::vector<std::optional<double>>>& x,
                                        std::span<const double> y, const CorrelationOptions& options) {
  require(x.size() == y.size(), ErrorCode::kShapeMismatch, "one y value per prompt required");
  require(!x.empty(), ErrorCode::kInsufficientData, "empty population");
  const std::size_t n_layers = x.front().size();
  for (const auto& row : x)
    require(row.size() == n_layers, ErrorCode::kShapeMismatch, "prompts cover different layer ranges");

  CorrelationReport report;
  for (std::size_t l = 0; l < n_layers; ++l) {
    LayerCorrelation lc;
    lc.layer = l;
    std::vector<double> xs, ys;
    for (std::size_t p = 0; p < x.size(); ++p) {
      if (x[p][l] && std::isfinite(*x[p][l]) && std::isfinite(y[p])) {
        xs.push_back(*x[p][l]);
        ys.push_back(y[p]);
      }
    }
    lc.n = xs.size();
    try {
      const Correlation pc = pearson(xs, ys);
      const Correlation sc = spearman(xs, ys);
      lc.pearson = pc.rho;
      lc.p_pearson = pc.p;
      lc.spearman = sc.rho;
      lc.p_spearman = sc.p;
      const std::uint64_t layer_seed = derive_seed(options.seed, static_cast<std::uint64_t>(l));
      if (options.bootstrap > 0) lc.bootstrap_std = bootstrap_pearson_std(xs, ys, options.bootstrap, layer_seed);
      if (options.permutations > 0)
        lc.p_permutation = permutation_pvalue(xs, ys, options.permutations, mix64(layer_seed));
    } catch (const Error& e) {
      lc.flag = e.what();
    }
    report.per_layer.push_back(std::move(lc));
  }
  return report;
}

CorrelationReport layerwise_id_loss_correlation(std::span<const GeometryProfile> profiles,
                                                std::span<const EntropyReport> entropies,
                                                const CorrelationOptions& options) {
  require(profiles.size() == entropies.size(), ErrorCode::kShapeMismatch,
          "one entropy report per profile required");
  std::vector<std::vector<std::optional<double>>> x;
  std::vector<double> y;
  for (std::size_t p = 0; p < profiles.size(); ++p) {
    auto row = profiles[p].log_id(options.scaling);
    if (!options.log_id)
      for (auto& v : row)
        if (v) v = std::exp(*v);
    x.push_back(std::move(row));
    y.push_back(entropies[p].avg_cross_entropy);
  }
  CorrelationReport r = layerwise_correlation(x, y, options);
  r.x_label = options.log_id ? "log_id" : "id";
  r.y_label = "avg_cross_entropy";
  return r;
}

}  // namespace tokgeo
