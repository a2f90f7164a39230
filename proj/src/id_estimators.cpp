#include "tokgeo/id_estimators.hpp"

#include <cmath>
#include <sstream>

#include "tokgeo/error.hpp"

namespace tokgeo {
namespace {

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// log(e^x - 1) for x > 0 without overflow.
double log_expm1(double x) { return x > 30.0 ? x + std::log1p(-std::exp(-x)) : std::log(std::expm1(x)); }

struct UsableRatios {
  std::vector<double> log_mu;
  std::size_t excluded = 0;
};

// Drops ratios equal to 1: the density is supported on mu > 1.
UsableRatios usable(const RatioSet& r) {
  UsableRatios u;
  u.log_mu.reserve(r.mu.size());
  for (double m : r.mu) {
    require(std::isfinite(m) && m >= 1.0, ErrorCode::kInvalidValue, "distance ratios must be finite and >= 1");
    if (m > 1.0) {
      u.log_mu.push_back(std::log(m));
    } else {
      ++u.excluded;
    }
  }
  u.excluded += r.degenerate;
  return u;
}

double sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double max_dimension(const RatioSet& r) {
  require(r.ambient_dim > 0, ErrorCode::kInvalidArgument, "ratio set carries no ambient dimension");
  return 2.0 * static_cast<double>(r.ambient_dim);
}

// Score in terms of log mu: n/d + (n2-n1-1) sum l/(1-e^{-dl}) - (n2-1) sum l.
double score_log(std::span<const double> log_mu, double d, std::size_t n1, std::size_t n2) {
  const double n = static_cast<double>(log_mu.size());
  double tail = 0.0;
  if (n2 - n1 > 1)
    for (double l : log_mu) tail += l / -std::expm1(-d * l);
  return n / d + static_cast<double>(n2 - n1 - 1) * tail - static_cast<double>(n2 - 1) * sum(log_mu);
}

std::string describe(const char* what, double d, double score) {
  std::ostringstream os;
  os.precision(17);
  os << what << " (d = " << d << ", score = " << score << ")";
  return os.str();
}

}  // namespace

std::string_view to_string(IdMethod method) noexcept {
  return method == IdMethod::kTwoNN ? "twonn" : "gride";
}

bool is_power_of_two(std::size_t v) noexcept { return v != 0 && (v & (v - 1)) == 0; }

double gride_density(double mu, double d, std::size_t n1, std::size_t n2) {
  if (!(mu > 1.0)) return 0.0;
  const double l = std::log(mu);
  const double a = static_cast<double>(n2 - n1);
  double log_f = std::log(d) - (static_cast<double>(n2 - 1) * d + 1.0) * l -
                 log_beta(a, static_cast<double>(n1));
  if (n2 - n1 > 1) log_f += (a - 1.0) * log_expm1(d * l);
  return std::exp(log_f);
}

double gride_log_likelihood(std::span<const double> mu, double d, std::size_t n1, std::size_t n2) {
  require(n1 >= 1 && n1 < n2, ErrorCode::kInvalidArgument, "need 1 <= n1 < n2");
  const double a = static_cast<double>(n2 - n1);
  double ll = static_cast<double>(mu.size()) * (std::log(d) - log_beta(a, static_cast<double>(n1)));
  for (double m : mu) {
    const double l = std::log(m);
    ll -= (static_cast<double>(n2 - 1) * d + 1.0) * l;
    if (n2 - n1 > 1) ll += (a - 1.0) * log_expm1(d * l);
  }
  return ll;
}

double gride_score(std::span<const double> mu, double d, std::size_t n1, std::size_t n2) {
  require(n1 >= 1 && n1 < n2, ErrorCode::kInvalidArgument, "need 1 <= n1 < n2");
  std::vector<double> log_mu;
  log_mu.reserve(mu.size());
  for (double m : mu) log_mu.push_back(std::log(m));
  return score_log(log_mu, d, n1, n2);
}

IdEstimate twonn(const RatioSet& ratios) {
  require(ratios.n1 == 1 && ratios.n2 == 2, ErrorCode::kInvalidArgument, "TwoNN needs (n1, n2) = (1, 2)");
  const UsableRatios u = usable(ratios);
  require(u.log_mu.size() >= 2, ErrorCode::kDegenerate, "TwoNN needs at least 2 ratios above 1");
  const double s = sum(u.log_mu);
  require(s > 0.0, ErrorCode::kDegenerate, "all distance ratios equal 1");
  IdEstimate e;
  e.method = IdMethod::kTwoNN;
  e.n_used = u.log_mu.size();
  e.n_excluded = u.excluded;
  e.d_hat = static_cast<double>(e.n_used - 1) / s;
  return e;
}

IdEstimate gride(const RatioSet& ratios) {
  require(ratios.n1 >= 1 && ratios.n1 < ratios.n2, ErrorCode::kInvalidArgument, "need 1 <= n1 < n2");
  if (ratios.n2 - ratios.n1 > 1) return gride_numeric(ratios);

  const UsableRatios u = usable(ratios);
  require(!u.log_mu.empty(), ErrorCode::kDegenerate, "no distance ratio above 1");
  const double s = sum(u.log_mu);
  const double d = static_cast<double>(u.log_mu.size()) / (static_cast<double>(ratios.n2 - 1) * s);
  const double d_max = max_dimension(ratios);
  if (d > d_max) throw EstimatorFailure(describe("maximum beyond the search domain", d_max, 0.0), d_max, 0.0);
  if (d <= kMinDimension)
    throw EstimatorFailure(describe("maximum below the search domain", kMinDimension, 0.0), kMinDimension, 0.0);
  IdEstimate e;
  e.method = IdMethod::kGride;
  e.n1 = ratios.n1;
  e.n2 = ratios.n2;
  e.n_used = u.log_mu.size();
  e.n_excluded = u.excluded;
  e.d_hat = d;
  return e;
}

IdEstimate gride_numeric(const RatioSet& ratios) {
  require(ratios.n1 >= 1 && ratios.n1 < ratios.n2, ErrorCode::kInvalidArgument, "need 1 <= n1 < n2");
  const UsableRatios u = usable(ratios);
  require(!u.log_mu.empty(), ErrorCode::kDegenerate, "no distance ratio above 1");
  const std::size_t n1 = ratios.n1, n2 = ratios.n2;
  const double d_max = max_dimension(ratios);
  auto score = [&](double d) { return score_log(u.log_mu, d, n1, n2); };

  // Bracket [lo, hi] with score(lo) > 0 >= score(hi).
  double lo = 1e-3;
  double hi = 0.0;
  if (score(lo) <= 0.0) {
    hi = lo;
    lo = kMinDimension;
    const double s_min = score(lo);
    if (s_min <= 0.0)
      throw EstimatorFailure(describe("likelihood decreasing at the lower boundary", lo, s_min), lo, s_min);
  } else {
    hi = std::min(2.0 * lo, d_max);
    while (score(hi) > 0.0) {
      if (hi >= d_max) {
        const double s_max = score(d_max);
        throw EstimatorFailure(describe("likelihood increasing at the upper boundary", d_max, s_max), d_max,
                               s_max);
      }
      lo = hi;
      hi = std::min(2.0 * hi, d_max);
    }
  }
  while (hi - lo > kDimensionTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (score(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  IdEstimate e;
  e.method = IdMethod::kGride;
  e.n1 = n1;
  e.n2 = n2;
  e.n_used = u.log_mu.size();
  e.n_excluded = u.excluded;
  e.d_hat = 0.5 * (lo + hi);
  return e;
}

const ScaleEntry* ScaleSweep::at_scaling(std::size_t n2) const noexcept {
  for (const auto& e : entries)
    if (e.n2 == n2) return &e;
  return nullptr;
}

ScaleSweep scale_sweep(const NeighborGraph& graph, std::size_t max_scaling) {
  require(max_scaling >= 2 && is_power_of_two(max_scaling), ErrorCode::kInvalidArgument,
          "max_scaling must be a power of two >= 2");
  std::vector<std::size_t> scalings;
  for (std::size_t s = 2; s <= max_scaling; s *= 2) scalings.push_back(s);
  return scale_sweep(graph, scalings);
}

ScaleSweep scale_sweep(const NeighborGraph& graph, std::span<const std::size_t> scalings) {
  for (std::size_t s : scalings) {
    require(s >= 2 && is_power_of_two(s), ErrorCode::kInvalidArgument, "scalings must be powers of two >= 2");
    require(s <= graph.k, ErrorCode::kInvalidArgument,
            "scaling " + std::to_string(s) + " exceeds graph k = " + std::to_string(graph.k));
  }
  ScaleSweep sweep;
  for (std::size_t s : scalings) {
    ScaleEntry entry;
    entry.n1 = s / 2;
    entry.n2 = s;
    try {
      entry.estimate = gride(mu_ratios(graph, entry.n1, entry.n2));
    } catch (const Error& e) {
      entry.error = e.what();
    }
    sweep.entries.push_back(std::move(entry));
  }
  return sweep;
}

}  // namespace tokgeo
