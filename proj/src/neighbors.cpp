#include "tokgeo/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>
#include <utility>

#include "tokgeo/error.hpp"

namespace tokgeo {
namespace {

// Squared Euclidean distance with four fixed-order partial sums.
double squared_distance(const double* a, const double* b, std::size_t dim) noexcept {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= dim; j += 4) {
    const double d0 = a[j] - b[j];
    const double d1 = a[j + 1] - b[j + 1];
    const double d2 = a[j + 2] - b[j + 2];
    const double d3 = a[j + 3] - b[j + 3];
    s0 += d0 * d0;
    s1 += d1 * d1;
    s2 += d2 * d2;
    s3 += d3 * d3;
  }
  for (; j < dim; ++j) {
    const double d = a[j] - b[j];
    s0 += d * d;
  }
  return (s0 + s1) + (s2 + s3);
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

void knn_rows(const std::vector<double>& x, std::size_t n, std::size_t dim, std::size_t k,
              std::size_t row_begin, std::size_t row_end, NeighborGraph& out) {
  constexpr std::size_t kBlock = 32;
  std::vector<double> d2(kBlock * n);
  std::vector<std::pair<double, std::uint32_t>> cand;
  cand.reserve(n);
  for (std::size_t i0 = row_begin; i0 < row_end; i0 += kBlock) {
    const std::size_t i1 = std::min(i0 + kBlock, row_end);
    // Tile over candidate columns so a slab of rows stays in cache.
    for (std::size_t j0 = 0; j0 < n; j0 += kBlock) {
      const std::size_t j1 = std::min(j0 + kBlock, n);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j)
          d2[(i - i0) * n + j] = squared_distance(&x[i * dim], &x[j * dim], dim);
    }
    for (std::size_t i = i0; i < i1; ++i) {
      cand.clear();
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) cand.emplace_back(d2[(i - i0) * n + j], static_cast<std::uint32_t>(j));
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
      for (std::size_t c = 0; c < k; ++c) {
        out.indices[i * k + c] = cand[c].second;
        out.distances[i * k + c] = std::sqrt(cand[c].first);
      }
    }
  }
}

}  // namespace

NeighborGraph NeighborGraph::truncated(std::size_t k_prefix) const {
  require(k_prefix >= 1 && k_prefix <= k, ErrorCode::kInvalidArgument,
          "prefix k must lie in 1..graph.k");
  NeighborGraph g;
  g.k = k_prefix;
  g.n_tokens = n_tokens;
  g.ambient_dim = ambient_dim;
  g.indices.reserve(n_tokens * k_prefix);
  g.distances.reserve(n_tokens * k_prefix);
  for (std::size_t i = 0; i < n_tokens; ++i) {
    const auto nb = neighbors(i);
    const auto ds = dists(i);
    g.indices.insert(g.indices.end(), nb.begin(), nb.begin() + static_cast<std::ptrdiff_t>(k_prefix));
    g.distances.insert(g.distances.end(), ds.begin(), ds.begin() + static_cast<std::ptrdiff_t>(k_prefix));
  }
  return g;
}

NeighborGraph knn(const PointCloud& cloud, std::size_t k, unsigned threads) {
  require_geometric(cloud);
  const std::size_t n = cloud.size();
  require(k >= 1, ErrorCode::kInvalidArgument, "k must be positive");
  require(k < n, ErrorCode::kInvalidArgument,
          "k = " + std::to_string(k) + " must be smaller than n_tokens = " + std::to_string(n));

  NeighborGraph g;
  g.k = k;
  g.n_tokens = n;
  g.ambient_dim = cloud.dim();
  g.indices.resize(n * k);
  g.distances.resize(n * k);
  const std::vector<double> x = cloud.to_double();

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n / 64 + 1)));
  if (workers == 1) {
    knn_rows(x, n, cloud.dim(), k, 0, n, g);
    return g;
  }
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(n, b + chunk);
      if (b >= e) break;
      pool.emplace_back([&, b, e] { knn_rows(x, n, cloud.dim(), k, b, e, g); });
    }
  }
  return g;
}

RatioSet mu_ratios(const NeighborGraph& graph, std::size_t n1, std::size_t n2) {
  require(n1 >= 1 && n1 < n2, ErrorCode::kInvalidArgument, "need 1 <= n1 < n2");
  require(n2 <= graph.k, ErrorCode::kInvalidArgument,
          "n2 = " + std::to_string(n2) + " exceeds graph k = " + std::to_string(graph.k));
  RatioSet r;
  r.n1 = n1;
  r.n2 = n2;
  r.n_tokens = graph.n_tokens;
  r.ambient_dim = graph.ambient_dim;
  r.mu.reserve(graph.n_tokens);
  for (std::size_t i = 0; i < graph.n_tokens; ++i) {
    const auto ds = graph.dists(i);
    if (ds[n1 - 1] > 0.0) {
      r.mu.push_back(ds[n2 - 1] / ds[n1 - 1]);
    } else {
      ++r.degenerate;
    }
  }
  return r;
}

CosineSimilarity mean_cosine_similarity(const PointCloud& cloud) {
  require(cloud.all_finite(), ErrorCode::kNonFinite, "point cloud contains non-finite values");
  const std::size_t dim = cloud.dim();
  std::vector<double> unit;
  unit.reserve(cloud.size() * dim);
  CosineSimilarity out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto r = cloud.row(i);
    double norm2 = 0.0;
    for (float v : r) norm2 += static_cast<double>(v) * v;
    if (norm2 == 0.0) {
      ++out.zero_rows;
      continue;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (float v : r) unit.push_back(v * inv);
  }
  const std::size_t m = unit.size() / std::max<std::size_t>(dim, 1);
  require(m >= 2, ErrorCode::kInsufficientData, "cosine similarity needs at least 2 nonzero rows");

  const std::span<const double> u(unit);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = i + 1; j < m; ++j) row_sum += dot(u.subspan(i * dim, dim), u.subspan(j * dim, dim));
    total += row_sum;
  }
  out.n_pairs = m * (m - 1) / 2;
  out.mean = std::clamp(total / static_cast<double>(out.n_pairs), -1.0, 1.0);
  return out;
}

AngleStats nn_angles(const PointCloud& cloud, const NeighborGraph& graph) {
  require(graph.k >= 2, ErrorCode::kInvalidArgument, "angles need k >= 2");
  require(graph.n_tokens == cloud.size(), ErrorCode::kShapeMismatch, "graph and cloud token counts differ");
  const std::size_t dim = cloud.dim();
  const std::vector<double> x = cloud.to_double();
  AngleStats out;
  out.cosines.reserve(cloud.size());
  std::vector<double> a(dim), b(dim);
  double angle_sum = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nb = graph.neighbors(i);
    double na = 0.0, nb2 = 0.0, ab = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      a[j] = x[nb[0] * dim + j] - x[i * dim + j];
      b[j] = x[nb[1] * dim + j] - x[i * dim + j];
      na += a[j] * a[j];
      nb2 += b[j] * b[j];
      ab += a[j] * b[j];
    }
    if (na == 0.0 || nb2 == 0.0) {
      ++out.excluded;
      continue;
    }
    const double c = std::clamp(ab / std::sqrt(na * nb2), -1.0, 1.0);
    out.cosines.push_back(c);
    angle_sum += std::acos(c);
  }
  require(!out.cosines.empty(), ErrorCode::kDegenerate, "every token has a zero displacement");
  out.mean_angle_deg = angle_sum / static_cast<double>(out.cosines.size()) * 180.0 / std::numbers::pi;
  return out;
}

}  // namespace tokgeo
