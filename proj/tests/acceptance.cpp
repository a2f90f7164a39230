// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>

#include "fixtures.hpp"
#include "json.hpp"
#include "test_helpers.hpp"
#include "tokgeo/entropy.hpp"
#include "tokgeo/id_estimators.hpp"
#include "tokgeo/neighbors.hpp"
#include "tokgeo/overlap.hpp"
#include "tokgeo/pipeline.hpp"
#include "tokgeo/shuffle.hpp"
#include "tokgeo/stats.hpp"
#include "tokgeo/synthetic.hpp"

using namespace tokgeo;
using namespace tokgeo::testing;

namespace {

// Collects failed sub-checks of one criterion.
class Criterion {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok && std::find(failures_.begin(), failures_.end(), what) == failures_.end()) failures_.push_back(what);
  }
  std::vector<std::string>& failures() { return failures_; }
  std::string note;

 private:
  std::vector<std::string> failures_;
};

int g_failed = 0;

void run(const char* name, double budget_s, const std::function<void(Criterion&)>& body) {
  Criterion c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.check(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0) {
    std::ostringstream os;
    os << "runtime " << secs << " s exceeds " << budget_s << " s";
    c.check(secs < budget_s, os.str());
  }
  const bool ok = c.failures().empty();
  if (!ok) ++g_failed;
  std::printf("%s  %-28s (%.2f s)%s%s\n", ok ? "PASS" : "FAIL", name, secs, c.note.empty() ? "" : "  ",
              c.note.c_str());
  for (const auto& f : c.failures()) std::printf("      - %s\n", f.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

PointCloud cube(std::size_t d, std::size_t n, std::uint64_t seed) {
  SyntheticSpec s;
  s.latent_dim = d;
  s.ambient_dim = d;
  s.n_points = n;
  s.seed = seed;
  return generate_synthetic(s);
}

void id_recovery(Criterion& c) {
  constexpr std::size_t kN = 1024, kSeeds = 20;
  const std::size_t scalings[] = {2, 4, 8};
  std::ostringstream note;
  for (std::size_t d : {2u, 3u, 5u, 9u}) {
    std::vector<double> tw;
    std::map<std::size_t, std::vector<double>> gr;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      const NeighborGraph g = knn(cube(d, kN, derive_seed(seed, d)), 8);
      tw.push_back(twonn(mu_ratios(g, 1, 2)).d_hat);
      if (d == 3 || d == 5) {
        const ScaleSweep sweep = scale_sweep(g, scalings);
        for (const auto& e : sweep.entries)
          gr[e.n2].push_back(e.estimate ? e.estimate->d_hat : std::numeric_limits<double>::quiet_NaN());
      }
    }
    const double m = median(tw);
    const double tol = d == 9 ? 0.25 : 0.10;
    note << "d=" << d << " twonn=" << m << " ";
    c.check(std::abs(m - double(d)) <= tol * double(d), fmt("TwoNN median %.4f for d=%.0f", m, double(d)));
    for (const auto& [s, v] : gr) {
      const double gm = median(v);
      note << "gride" << s << "=" << gm << " ";
      c.check(std::abs(gm - double(d)) <= 0.2 * double(d),
              fmt("GRIDE median %.4f at scaling %.0f for d=%.0f", gm, double(s), double(d)));
    }
  }
  c.note = note.str();
}

void consistency(Criterion& c) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t n = 50 + rng.below(450), dim = 1 + rng.below(12);
    const RatioSet r = mu_ratios(knn(random_cloud(n, dim, seed + 1000), 2), 1, 2);
    const IdEstimate t = twonn(r), g = gride(r);
    const double m = static_cast<double>(t.n_used);
    const double expected = t.d_hat * m / (m - 1.0);
    worst = std::max(worst, std::abs(g.d_hat - expected) / expected);
  }
  c.note = fmt("max relative deviation %.3g", worst);
  c.check(worst <= 1e-10, c.note);
}

void density_normalization(Criterion& c) {
  struct Config {
    double d;
    std::size_t n1, n2;
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  std::ostringstream note;
  note.precision(12);
  for (const Config k : {Config{2, 2, 4}, Config{3, 4, 8}, Config{7.5, 16, 32}}) {
    const double mass = integrator.integrate([&](double mu) { return gride_density(mu, k.d, k.n1, k.n2); }, 1.0,
                                             std::numeric_limits<double>::infinity(), 1e-12);
    note << "(" << k.d << "," << k.n1 << "," << k.n2 << ")=" << mass << " ";
    c.check(std::abs(mass - 1.0) <= 1e-6, fmt("mass %.10f for d=%.1f", mass, k.d));
  }
  c.note = note.str();
}

void shuffle_contract(Criterion& c) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto p = shuffle_permutation(100, {0, seed});
    std::vector<std::size_t> id(100);
    std::iota(id.begin(), id.end(), 0);
    c.check(p == id, "S=0 is not the identity");
  }
  for (unsigned s = 1; s <= 4; ++s)
    for (std::size_t n : {256u, 1000u, 1024u}) {
      const auto p = shuffle_permutation(n, {s, 17 + s});
      std::vector<std::size_t> sorted(p);
      std::sort(sorted.begin(), sorted.end());
      bool perm = true;
      for (std::size_t i = 0; i < n; ++i) perm &= sorted[i] == i;
      c.check(perm, "output is not a permutation");
      const std::size_t blocks = std::size_t(1) << (2 * s);
      const std::size_t b = (n + blocks - 1) / blocks;
      // The output must split into whole source blocks, each copied in order.
      for (std::size_t i = 0; i < n;) {
        const std::size_t start = p[i];
        const std::size_t len = std::min(b, n - start);
        c.check(start % b == 0, "output run does not start at a block boundary");
        for (std::size_t j = 0; j < len && i < n; ++j, ++i)
          c.check(p[i] == start + j, "order inside a block changed");
      }
    }
  std::map<std::vector<std::size_t>, double> counts;
  constexpr std::size_t kSeeds = 10000;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto p = shuffle_permutation(4, {1, seed});
    counts[p] += 1;
  }
  const double expected = kSeeds / 24.0;
  double chi2 = 0.0;
  for (const auto& [perm, n] : counts) chi2 += (n - expected) * (n - expected) / expected;
  chi2 += double(24 - counts.size()) * expected;
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(23), chi2));
  c.note = fmt("chi2=%.2f p=%.4f", chi2, p);
  c.check(p > 0.001, "block orders not uniform: " + c.note);
}

NeighborGraph graph_from(std::vector<std::vector<std::uint32_t>> rows) {
  NeighborGraph g;
  g.n_tokens = rows.size();
  g.k = rows.front().size();
  for (const auto& r : rows)
    for (std::size_t j = 0; j < r.size(); ++j) {
      g.indices.push_back(r[j]);
      g.distances.push_back(double(j + 1));
    }
  return g;
}

void overlap(Criterion& c) {
  const NeighborGraph g = knn(random_cloud(300, 6, 1), 4);
  for (std::size_t k = 1; k <= 4; ++k) c.check(neighborhood_overlap(g, g, k) == 1.0, "self overlap is not 1");
  const NeighborGraph l = graph_from({{1}, {0}, {3}, {2}});
  const NeighborGraph m = graph_from({{1}, {2}, {1}, {2}});
  c.check(neighborhood_overlap(l, m, 1) == 0.5, "four-token example is not 0.5");
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 10; ++t) {
    const double chi =
        neighborhood_overlap(knn(random_cloud(1024, 8, 2 * t + 10), 2), knn(random_cloud(1024, 8, 2 * t + 11), 2), 2);
    worst = std::max(worst, chi);
  }
  c.note = fmt("max null chi %.5f", worst);
  c.check(worst < 0.01, c.note);
}

void entropy_bridge(Criterion& c) {
  for (std::size_t v : {2u, 10u, 1000u, 50000u}) {
    const std::vector<double> z(v, -1.5);
    c.check(std::abs(softmax_entropy(std::span<const double>(z)) - std::log(double(v))) <= 1e-12,
            "uniform logits do not give log V");
  }
  Rng rng(3);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> z(1 + rng.below(200));
    for (double& x : z) x = 4.0 * rng.normal();
    const double s = softmax_entropy(std::span<const double>(z));
    const double shift = 200.0 * rng.uniform() - 100.0;
    for (double& x : z) x += shift;
    c.check(std::abs(softmax_entropy(std::span<const double>(z)) - s) <= 1e-10, "shift changed the entropy");
  }
  {
    LogitRecord r = logits_with_loss(300, 64, 3.0, 9);
    const EntropyReport rep = contextual_entropy_report(r);
    double mean = 0.0;
    for (double h : rep.per_token_softmax_entropy) mean += h;
    mean /= double(rep.per_token_softmax_entropy.size());
    c.check(rep.avg_contextual_entropy == mean, "average is not the mean of per-token entropies");
    double recomputed = 0.0;
    for (std::size_t i = 0; i < r.n_tokens; ++i) {
      const auto row = r.row(i);
      double zmax = -INFINITY, norm = 0.0, h = 0.0;
      for (float z : row) zmax = std::max(zmax, double(z));
      for (float z : row) norm += std::exp(double(z) - zmax);
      for (float z : row) {
        const double p = std::exp(double(z) - zmax) / norm;
        h -= p * std::log(p);
      }
      recomputed += h;
    }
    c.check(std::abs(rep.avg_contextual_entropy - recomputed / double(r.n_tokens)) <= 1e-12,
            "average entropy disagrees with recomputation");
  }
  std::ostringstream note;
  for (std::size_t d : {4u, 16u, 64u, 256u}) {
    const ToyResult r = unit_box_expected_entropy(d, 100000, 1000 + d);
    note << "box" << d << "=" << r.expected_entropy - std::log(double(d)) << " ";
    c.check(std::abs(r.expected_entropy - std::log(double(d))) <= 0.1,
            fmt("unit box D=%.0f gives %.4f", double(d), r.expected_entropy));
  }
  for (std::size_t d : {2u, 10u, 1000u}) {
    const ToyResult r = dirichlet_mc_entropy(d, 100000, 2000 + d);
    const double z = (r.expected_entropy - dirichlet_expected_entropy(d)) / r.std_error;
    note << "dir" << d << " z=" << z << " ";
    c.check(std::abs(z) <= 3.0, fmt("Dirichlet D=%.0f is %.2f standard errors off", double(d), z));
  }
  double h = 0.0;
  bool bound = true;
  for (std::size_t d = 1; d <= 1000000; ++d) {
    h += 1.0 / double(d);
    const double s = h - 1.0, ld = std::log(double(d));
    bound &= (ld - 0.5 < s) && (s <= ld + 1e-12);
  }
  c.check(bound, "harmonic bound violated");
  for (std::size_t d : {1u, 7u, 1000u, 123456u, 1000000u}) {
    const double s = dirichlet_expected_entropy(d), ld = std::log(double(d));
    c.check(ld - 0.5 < s && s <= ld, "closed form outside the bound");
  }
  const double gap = dirichlet_expected_entropy(100000) - (std::log(1e5) + 0.57721566490153286 - 1.0);
  note << "gap=" << gap;
  c.check(std::abs(gap) < 1e-3, fmt("asymptotic gap %.3g", gap));
  c.note = note.str();
}

void correlation(Criterion& c) {
  const std::vector<double> x{1, 2, 3}, y{1, 2, 4};
  const double rho = pearson(x, y).rho;
  c.check(std::abs(rho - 0.98198) <= 1e-5, fmt("Pearson example %.8f", rho));
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 5; ++t) {
    Rng rng(40 + t);
    std::vector<double> a(100), b(100);
    for (double& v : a) v = rng.normal();
    for (double& v : b) v = rng.normal();
    worst = std::max(worst, std::abs(pearson(a, b).p - permutation_pvalue(a, b, 10000, t)));
  }
  c.check(worst <= 0.02, fmt("t and permutation p-values differ by %.4f", worst));
  std::vector<std::vector<std::optional<double>>> ids(30, std::vector<std::optional<double>>(6));
  std::vector<double> loss(30);
  for (std::size_t p = 0; p < 30; ++p) {
    const double id = 3.0 + 0.7 * double(p);
    loss[p] = 0.5 + 1.3 * std::log(id);
    for (std::size_t l = 0; l < 6; ++l) ids[p][l] = std::log(id) + 0.1 * double(l);
  }
  CorrelationOptions o;
  o.bootstrap = 0;
  double min_rho = 1.0;
  for (const auto& lc : layerwise_correlation(ids, loss, o).per_layer)
    min_rho = std::min({min_rho, lc.pearson.value_or(0.0), lc.spearman.value_or(0.0)});
  c.check(std::abs(min_rho - 1.0) <= 1e-12, fmt("log-linear population gives rho %.15f", min_rho));
  c.note = fmt("rho=%.6f max|p_t-p_perm|=%.4f", rho, worst);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void pipeline_determinism(Criterion& c) {
  TempDir dir("acceptance");
  std::vector<PromptFixture> prompts;
  for (int i = 0; i < 4; ++i) {
    PromptFixture f;
    f.prompt_id = "hump" + std::to_string(i);
    f.latent_dims = {2, 5, 2};
    f.ambient_dim = 24;
    f.n_tokens = 512;
    f.seed = 77 + i;
    f.logits = logits_with_loss(512, 32, 2.0 + 0.1 * i, i);
    prompts.push_back(f);
  }
  const auto manifest = write_fixture(dir / "in", prompts);
  RunConfig cfg;
  cfg.manifest = manifest;
  cfg.profile.metrics = {Metric::kId, Metric::kOverlap, Metric::kCosine, Metric::kAngles};
  cfg.profile.scalings = {2, 4, 8};
  cfg.write_csv = true;
  cfg.out_dir = dir / "run1";
  const RunResult first = analyze(cfg);
  cfg.out_dir = dir / "run2";
  analyze(cfg);
  for (const auto& path : first.written) {
    const auto rel = std::filesystem::relative(path, dir / "run1");
    c.check(slurp(path) == slurp(dir / "run2" / rel), "outputs differ: " + rel.string());
  }
  const auto summary = nlohmann::json::parse(slurp(dir / "run1" / "summary.json"));
  const auto& layers = summary["groups"][0]["layers"];
  std::ostringstream note;
  for (const char* key : {"id_twonn", "id_gride_s2", "id_gride_s4", "id_gride_s8"}) {
    const double a = layers[0]["metrics"][key]["mean"], b = layers[1]["metrics"][key]["mean"],
                 e = layers[2]["metrics"][key]["mean"];
    note << key << "=" << a << "/" << b << "/" << e << " ";
    c.check(b > a && b > e, std::string("no middle-layer peak for ") + key);
  }
  c.note = std::to_string(first.written.size()) + " files; " + note.str();
}

}  // namespace

int main() {
  run("id_recovery", 30.0, id_recovery);
  run("twonn_gride_consistency", 0, consistency);
  run("density_normalization", 0, density_normalization);
  run("shuffle_contract", 10.0, shuffle_contract);
  run("neighborhood_overlap", 0, overlap);
  run("entropy_bridge", 60.0, entropy_bridge);
  run("correlation_machinery", 0, correlation);
  run("pipeline_determinism", 0, pipeline_determinism);
  std::printf("%d criteria failed\n", g_failed);
  return g_failed == 0 ? 0 : 1;
}
