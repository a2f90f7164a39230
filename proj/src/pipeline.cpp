#include "tokgeo/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "tokgeo/error.hpp"
#include "tokgeo/neighbors.hpp"
#include "tokgeo/rng.hpp"
#include "tokgeo/tensor_io.hpp"

namespace tokgeo {
namespace {

using ojson = nlohmann::ordered_json;

ojson number(double v) { return std::isfinite(v) ? ojson(v) : ojson(); }
ojson number(const std::optional<double>& v) { return v ? number(*v) : ojson(); }

std::string file_stem(const ManifestEntry& e) {
  std::string stem = e.prompt_id;
  for (char& c : stem)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  if (e.shuffle_index) stem += ".S" + std::to_string(*e.shuffle_index);
  return stem;
}

struct PromptResult {
  const ManifestEntry* entry = nullptr;
  std::optional<GeometryProfile> profile;
  std::optional<EntropyReport> entropy;
  std::optional<double> logit_id;
  std::string logit_id_error;
  std::string error;
};

struct ProcessOptions {
  ProfileOptions profile;
  bool want_logit_id = false;
  std::size_t logit_id_scaling = 2;
};

PromptResult process_entry(const Manifest& manifest, const ManifestEntry& e, const ProcessOptions& opt) {
  PromptResult r;
  r.entry = &e;
  try {
    LayerStack stack = read_layerstack(manifest.resolve(e.layers_path));
    stack.prompt_id = e.prompt_id;
    require(stack.n_tokens >= kMinTokens, ErrorCode::kInvalidArgument,
            "prompt has " + std::to_string(stack.n_tokens) + " tokens; at least " + std::to_string(kMinTokens) +
                " required");
    require(e.n_tokens == 0 || e.n_tokens == stack.n_tokens, ErrorCode::kShapeMismatch,
            "manifest token count disagrees with the dump");
    GeometryProfile p = compute_profile(stack, opt.profile);
    p.shuffle_index = e.shuffle_index;
    r.profile = std::move(p);

    if (e.logits_path) {
      const LogitRecord rec = read_logits(manifest.resolve(*e.logits_path));
      require(rec.n_tokens == stack.n_tokens, ErrorCode::kShapeMismatch,
              "logit rows do not match the layer stack's token count");
      r.entropy = contextual_entropy_report(rec);
      if (opt.want_logit_id) {
        try {
          const PointCloud logits(rec.n_tokens, rec.vocab_size, rec.logits);
          const NeighborGraph g = knn(logits, opt.logit_id_scaling, opt.profile.threads);
          r.logit_id = gride(mu_ratios(g, opt.logit_id_scaling / 2, opt.logit_id_scaling)).d_hat;
        } catch (const Error& err) {
          r.logit_id_error = err.what();
        }
      }
    }
  } catch (const Error& err) {
    r.profile.reset();
    r.entropy.reset();
    r.error = err.what();
  }
  return r;
}

// Prompts run on a worker pool; results come back in manifest order.
std::vector<PromptResult> process_all(const Manifest& manifest, const std::vector<const ManifestEntry*>& entries,
                                      ProcessOptions opt, unsigned threads) {
  std::vector<PromptResult> results(entries.size());
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(entries.size())));
  opt.profile.threads = std::max(1u, threads / workers);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++)
      results[i] = process_entry(manifest, *entries[i], opt);
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return results;
}

void check_unique(const std::vector<const ManifestEntry*>& entries) {
  std::set<std::string> seen;
  for (const auto* e : entries)
    require(seen.insert(file_stem(*e)).second, ErrorCode::kInvalidArgument,
            "duplicate manifest entry for prompt '" + e->prompt_id + "'");
}

// Layer metrics keyed by a stable name; std::map fixes the output order.
std::map<std::string, std::optional<double>> layer_metrics(const LayerGeometry& g) {
  std::map<std::string, std::optional<double>> m;
  if (g.twonn) m["id_twonn"] = g.twonn->d_hat;
  for (const auto& s : g.id_estimates.entries)
    m["id_gride_s" + std::to_string(s.n2)] =
        s.estimate ? std::optional<double>(s.estimate->d_hat) : std::nullopt;
  if (g.mean_cosine) m["cosine"] = g.mean_cosine;
  if (g.angle_mean_deg) m["angle_mean_deg"] = g.angle_mean_deg;
  for (const auto& [k, chi] : g.overlap_next) m["overlap_k" + std::to_string(k)] = chi;
  m["degenerate_count"] = static_cast<double>(g.degenerate_count);
  return m;
}

struct Moments {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  m.n = v.size();
  if (v.empty()) return m;
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

ojson to_json(const Moments& m) {
  if (m.n == 0) return ojson{{"mean", nullptr}, {"std", nullptr}, {"n", 0}};
  return ojson{{"mean", number(m.mean)}, {"std", number(m.std)}, {"n", m.n}};
}

// layer -> metric -> moments over the group's prompts.
using LayerTable = std::map<std::size_t, std::map<std::string, Moments>>;

LayerTable layer_table(const std::vector<const PromptResult*>& group) {
  std::map<std::size_t, std::map<std::string, std::vector<double>>> values;
  for (const auto* r : group)
    for (const auto& g : r->profile->per_layer)
      for (const auto& [name, v] : layer_metrics(g)) {
        auto& slot = values[g.layer][name];
        if (v && std::isfinite(*v)) slot.push_back(*v);
      }
  LayerTable t;
  for (const auto& [layer, metrics] : values)
    for (const auto& [name, v] : metrics) t[layer][name] = moments(v);
  return t;
}

ojson group_summary(std::optional<unsigned> shuffle_index, const std::vector<const PromptResult*>& group,
                    bool bits) {
  ojson g;
  g["shuffle_index"] = shuffle_index ? ojson(*shuffle_index) : ojson();
  g["n_prompts"] = group.size();
  ojson ids = ojson::array();
  for (const auto* r : group) ids.push_back(r->entry->prompt_id);
  g["prompt_ids"] = std::move(ids);
  ojson layers = ojson::array();
  for (const auto& [layer, metrics] : layer_table(group)) {
    ojson l;
    l["layer"] = layer;
    ojson m;
    for (const auto& [name, mo] : metrics) m[name] = to_json(mo);
    l["metrics"] = std::move(m);
    layers.push_back(std::move(l));
  }
  g["layers"] = std::move(layers);

  std::vector<double> ce, ctx;
  for (const auto* r : group)
    if (r->entropy) {
      ce.push_back(r->entropy->avg_cross_entropy * (bits ? kNatsToBits : 1.0));
      ctx.push_back(r->entropy->avg_contextual_entropy * (bits ? kNatsToBits : 1.0));
    }
  g["entropy"] = ojson{{"units", bits ? "bits" : "nats"},
                       {"avg_cross_entropy", to_json(moments(ce))},
                       {"avg_contextual_entropy", to_json(moments(ctx))}};
  return g;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// One CSV per metric: shuffle_index,layer,mean,std,n.
std::vector<std::filesystem::path> write_figure_csvs(
    const std::vector<std::pair<std::optional<unsigned>, LayerTable>>& groups, const std::filesystem::path& dir) {
  std::map<std::string, std::string> rows;
  for (const auto& [s, table] : groups)
    for (const auto& [layer, metrics] : table)
      for (const auto& [name, m] : metrics) {
        auto& out = rows[name];
        out += (s ? std::to_string(*s) : std::string()) + "," + std::to_string(layer) + ",";
        out += m.n ? fmt17(m.mean) + "," + fmt17(m.std) : std::string(",");
        out += "," + std::to_string(m.n) + "\n";
      }
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [name, body] : rows) {
    const auto path = dir / (name + ".csv");
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
    out << "shuffle_index,layer,mean,std,n\n" << body;
    written.push_back(path);
  }
  return written;
}

ojson quarantine_json(const std::vector<Quarantine>& q) {
  ojson arr = ojson::array();
  for (const auto& e : q)
    arr.push_back(ojson{{"prompt_id", e.prompt_id},
                        {"shuffle_index", e.shuffle_index ? ojson(*e.shuffle_index) : ojson()},
                        {"error", e.error}});
  return arr;
}

ojson header(const char* kind, const RunConfig& config) {
  ojson h;
  h["schema_version"] = kSchemaVersion;
  h["kind"] = kind;
  h["rng_version"] = kRngVersion;
  ojson metrics = ojson::array();
  for (Metric m : config.profile.metrics) metrics.push_back(to_string(m));
  h["config"] = ojson{{"metrics", std::move(metrics)},
                      {"scalings", config.profile.scalings},
                      {"knn", config.profile.knn},
                      {"seed", config.seed}};
  return h;
}

void write_errors(RunResult& result, const RunConfig& config) {
  ojson doc = header("errors", config);
  doc["quarantined"] = quarantine_json(result.quarantined);
  ojson missing = ojson::array();
  for (unsigned s : result.missing_levels) missing.push_back(s);
  doc["missing_shuffle_levels"] = std::move(missing);
  const auto path = config.out_dir / "errors.json";
  write_json(doc, path);
  result.written.push_back(path);
}

std::vector<const ManifestEntry*> all_entries(const Manifest& m) {
  std::vector<const ManifestEntry*> v;
  for (const auto& e : m.entries) v.push_back(&e);
  return v;
}

void collect_quarantine(const std::vector<PromptResult>& results, RunResult& out) {
  for (const auto& r : results)
    if (!r.error.empty()) out.quarantined.push_back({r.entry->prompt_id, r.entry->shuffle_index, r.error});
}

}  // namespace

void write_json(const nlohmann::ordered_json& doc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) fail(ErrorCode::kIo, "write error on " + path.string());
}

nlohmann::ordered_json to_json(const IdEstimate& e) {
  return ojson{{"method", to_string(e.method)}, {"d_hat", number(e.d_hat)}, {"n1", e.n1},
               {"n2", e.n2},                     {"n_used", e.n_used},       {"n_excluded", e.n_excluded}};
}

nlohmann::ordered_json to_json(const GeometryProfile& p) {
  ojson doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "geometry_profile";
  doc["prompt_id"] = p.prompt_id;
  doc["shuffle_index"] = p.shuffle_index ? ojson(*p.shuffle_index) : ojson();
  doc["n_tokens"] = p.n_tokens;
  doc["dim"] = p.dim;
  doc["standard_length"] = p.n_tokens == kStandardLength;
  ojson layers = ojson::array();
  for (const auto& g : p.per_layer) {
    ojson l;
    l["layer"] = g.layer;
    l["twonn"] = g.twonn ? to_json(*g.twonn) : ojson();
    ojson sweep = ojson::array();
    for (const auto& s : g.id_estimates.entries) {
      ojson e{{"n1", s.n1}, {"n2", s.n2}};
      e["estimate"] = s.estimate ? to_json(*s.estimate) : ojson();
      if (!s.error.empty()) e["error"] = s.error;
      sweep.push_back(std::move(e));
    }
    l["id_estimates"] = std::move(sweep);
    l["mean_cosine"] = number(g.mean_cosine);
    ojson overlap = ojson::object();
    for (const auto& [k, chi] : g.overlap_next) overlap["k" + std::to_string(k)] = number(chi);
    l["overlap_next"] = g.overlap_next.empty() ? ojson() : std::move(overlap);
    l["angle_mean_deg"] = number(g.angle_mean_deg);
    l["degenerate_count"] = g.degenerate_count;
    layers.push_back(std::move(l));
  }
  doc["per_layer"] = std::move(layers);
  return doc;
}

nlohmann::ordered_json to_json(const EntropyReport& r, bool bits) {
  const double f = bits ? kNatsToBits : 1.0;
  ojson per = ojson::array();
  for (double h : r.per_token_softmax_entropy) per.push_back(number(h * f));
  return ojson{{"schema_version", kSchemaVersion},
               {"kind", "entropy_report"},
               {"units", bits ? "bits" : "nats"},
               {"avg_cross_entropy", number(r.avg_cross_entropy * f)},
               {"avg_contextual_entropy", number(r.avg_contextual_entropy * f)},
               {"per_token_softmax_entropy", std::move(per)}};
}

nlohmann::ordered_json to_json(const CorrelationReport& r) {
  ojson layers = ojson::array();
  for (const auto& l : r.per_layer) {
    ojson j;
    j["layer"] = l.layer;
    j["n"] = l.n;
    j["pearson"] = number(l.pearson);
    j["spearman"] = number(l.spearman);
    j["p_pearson"] = number(l.p_pearson);
    j["p_spearman"] = number(l.p_spearman);
    j["p_permutation"] = number(l.p_permutation);
    j["bootstrap_std"] = number(l.bootstrap_std);
    j["significant"] = l.p_pearson ? ojson(*l.p_pearson < kSignificanceLevel) : ojson();
    j["flag"] = l.flag.empty() ? ojson() : ojson(l.flag);
    layers.push_back(std::move(j));
  }
  return ojson{{"x", r.x_label}, {"y", r.y_label}, {"per_layer", std::move(layers)}};
}

nlohmann::ordered_json to_json(const ToyResult& r, bool bits) {
  const double f = bits ? kNatsToBits : 1.0;
  return ojson{{"schema_version", kSchemaVersion},
               {"kind", "toy_result"},
               {"model", to_string(r.model)},
               {"units", bits ? "bits" : "nats"},
               {"d_m", r.d_m},
               {"expected_entropy", number(r.expected_entropy * f)},
               {"reference", number(r.reference * f)},
               {"n_samples", r.n_samples},
               {"std_error", number(r.std_error * f)}};
}

RunResult analyze(const RunConfig& config) {
  config.profile.validate();
  const Manifest manifest = read_manifest(config.manifest);
  const auto entries = all_entries(manifest);
  check_unique(entries);
  std::filesystem::create_directories(config.out_dir / "profiles");

  ProcessOptions opt;
  opt.profile = config.profile;
  const auto results = process_all(manifest, entries, opt, config.threads);

  RunResult out;
  collect_quarantine(results, out);
  std::map<std::optional<unsigned>, std::vector<const PromptResult*>> groups;
  for (const auto& r : results) {
    if (!r.error.empty()) continue;
    const std::string stem = file_stem(*r.entry);
    const auto ppath = config.out_dir / "profiles" / (stem + ".json");
    write_json(to_json(*r.profile), ppath);
    out.written.push_back(ppath);
    if (r.entropy) {
      std::filesystem::create_directories(config.out_dir / "entropy");
      const auto epath = config.out_dir / "entropy" / (stem + ".json");
      write_json(to_json(*r.entropy, config.entropy_in_bits), epath);
      out.written.push_back(epath);
    }
    groups[r.entry->shuffle_index].push_back(&r);
  }

  ojson summary = header("population_summary", config);
  ojson gs = ojson::array();
  std::vector<std::pair<std::optional<unsigned>, LayerTable>> tables;
  for (const auto& [s, group] : groups) {
    gs.push_back(group_summary(s, group, config.entropy_in_bits));
    tables.emplace_back(s, layer_table(group));
  }
  summary["groups"] = std::move(gs);
  const auto spath = config.out_dir / "summary.json";
  write_json(summary, spath);
  out.written.push_back(spath);
  if (config.write_csv) {
    auto csvs = write_figure_csvs(tables, config.out_dir / "figures");
    out.written.insert(out.written.end(), csvs.begin(), csvs.end());
  }
  write_errors(out, config);
  return out;
}

RunResult compare_shuffles(const RunConfig& config) {
  config.profile.validate();
  const Manifest manifest = read_manifest(config.manifest);
  RunResult out;
  std::vector<const ManifestEntry*> entries;
  for (const auto& e : manifest.entries) {
    if (e.shuffle_index) {
      entries.push_back(&e);
    } else {
      out.quarantined.push_back({e.prompt_id, std::nullopt, "missing_data: entry has no shuffle_index label"});
    }
  }
  check_unique(entries);
  std::filesystem::create_directories(config.out_dir);

  std::set<unsigned> requested(config.shuffle_levels.begin(), config.shuffle_levels.end());
  if (requested.empty())
    for (const auto* e : entries) requested.insert(*e->shuffle_index);
  std::vector<const ManifestEntry*> wanted;
  for (const auto* e : entries)
    if (requested.contains(*e->shuffle_index) || *e->shuffle_index == 0) wanted.push_back(e);

  ProcessOptions opt;
  opt.profile = config.profile;
  const auto results = process_all(manifest, wanted, opt, config.threads);
  collect_quarantine(results, out);

  std::map<unsigned, std::vector<const PromptResult*>> groups;
  for (const auto& r : results)
    if (r.error.empty()) groups[*r.entry->shuffle_index].push_back(&r);

  const bool have_baseline = groups.contains(0);
  const LayerTable baseline = have_baseline ? layer_table(groups.at(0)) : LayerTable{};
  ojson doc = header("shuffle_comparison", config);
  ojson levels = ojson::array();
  std::vector<std::pair<std::optional<unsigned>, LayerTable>> tables;
  for (unsigned s : requested) {
    if (!groups.contains(s)) {
      out.missing_levels.push_back(s);
      levels.push_back(ojson{{"shuffle_index", s}, {"status", "missing"}});
      continue;
    }
    ojson level = group_summary(s, groups.at(s), config.entropy_in_bits);
    level["status"] = "ok";
    const LayerTable table = layer_table(groups.at(s));
    if (have_baseline) {
      ojson deltas = ojson::array();
      for (const auto& [layer, metrics] : table) {
        ojson d;
        d["layer"] = layer;
        ojson m;
        for (const auto& [name, mo] : metrics) {
          const auto bl = baseline.find(layer);
          const Moments* b = nullptr;
          if (bl != baseline.end())
            if (auto it = bl->second.find(name); it != bl->second.end()) b = &it->second;
          m[name] = (b && b->n && mo.n) ? number(mo.mean - b->mean) : ojson();
        }
        d["delta_mean"] = std::move(m);
        deltas.push_back(std::move(d));
      }
      level["delta_vs_unshuffled"] = std::move(deltas);
    } else {
      level["delta_vs_unshuffled"] = nullptr;
    }
    levels.push_back(std::move(level));
    tables.emplace_back(s, table);
  }
  doc["baseline_present"] = have_baseline;
  doc["levels"] = std::move(levels);
  const auto cpath = config.out_dir / "comparison.json";
  write_json(doc, cpath);
  out.written.push_back(cpath);
  if (config.write_csv) {
    auto csvs = write_figure_csvs(tables, config.out_dir / "figures");
    out.written.insert(out.written.end(), csvs.begin(), csvs.end());
  }
  write_errors(out, config);
  return out;
}

RunResult correlate(const RunConfig& config) {
  const Manifest manifest = read_manifest(config.manifest);
  std::vector<const ManifestEntry*> entries;
  for (const auto& e : manifest.entries)
    if (!e.shuffle_index || *e.shuffle_index == 0) entries.push_back(&e);
  check_unique(entries);

  ProcessOptions opt;
  opt.profile = config.profile;
  opt.profile.metrics = {Metric::kId};
  if (std::find(opt.profile.scalings.begin(), opt.profile.scalings.end(), config.correlation.scaling) ==
      opt.profile.scalings.end())
    opt.profile.scalings.push_back(config.correlation.scaling);
  opt.want_logit_id = true;
  opt.logit_id_scaling = config.correlation.scaling;
  const auto results = process_all(manifest, entries, opt, config.threads);

  RunResult out;
  collect_quarantine(results, out);
  std::vector<GeometryProfile> profiles;
  std::vector<EntropyReport> entropies;
  std::vector<double> logit_ids, logit_ctx;
  for (const auto& r : results) {
    if (!r.error.empty()) continue;
    if (!r.entropy) {
      out.quarantined.push_back({r.entry->prompt_id, r.entry->shuffle_index, "missing_data: no logits dump"});
      continue;
    }
    profiles.push_back(*r.profile);
    entropies.push_back(*r.entropy);
    if (r.logit_id) {
      logit_ids.push_back(*r.logit_id);
      logit_ctx.push_back(r.entropy->avg_contextual_entropy);
    }
  }
  require(profiles.size() >= 3, ErrorCode::kInsufficientData,
          "correlation needs at least 3 prompts with dumps and logits, got " + std::to_string(profiles.size()));
  std::size_t n_layers = profiles.front().per_layer.size();
  for (const auto& p : profiles)
    require(p.per_layer.size() == n_layers, ErrorCode::kShapeMismatch, "prompts cover different layer ranges");

  std::filesystem::create_directories(config.out_dir);
  ojson doc = header("correlation", config);
  doc["scaling"] = config.correlation.scaling;
  doc["n_prompts"] = profiles.size();
  doc["id_vs_loss"] = to_json(layerwise_id_loss_correlation(profiles, entropies, config.correlation));

  auto pair_json = [](std::span<const double> x, std::span<const double> y) -> ojson {
    try {
      const Correlation p = pearson(x, y);
      const Correlation s = spearman(x, y);
      return ojson{{"n", p.n},           {"pearson", number(p.rho)},  {"p_pearson", number(p.p)},
                   {"spearman", number(s.rho)}, {"p_spearman", number(s.p)}, {"significant", p.p < kSignificanceLevel}};
    } catch (const Error& e) {
      return ojson{{"n", x.size()}, {"flag", e.what()}};
    }
  };
  std::vector<double> ctx, ce;
  for (const auto& e : entropies) {
    ctx.push_back(e.avg_contextual_entropy);
    ce.push_back(e.avg_cross_entropy);
  }
  std::vector<double> log_logit_ids;
  for (double d : logit_ids) log_logit_ids.push_back(config.correlation.log_id ? std::log(d) : d);
  doc["logit_id_vs_contextual_entropy"] = pair_json(log_logit_ids, logit_ctx);
  doc["contextual_entropy_vs_loss"] = pair_json(ctx, ce);

  const auto path = config.out_dir / "correlation.json";
  write_json(doc, path);
  out.written.push_back(path);
  write_errors(out, config);
  return out;
}

}  // namespace tokgeo
