// Command-line front end: analysis pipeline, block shuffling, toy entropy
// models and synthetic fixtures.

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>
#include <vector>

#include "json.hpp"
#include "tokgeo/entropy.hpp"
#include "tokgeo/error.hpp"
#include "tokgeo/pipeline.hpp"
#include "tokgeo/rng.hpp"
#include "tokgeo/shuffle.hpp"
#include "tokgeo/synthetic.hpp"
#include "tokgeo/tensor_io.hpp"

namespace {

constexpr int kExitFatal = 2;

struct PipelineFlags {
  std::string manifest;
  std::string out = "tokgeo_out";
  std::vector<std::string> metrics{"id", "no", "cosine", "angles"};
  std::vector<std::size_t> scaling{2};
  std::vector<std::size_t> knn{2};
  std::vector<unsigned> shuffle_levels;
  unsigned threads = 1;
  std::uint64_t seed = 0;
  std::string format = "json";
  bool bits = false;
  bool raw_id = false;
  std::size_t bootstrap = 1000;
  std::size_t permutations = 0;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f) {
  cmd->add_option("--manifest", f.manifest, "Run manifest (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--metrics", f.metrics, "Metrics: id,no,cosine,angles")->delimiter(',');
  cmd->add_option("--scaling", f.scaling, "GRIDE range scalings (powers of two)")->delimiter(',');
  cmd->add_option("--knn", f.knn, "Neighborhood sizes for overlap")->delimiter(',');
  cmd->add_option("--threads", f.threads, "Thread budget")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Seed for resampling statistics");
  cmd->add_option("--format", f.format, "json or csv (csv also writes per-figure tables)")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd->add_flag("--bits", f.bits, "Report entropies in bits");
}

tokgeo::RunConfig to_config(const PipelineFlags& f) {
  tokgeo::RunConfig c;
  c.manifest = f.manifest;
  c.out_dir = f.out;
  c.profile.metrics.clear();
  for (const auto& m : f.metrics) c.profile.metrics.insert(tokgeo::parse_metric(m));
  c.profile.scalings = f.scaling;
  c.profile.knn = f.knn;
  c.shuffle_levels = f.shuffle_levels;
  c.seed = f.seed;
  c.threads = f.threads;
  c.write_csv = f.format == "csv";
  c.entropy_in_bits = f.bits;
  c.correlation.scaling = f.scaling.empty() ? 2 : f.scaling.front();
  c.correlation.log_id = !f.raw_id;
  c.correlation.bootstrap = f.bootstrap;
  c.correlation.permutations = f.permutations;
  c.correlation.seed = f.seed;
  return c;
}

int report(const tokgeo::RunResult& r) {
  for (const auto& q : r.quarantined) std::cerr << "quarantined " << q.prompt_id << ": " << q.error << '\n';
  for (unsigned s : r.missing_levels) std::cerr << "missing shuffle level " << s << '\n';
  std::cout << "wrote " << r.written.size() << " files\n";
  return r.exit_code();
}

nlohmann::json read_json_input(const std::string& path) {
  if (path.empty() || path == "-") return nlohmann::json::parse(std::cin);
  std::ifstream in(path);
  if (!in) tokgeo::fail(tokgeo::ErrorCode::kIo, "cannot open " + path);
  return nlohmann::json::parse(in);
}

struct SynthFlags {
  std::string kind = "hypercube";
  std::vector<std::size_t> latent_dims{2, 5, 2};
  std::size_t ambient = 16;
  std::size_t points = 1024;
  std::size_t prompts = 1;
  std::uint64_t seed = 0;
  std::string out = "synth";
  std::string prefix = "synth";
  int shuffle_label = -1;
  bool identical = false;
  std::size_t vocab = 0;
};

// Random logits with a per-prompt temperature; the "true" next token is drawn
// from the resulting softmax so the log-likelihoods are consistent with the logits.
tokgeo::LogitRecord synthetic_logits(std::size_t n, std::size_t vocab, std::uint64_t seed) {
  tokgeo::Rng rng(seed);
  const double temperature = 0.5 + 2.5 * rng.uniform();
  tokgeo::LogitRecord rec;
  rec.n_tokens = n;
  rec.vocab_size = vocab;
  rec.logits.resize(n * vocab);
  rec.true_next_loglik.resize(n);
  std::vector<double> p(vocab);
  for (std::size_t i = 0; i < n; ++i) {
    double zmax = -INFINITY;
    for (std::size_t a = 0; a < vocab; ++a) {
      const float z = static_cast<float>(temperature * rng.normal());
      rec.logits[i * vocab + a] = z;
      zmax = std::max(zmax, static_cast<double>(z));
    }
    double norm = 0.0;
    for (std::size_t a = 0; a < vocab; ++a) norm += p[a] = std::exp(rec.logits[i * vocab + a] - zmax);
    double u = rng.uniform() * norm;
    std::size_t pick = vocab - 1;
    for (std::size_t a = 0; a < vocab; ++a) {
      if (u < p[a]) {
        pick = a;
        break;
      }
      u -= p[a];
    }
    rec.true_next_loglik[i] = std::min(0.0f, static_cast<float>(std::log(p[pick] / norm)));
  }
  return rec;
}

int run_synth(const SynthFlags& f) {
  namespace fs = std::filesystem;
  fs::create_directories(f.out);
  const auto kind = tokgeo::parse_manifold_kind(f.kind);
  tokgeo::Manifest manifest;
  manifest.base_dir = f.out;
  for (std::size_t p = 0; p < f.prompts; ++p) {
    const std::string id = f.prefix + "_" + std::to_string(p);
    const std::uint64_t prompt_seed = tokgeo::derive_seed(f.seed, id);
    std::vector<tokgeo::PointCloud> layers;
    for (std::size_t l = 0; l < f.latent_dims.size(); ++l) {
      if (f.identical && l > 0) {
        layers.push_back(layers.front());
        continue;
      }
      tokgeo::SyntheticSpec spec{kind, f.latent_dims[l], f.ambient, f.points,
                                 tokgeo::derive_seed(prompt_seed, static_cast<std::uint64_t>(l))};
      layers.push_back(tokgeo::generate_synthetic(spec));
    }
    tokgeo::ManifestEntry e;
    e.prompt_id = id;
    std::string stem = id + (f.shuffle_label >= 0 ? ".S" + std::to_string(f.shuffle_label) : "");
    e.layers_path = stem + ".tgeo";
    tokgeo::write_layerstack(tokgeo::LayerStack::from_layers(id, std::move(layers)), fs::path(f.out) / e.layers_path);
    if (f.vocab > 0) {
      e.logits_path = stem + ".tglo";
      tokgeo::write_logits(synthetic_logits(f.points, f.vocab, tokgeo::derive_seed(prompt_seed, "logits")),
                           fs::path(f.out) / *e.logits_path);
    }
    e.n_tokens = f.points;
    if (f.shuffle_label >= 0) e.shuffle_index = static_cast<unsigned>(f.shuffle_label);
    e.source = {{"generator", "synthetic"}, {"manifold", f.kind}, {"latent_dims", f.latent_dims}, {"seed", f.seed}};
    manifest.entries.push_back(std::move(e));
  }
  const auto mpath = fs::path(f.out) / "manifest.json";
  tokgeo::write_manifest(manifest, mpath);
  std::cout << mpath.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layerwise geometry of token representations"};
  app.require_subcommand(1);

  PipelineFlags analyze_flags, compare_flags, correlate_flags;
  auto* analyze_cmd = app.add_subcommand("analyze", "Per-prompt geometry profiles and population summary");
  add_pipeline_flags(analyze_cmd, analyze_flags);

  auto* compare_cmd = app.add_subcommand("compare-shuffles", "Compare metrics across shuffle levels");
  add_pipeline_flags(compare_cmd, compare_flags);
  compare_cmd->add_option("--shuffle-levels", compare_flags.shuffle_levels, "Shuffle indices to compare")
      ->delimiter(',');

  auto* correlate_cmd = app.add_subcommand("correlate", "Layerwise correlation of ID with loss");
  add_pipeline_flags(correlate_cmd, correlate_flags);
  correlate_cmd->add_flag("--raw-id", correlate_flags.raw_id, "Correlate raw ID instead of log ID");
  correlate_cmd->add_option("--bootstrap", correlate_flags.bootstrap, "Bootstrap resamples (0 disables)");
  correlate_cmd->add_option("--permutations", correlate_flags.permutations,
                            "Permutation p-value shuffles (0 disables)");

  unsigned shuffle_s = 0;
  std::uint64_t shuffle_seed = 0;
  std::string shuffle_input, shuffle_prompt;
  auto* shuffle_cmd = app.add_subcommand("shuffle", "Block-shuffle a JSON array (stdin -> stdout)");
  shuffle_cmd->add_option("--s", shuffle_s, "Shuffle index S (4^S blocks)")->required();
  shuffle_cmd->add_option("--seed", shuffle_seed, "Seed")->required();
  shuffle_cmd->add_option("--prompt-id", shuffle_prompt, "Derive the stream from this prompt id");
  shuffle_cmd->add_option("--input", shuffle_input, "Input file (default stdin)");

  std::string toy_model = "unit-box";
  std::size_t toy_d = 1, toy_samples = 100000;
  std::uint64_t toy_seed = 0;
  unsigned toy_threads = 1;
  bool toy_bits = false;
  auto* toy_cmd = app.add_subcommand("toy", "Expected softmax entropy of the toy logit models");
  toy_cmd->add_option("--model", toy_model, "unit-box or dirichlet")->check(CLI::IsMember({"unit-box", "dirichlet"}));
  toy_cmd->add_option("--d", toy_d, "Active dimension")->required()->check(CLI::PositiveNumber);
  toy_cmd->add_option("--samples", toy_samples, "Monte Carlo samples")->check(CLI::PositiveNumber);
  toy_cmd->add_option("--seed", toy_seed, "Seed");
  toy_cmd->add_option("--threads", toy_threads, "Threads")->check(CLI::PositiveNumber);
  toy_cmd->add_flag("--bits", toy_bits, "Report in bits");

  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic TGEO fixtures and a manifest");
  synth_cmd->add_option("--kind", synth.kind, "hypercube, hypersphere or gaussian");
  synth_cmd->add_option("--latent-dims", synth.latent_dims, "Latent dimension per layer")->delimiter(',');
  synth_cmd->add_option("--ambient", synth.ambient, "Ambient dimension");
  synth_cmd->add_option("--points", synth.points, "Tokens per prompt");
  synth_cmd->add_option("--prompts", synth.prompts, "Number of prompts");
  synth_cmd->add_option("--seed", synth.seed, "Seed");
  synth_cmd->add_option("--out", synth.out, "Output directory");
  synth_cmd->add_option("--prefix", synth.prefix, "Prompt id prefix");
  synth_cmd->add_option("--shuffle-label", synth.shuffle_label, "Label entries with this shuffle index");
  synth_cmd->add_flag("--identical", synth.identical, "Repeat layer 0 in every layer");
  synth_cmd->add_option("--vocab", synth.vocab, "Also write random logits with this vocabulary size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitFatal;
  }

  try {
    if (*analyze_cmd) return report(tokgeo::analyze(to_config(analyze_flags)));
    if (*compare_cmd) return report(tokgeo::compare_shuffles(to_config(compare_flags)));
    if (*correlate_cmd) return report(tokgeo::correlate(to_config(correlate_flags)));
    if (*shuffle_cmd) {
      const nlohmann::json in = read_json_input(shuffle_input);
      if (!in.is_array()) tokgeo::fail(tokgeo::ErrorCode::kFormat, "shuffle input must be a JSON array");
      const auto spec = shuffle_prompt.empty() ? tokgeo::ShuffleSpec{shuffle_s, shuffle_seed}
                                               : tokgeo::ShuffleSpec::for_prompt(shuffle_s, shuffle_seed, shuffle_prompt);
      nlohmann::json out = nlohmann::json::array();
      for (std::size_t src : tokgeo::shuffle_permutation(in.size(), spec)) out.push_back(in[src]);
      std::cout << out.dump() << '\n';
      return 0;
    }
    if (*toy_cmd) {
      const auto model = tokgeo::parse_toy_model(toy_model);
      const auto r = model == tokgeo::ToyModel::kUnitBox
                         ? tokgeo::unit_box_expected_entropy(toy_d, toy_samples, toy_seed, toy_threads)
                         : tokgeo::dirichlet_mc_entropy(toy_d, toy_samples, toy_seed, toy_threads);
      std::cout << tokgeo::to_json(r, toy_bits).dump(2) << '\n';
      return 0;
    }
    if (*synth_cmd) return run_synth(synth);
  } catch (const tokgeo::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFatal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFatal;
  }
  return kExitFatal;
}
