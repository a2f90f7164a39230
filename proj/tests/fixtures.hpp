#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tokgeo/rng.hpp"
#include "tokgeo/synthetic.hpp"
#include "tokgeo/tensor_io.hpp"

namespace tokgeo::testing {

// One prompt made of synthetic layers, one latent dimension per layer.
struct PromptFixture {
  std::string prompt_id;
  std::vector<std::size_t> latent_dims;
  std::size_t ambient_dim = 16;
  std::size_t n_tokens = 256;
  std::uint64_t seed = 0;
  std::optional<unsigned> shuffle_index;
  std::optional<LogitRecord> logits;
  ManifoldKind kind = ManifoldKind::kHypercube;
};

inline LayerStack make_stack(const PromptFixture& f) {
  std::vector<PointCloud> layers;
  for (std::size_t l = 0; l < f.latent_dims.size(); ++l) {
    SyntheticSpec spec;
    spec.manifold_kind = f.kind;
    spec.latent_dim = f.latent_dims[l];
    spec.ambient_dim = f.ambient_dim;
    spec.n_points = f.n_tokens;
    spec.seed = derive_seed(f.seed, static_cast<std::uint64_t>(l));
    layers.push_back(generate_synthetic(spec));
  }
  return LayerStack::from_layers(f.prompt_id, std::move(layers));
}

// Writes the dumps and a manifest into `dir`; returns the manifest path.
inline std::filesystem::path write_fixture(const std::filesystem::path& dir, const std::vector<PromptFixture>& prompts) {
  std::filesystem::create_directories(dir);
  Manifest m;
  m.base_dir = dir;
  for (const auto& p : prompts) {
    std::string stem = p.prompt_id;
    if (p.shuffle_index) stem += ".S" + std::to_string(*p.shuffle_index);
    ManifestEntry e;
    e.prompt_id = p.prompt_id;
    e.layers_path = stem + ".tgeo";
    e.n_tokens = p.n_tokens;
    e.shuffle_index = p.shuffle_index;
    write_layerstack(make_stack(p), dir / e.layers_path);
    if (p.logits) {
      e.logits_path = stem + ".tglo";
      write_logits(*p.logits, dir / *e.logits_path);
    }
    m.entries.push_back(std::move(e));
  }
  const auto path = dir / "manifest.json";
  write_manifest(m, path);
  return path;
}

// Random logits whose average true-next log-likelihood equals -loss.
inline LogitRecord logits_with_loss(std::size_t n, std::size_t vocab, double loss, std::uint64_t seed) {
  Rng rng(seed);
  LogitRecord r;
  r.n_tokens = n;
  r.vocab_size = vocab;
  r.logits.resize(n * vocab);
  for (float& z : r.logits) z = static_cast<float>(2.0 * rng.normal());
  r.true_next_loglik.assign(n, static_cast<float>(-loss));
  return r;
}

}  // namespace tokgeo::testing
