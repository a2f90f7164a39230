#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace tokgeo {

// One layer's token representations: n_tokens rows of dim values, row-major.
// Stored in float32 (the dump precision); every computation promotes to double.
class PointCloud {
 public:
  PointCloud() = default;
  PointCloud(std::size_t n_tokens, std::size_t dim, std::vector<float> values);

  static PointCloud from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t size() const noexcept { return n_tokens_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const float> values() const noexcept { return values_; }
  std::span<const float> row(std::size_t i) const noexcept {
    return std::span<const float>(values_).subspan(i * dim_, dim_);
  }
  float at(std::size_t i, std::size_t j) const noexcept { return values_[i * dim_ + j]; }

  bool all_finite() const noexcept;

  // Coordinates promoted to double, row-major.
  std::vector<double> to_double() const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::size_t n_tokens_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

// Throws unless the cloud has at least two rows and only finite entries.
void require_geometric(const PointCloud& cloud);

// Per-layer clouds for one prompt. Layer 0 is the embedding layer.
struct LayerStack {
  std::string prompt_id;
  std::vector<PointCloud> layers;
  std::size_t n_tokens = 0;
  std::size_t dim = 0;

  static LayerStack from_layers(std::string prompt_id, std::vector<PointCloud> layers);

  std::size_t n_layers() const noexcept { return layers.size(); }

  // Throws kInvalidArgument, kShapeMismatch or kNonFinite on broken invariants.
  void validate() const;
};

// Final-layer logits and the log-likelihood of the true next token per position.
struct LogitRecord {
  std::size_t n_tokens = 0;
  std::size_t vocab_size = 0;
  std::vector<float> logits;  // n_tokens x vocab_size, row-major; -inf marks a masked entry
  std::vector<float> true_next_loglik;

  std::span<const float> row(std::size_t i) const noexcept {
    return std::span<const float>(logits).subspan(i * vocab_size, vocab_size);
  }

  void validate() const;
};

inline constexpr std::uint32_t kFormatVersion = 1;

LayerStack read_layerstack(const std::filesystem::path& path);
void write_layerstack(const LayerStack& stack, const std::filesystem::path& path);

LogitRecord read_logits(const std::filesystem::path& path);
void write_logits(const LogitRecord& record, const std::filesystem::path& path);

// One prompt's entry in a run manifest. Paths are resolved against the
// manifest's directory when relative.
struct ManifestEntry {
  std::string prompt_id;
  std::filesystem::path layers_path;
  std::optional<std::filesystem::path> logits_path;
  std::size_t n_tokens = 0;
  std::optional<unsigned> shuffle_index;
  nlohmann::json source = nlohmann::json::object();
};

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

}  // namespace tokgeo
