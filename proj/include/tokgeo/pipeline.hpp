#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tokgeo/entropy.hpp"
#include "tokgeo/profile.hpp"
#include "tokgeo/stats.hpp"

namespace tokgeo {

inline constexpr int kSchemaVersion = 1;
// Prompts shorter than this are rejected; shorter than kStandardLength are
// processed but marked as not length-standardized.
inline constexpr std::size_t kMinTokens = 64;
inline constexpr std::size_t kStandardLength = 1024;
inline constexpr double kSignificanceLevel = 0.01;

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  ProfileOptions profile;
  std::vector<unsigned> shuffle_levels;  // compare-shuffles; empty means every label present
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool write_csv = false;
  bool entropy_in_bits = false;  // reporting only; computation stays in nats
  CorrelationOptions correlation;
};

struct Quarantine {
  std::string prompt_id;
  std::optional<unsigned> shuffle_index;
  std::string error;
};

struct RunResult {
  std::vector<std::filesystem::path> written;
  std::vector<Quarantine> quarantined;
  std::vector<unsigned> missing_levels;

  // 0 clean, 1 partial (quarantines or missing data).
  int exit_code() const noexcept { return quarantined.empty() && missing_levels.empty() ? 0 : 1; }
};

// Per-prompt profiles (plus entropy reports when logits exist), a population
// summary, an errors report and optional figure CSVs.
RunResult analyze(const RunConfig& config);

// Summaries per shuffle level and their per-layer differences to level 0.
RunResult compare_shuffles(const RunConfig& config);

// Layerwise correlation of ID against loss over the unshuffled prompts.
RunResult correlate(const RunConfig& config);

nlohmann::ordered_json to_json(const IdEstimate& e);
nlohmann::ordered_json to_json(const GeometryProfile& p);
nlohmann::ordered_json to_json(const EntropyReport& r, bool bits = false);
nlohmann::ordered_json to_json(const CorrelationReport& r);
nlohmann::ordered_json to_json(const ToyResult& r, bool bits = false);

// Writes `doc` with fixed formatting so identical inputs give identical bytes.
void write_json(const nlohmann::ordered_json& doc, const std::filesystem::path& path);

}  // namespace tokgeo
