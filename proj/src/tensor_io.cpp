#include "tokgeo/tensor_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include "tokgeo/error.hpp"

namespace tokgeo {
namespace {

constexpr std::array<char, 4> kLayersMagic{'T', 'G', 'E', 'O'};
constexpr std::array<char, 4> kLogitsMagic{'T', 'G', 'L', 'O'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<unsigned char>(v >> shift));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void put_floats(std::vector<unsigned char>& out, std::span<const float> values) {
  for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

void get_floats(const unsigned char* p, std::span<float> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<float>(get_u32(p + 4 * i));
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::kIo, "read error on " + path.string());
  return bytes;
}

void dump(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write error on " + path.string());
}

void check_magic(const std::vector<unsigned char>& bytes, const std::array<char, 4>& magic,
                 std::size_t header_size, const std::filesystem::path& path) {
  if (bytes.size() < header_size)
    fail(ErrorCode::kFormat, "truncated header in " + path.string());
  for (std::size_t i = 0; i < 4; ++i)
    if (bytes[i] != static_cast<unsigned char>(magic[i]))
      fail(ErrorCode::kFormat, "bad magic in " + path.string());
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kFormatVersion)
    fail(ErrorCode::kFormat, "unsupported version " + std::to_string(version) + " in " + path.string());
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v == 0 || v > std::numeric_limits<std::uint32_t>::max())
    fail(ErrorCode::kInvalidArgument, std::string(what) + " out of range for the dump format");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

PointCloud::PointCloud(std::size_t n_tokens, std::size_t dim, std::vector<float> values)
    : n_tokens_(n_tokens), dim_(dim), values_(std::move(values)) {
  require(n_tokens > 0 && dim > 0, ErrorCode::kInvalidArgument, "point cloud needs positive shape");
  require(values_.size() == n_tokens * dim, ErrorCode::kShapeMismatch,
          "point cloud payload does not match its shape");
}

PointCloud PointCloud::from_rows(const std::vector<std::vector<double>>& rows) {
  require(!rows.empty(), ErrorCode::kInvalidArgument, "point cloud needs at least one row");
  const std::size_t dim = rows.front().size();
  std::vector<float> values;
  values.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    require(r.size() == dim, ErrorCode::kShapeMismatch, "ragged rows");
    for (double v : r) values.push_back(static_cast<float>(v));
  }
  return PointCloud(rows.size(), dim, std::move(values));
}

bool PointCloud::all_finite() const noexcept {
  for (float v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::vector<double> PointCloud::to_double() const { return {values_.begin(), values_.end()}; }

void require_geometric(const PointCloud& cloud) {
  require(cloud.size() >= 2, ErrorCode::kInvalidArgument, "geometric operations need at least 2 tokens");
  require(cloud.all_finite(), ErrorCode::kNonFinite, "point cloud contains non-finite values");
}

LayerStack LayerStack::from_layers(std::string prompt_id, std::vector<PointCloud> layers) {
  LayerStack s;
  s.prompt_id = std::move(prompt_id);
  if (!layers.empty()) {
    s.n_tokens = layers.front().size();
    s.dim = layers.front().dim();
  }
  s.layers = std::move(layers);
  s.validate();
  return s;
}

void LayerStack::validate() const {
  require(!layers.empty(), ErrorCode::kInvalidArgument, "layer stack has no layers");
  require(n_tokens > 0 && dim > 0, ErrorCode::kInvalidArgument, "layer stack needs positive shape");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    require(layers[l].size() == n_tokens && layers[l].dim() == dim, ErrorCode::kShapeMismatch,
            "layer " + std::to_string(l) + " shape differs from the stack shape");
    require(layers[l].all_finite(), ErrorCode::kNonFinite,
            "layer " + std::to_string(l) + " contains non-finite values");
  }
}

void LogitRecord::validate() const {
  require(n_tokens > 0 && vocab_size > 0, ErrorCode::kInvalidArgument, "logit record needs positive shape");
  require(logits.size() == n_tokens * vocab_size, ErrorCode::kShapeMismatch,
          "logits payload does not match n_tokens x vocab_size");
  require(true_next_loglik.size() == n_tokens, ErrorCode::kShapeMismatch,
          "log-likelihood count does not match n_tokens");
  for (float z : logits)
    require(!std::isnan(z) && z != std::numeric_limits<float>::infinity(), ErrorCode::kNonFinite,
            "logits contain NaN or +inf");
  for (float l : true_next_loglik) {
    require(std::isfinite(l), ErrorCode::kNonFinite, "log-likelihood is not finite");
    require(l <= 0.0f, ErrorCode::kInvalidValue, "log-likelihood must be <= 0");
  }
}

LayerStack read_layerstack(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  constexpr std::size_t kHeader = 20;
  check_magic(bytes, kLayersMagic, kHeader, path);
  const std::uint64_t n_layers = get_u32(bytes.data() + 8);
  const std::uint64_t n_tokens = get_u32(bytes.data() + 12);
  const std::uint64_t dim = get_u32(bytes.data() + 16);
  if (n_layers == 0 || n_tokens == 0 || dim == 0)
    fail(ErrorCode::kFormat, "zero extent in header of " + path.string());
  // Three u32 factors fit in 96 bits; guard the 64-bit product.
  const long double expected_ld = static_cast<long double>(n_layers) * n_tokens * dim * 4 + kHeader;
  if (expected_ld != static_cast<long double>(bytes.size()))
    fail(ErrorCode::kPayloadLength, "payload length of " + path.string() + " does not match header");

  const std::size_t per_layer = n_tokens * dim;
  std::vector<PointCloud> layers;
  layers.reserve(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    std::vector<float> values(per_layer);
    get_floats(bytes.data() + kHeader + 4 * l * per_layer, values);
    layers.emplace_back(n_tokens, dim, std::move(values));
  }
  LayerStack stack;
  stack.prompt_id = path.stem().string();
  stack.n_tokens = n_tokens;
  stack.dim = dim;
  stack.layers = std::move(layers);
  stack.validate();
  return stack;
}

void write_layerstack(const LayerStack& stack, const std::filesystem::path& path) {
  stack.validate();
  std::vector<unsigned char> out;
  out.reserve(20 + 4 * stack.n_layers() * stack.n_tokens * stack.dim);
  out.insert(out.end(), kLayersMagic.begin(), kLayersMagic.end());
  put_u32(out, kFormatVersion);
  put_u32(out, checked_u32(stack.n_layers(), "n_layers"));
  put_u32(out, checked_u32(stack.n_tokens, "n_tokens"));
  put_u32(out, checked_u32(stack.dim, "dim"));
  for (const auto& layer : stack.layers) put_floats(out, layer.values());
  dump(out, path);
}

LogitRecord read_logits(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  constexpr std::size_t kHeader = 16;
  check_magic(bytes, kLogitsMagic, kHeader, path);
  const std::uint64_t n_tokens = get_u32(bytes.data() + 8);
  const std::uint64_t vocab = get_u32(bytes.data() + 12);
  if (n_tokens == 0 || vocab == 0) fail(ErrorCode::kFormat, "zero extent in header of " + path.string());
  const std::uint64_t expected = kHeader + 4 * (n_tokens * vocab + n_tokens);
  if (expected != bytes.size())
    fail(ErrorCode::kPayloadLength, "payload length of " + path.string() + " does not match header");

  LogitRecord rec;
  rec.n_tokens = n_tokens;
  rec.vocab_size = vocab;
  rec.logits.resize(n_tokens * vocab);
  rec.true_next_loglik.resize(n_tokens);
  get_floats(bytes.data() + kHeader, rec.logits);
  get_floats(bytes.data() + kHeader + 4 * rec.logits.size(), rec.true_next_loglik);
  rec.validate();
  return rec;
}

void write_logits(const LogitRecord& record, const std::filesystem::path& path) {
  record.validate();
  std::vector<unsigned char> out;
  out.reserve(16 + 4 * (record.logits.size() + record.n_tokens));
  out.insert(out.end(), kLogitsMagic.begin(), kLogitsMagic.end());
  put_u32(out, kFormatVersion);
  put_u32(out, checked_u32(record.n_tokens, "n_tokens"));
  put_u32(out, checked_u32(record.vocab_size, "vocab_size"));
  put_floats(out, record.logits);
  put_floats(out, record.true_next_loglik);
  dump(out, path);
}

std::filesystem::path Manifest::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  Manifest m;
  m.base_dir = path.parent_path();
  if (!doc.is_object() || !doc.contains("prompts") || !doc["prompts"].is_array())
    fail(ErrorCode::kFormat, "manifest needs a \"prompts\" array");
  try {
    for (const auto& p : doc["prompts"]) {
      ManifestEntry e;
      e.prompt_id = p.at("prompt_id").get<std::string>();
      e.layers_path = p.at("layers").get<std::string>();
      if (p.contains("logits") && !p["logits"].is_null()) e.logits_path = p["logits"].get<std::string>();
      e.n_tokens = p.value("n_tokens", std::size_t{0});
      if (p.contains("shuffle_index") && !p["shuffle_index"].is_null())
        e.shuffle_index = p["shuffle_index"].get<unsigned>();
      if (p.contains("source")) e.source = p["source"];
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed manifest entry: ") + e.what());
  }
  return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  nlohmann::json prompts = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    nlohmann::json p;
    p["prompt_id"] = e.prompt_id;
    p["layers"] = e.layers_path.generic_string();
    p["logits"] = e.logits_path ? nlohmann::json(e.logits_path->generic_string()) : nlohmann::json();
    p["n_tokens"] = e.n_tokens;
    p["shuffle_index"] = e.shuffle_index ? nlohmann::json(*e.shuffle_index) : nlohmann::json();
    p["source"] = e.source;
    prompts.push_back(std::move(p));
  }
  nlohmann::json doc{{"schema_version", 1}, {"prompts", std::move(prompts)}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write manifest " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace tokgeo
