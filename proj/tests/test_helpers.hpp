#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tokgeo/error.hpp"
#include "tokgeo/rng.hpp"
#include "tokgeo/tensor_io.hpp"

namespace tokgeo::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("tokgeo_" + tag + "_" + std::to_string(mix64(reinterpret_cast<std::uintptr_t>(this))));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline PointCloud random_cloud(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n * dim);
  for (float& x : v) x = static_cast<float>(rng.normal());
  return PointCloud(n, dim, std::move(v));
}

template <typename F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::logic_error("expected a tokgeo::Error");
}

}  // namespace tokgeo::testing
