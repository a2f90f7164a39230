#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "tokgeo/tensor_io.hpp"

namespace tokgeo {

enum class ManifoldKind { kHypercube, kHypersphere, kGaussian };

std::string_view to_string(ManifoldKind kind) noexcept;
ManifoldKind parse_manifold_kind(std::string_view name);

// Known-dimension point cloud used to validate the estimators.
struct SyntheticSpec {
  ManifoldKind manifold_kind = ManifoldKind::kHypercube;
  std::size_t latent_dim = 2;
  std::size_t ambient_dim = 2;
  std::size_t n_points = 1024;
  std::uint64_t seed = 0;
};

// Samples uniformly on the manifold: the unit cube [0,1]^latent, the unit
// sphere S^latent (embedded in latent+1 coordinates) or a standard normal.
// When the sampling coordinates are fewer than ambient_dim they are zero
// padded and mapped through a random orthogonal matrix (QR of a Gaussian
// matrix); otherwise the embedding is the identity.
PointCloud generate_synthetic(const SyntheticSpec& spec);

}  // namespace tokgeo
