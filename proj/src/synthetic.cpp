#include "tokgeo/synthetic.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "tokgeo/error.hpp"
#include "tokgeo/rng.hpp"

namespace tokgeo {

std::string_view to_string(ManifoldKind kind) noexcept {
  switch (kind) {
    case ManifoldKind::kHypercube: return "hypercube";
    case ManifoldKind::kHypersphere: return "hypersphere";
    case ManifoldKind::kGaussian: return "gaussian";
  }
  return "unknown";
}

ManifoldKind parse_manifold_kind(std::string_view name) {
  if (name == "hypercube") return ManifoldKind::kHypercube;
  if (name == "hypersphere") return ManifoldKind::kHypersphere;
  if (name == "gaussian") return ManifoldKind::kGaussian;
  fail(ErrorCode::kInvalidArgument, "unknown manifold kind '" + std::string(name) + "'");
}

PointCloud generate_synthetic(const SyntheticSpec& spec) {
  require(spec.latent_dim >= 1 && spec.n_points >= 1, ErrorCode::kInvalidArgument,
          "latent_dim and n_points must be positive");
  require(spec.latent_dim <= spec.ambient_dim, ErrorCode::kInvalidArgument,
          "latent_dim must not exceed ambient_dim");
  const std::size_t coords =
      spec.manifold_kind == ManifoldKind::kHypersphere ? spec.latent_dim + 1 : spec.latent_dim;
  require(coords <= spec.ambient_dim, ErrorCode::kInvalidArgument,
          "a latent_dim sphere needs ambient_dim >= latent_dim + 1");

  Rng rng(spec.seed);
  Eigen::MatrixXd latent(static_cast<Eigen::Index>(spec.n_points), static_cast<Eigen::Index>(coords));
  for (Eigen::Index i = 0; i < latent.rows(); ++i) {
    switch (spec.manifold_kind) {
      case ManifoldKind::kHypercube:
        for (Eigen::Index j = 0; j < latent.cols(); ++j) latent(i, j) = rng.uniform();
        break;
      case ManifoldKind::kGaussian:
        for (Eigen::Index j = 0; j < latent.cols(); ++j) latent(i, j) = rng.normal();
        break;
      case ManifoldKind::kHypersphere: {
        double norm = 0.0;
        do {
          for (Eigen::Index j = 0; j < latent.cols(); ++j) latent(i, j) = rng.normal();
          norm = latent.row(i).norm();
        } while (norm < 1e-12);
        latent.row(i) /= norm;
        break;
      }
    }
  }

  const auto ambient = static_cast<Eigen::Index>(spec.ambient_dim);
  Eigen::MatrixXd points;
  if (latent.cols() == ambient) {
    points = std::move(latent);
  } else {
    // Separate stream so the rotation does not depend on n_points.
    Rng rot_rng(derive_seed(spec.seed, "rotation"));
    Eigen::MatrixXd gauss(ambient, ambient);
    for (Eigen::Index i = 0; i < ambient; ++i)
      for (Eigen::Index j = 0; j < ambient; ++j) gauss(i, j) = rot_rng.normal();
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ();
    // Zero padding means only the first `coords` rows of Q^T contribute.
    points = latent * q.leftCols(latent.cols()).transpose();
  }

  std::vector<float> values(spec.n_points * spec.ambient_dim);
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = 0; j < ambient; ++j)
      values[static_cast<std::size_t>(i * ambient + j)] = static_cast<float>(points(i, j));
  return PointCloud(spec.n_points, spec.ambient_dim, std::move(values));
}

}  // namespace tokgeo
