#include "rfmp/distributions.hpp"

#include <cmath>

namespace rfmp {

namespace {

Vector sample_factor(const PriorFactor& factor, const ManifoldSpec& leaf, Rng& rng) {
  switch (factor.kind) {
    case PriorFactor::Kind::EuclideanGaussian:
      return factor.mean + factor.scale * rng.normal_vector(leaf.ambient_dim());
    case PriorFactor::Kind::SphereUniform: {
      Vector v = rng.normal_vector(leaf.ambient_dim());
      while (v.norm() < 1e-8) v = rng.normal_vector(leaf.ambient_dim());
      return v / v.norm();
    }
    case PriorFactor::Kind::WrappedGaussian: {
      // Projecting an isotropic ambient Gaussian onto the tangent space keeps
      // the per-coordinate variance, so scaling before the exponential map
      // realizes the requested tangent-space standard deviation.
      Vector ambient = rng.normal_vector(leaf.ambient_dim());
      Vector tangent = factor.scale * project_to_tangent(leaf, factor.mean, ambient);
      return exp_map(leaf, factor.mean, tangent);
    }
  }
  throw ManifoldError("unreachable");
}

}  // namespace

void PriorSpec::validate() const {
  const auto leaves = manifold.leaves();
  if (leaves.size() != factors.size())
    throw ConfigError("prior has " + std::to_string(factors.size()) + " factors but manifold " +
                      manifold.to_string() + " has " + std::to_string(leaves.size()));
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const auto& [leaf, offset] = leaves[i];
    const auto& f = factors[i];
    const std::string where = "prior factor " + std::to_string(i) + " (" + leaf.to_string() + ")";
    switch (f.kind) {
      case PriorFactor::Kind::EuclideanGaussian:
        if (leaf.kind() != ManifoldSpec::Kind::Euclidean)
          throw ConfigError(where + ": euclidean_gaussian requires a Euclidean factor");
        if (f.mean.size() != leaf.ambient_dim())
          throw ConfigError(where + ": mean has wrong dimension");
        break;
      case PriorFactor::Kind::SphereUniform:
        if (leaf.kind() != ManifoldSpec::Kind::Sphere)
          throw ConfigError(where + ": sphere_uniform requires a sphere factor");
        break;
      case PriorFactor::Kind::WrappedGaussian:
        if (f.mean.size() != leaf.ambient_dim())
          throw ConfigError(where + ": mean point has wrong dimension");
        if (!is_on_manifold(leaf, f.mean))
          throw ConfigError(where + ": mean point is not on the factor manifold");
        break;
    }
    if (f.kind != PriorFactor::Kind::SphereUniform && !(f.scale >= 0.0))
      throw ConfigError(where + ": scale must be >= 0");
  }
}

PriorSpec PriorSpec::default_for(const ManifoldSpec& manifold) {
  PriorSpec spec;
  spec.manifold = manifold;
  for (const auto& [leaf, offset] : manifold.leaves()) {
    PriorFactor f;
    switch (leaf.kind()) {
      case ManifoldSpec::Kind::Euclidean:
        f.kind = PriorFactor::Kind::EuclideanGaussian;
        f.mean = Vector::Zero(leaf.ambient_dim());
        f.scale = 1.0;
        break;
      case ManifoldSpec::Kind::Sphere:
        f.kind = PriorFactor::Kind::SphereUniform;
        break;
      case ManifoldSpec::Kind::Spd: {
        f.kind = PriorFactor::Kind::WrappedGaussian;
        Matrix id = Matrix::Identity(leaf.param(), leaf.param());
        Vector flat(leaf.ambient_dim());
        for (int i = 0; i < leaf.param(); ++i)
          for (int j = 0; j < leaf.param(); ++j) flat[i * leaf.param() + j] = id(i, j);
        f.mean = flat;
        f.scale = 0.5;
        break;
      }
      default:
        throw ConfigError("no default prior for nested product factors");
    }
    spec.factors.push_back(std::move(f));
  }
  return spec;
}

Vector sample_prior_one(const PriorSpec& spec, Rng& rng) {
  const auto leaves = spec.manifold.leaves();
  Vector out(spec.manifold.ambient_dim());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto& [leaf, offset] = leaves[i];
    out.segment(offset, leaf.ambient_dim()) = sample_factor(spec.factors[i], leaf, rng);
  }
  return out;
}

std::vector<Vector> sample_prior(const PriorSpec& spec, int n, Rng& rng) {
  if (n < 1) throw ConfigError("sample count must be >= 1");
  std::vector<Vector> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(sample_prior_one(spec, rng));
  return out;
}

Vector sample_chunk_prior(const PriorSpec& spec, int horizon_len, Rng& rng) {
  if (horizon_len < 1) throw ConfigError("prediction horizon must be >= 1");
  const Vector base = sample_prior_one(spec, rng);
  Vector chunk(base.size() * horizon_len);
  for (int i = 0; i < horizon_len; ++i) chunk.segment(i * base.size(), base.size()) = base;
  return chunk;
}

}  // namespace rfmp
