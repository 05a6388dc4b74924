#pragma once

#include <vector>

#include "rfmp/manifold.hpp"
#include "rfmp/rng.hpp"
#include "rfmp/types.hpp"

namespace rfmp {

/// One source-distribution factor, matched to one leaf factor of the target
/// manifold. The wrapped Gaussian samples an isotropic Gaussian in the
/// tangent space at its mean point and pushes it through the exponential map.
struct PriorFactor {
  enum class Kind { EuclideanGaussian, SphereUniform, WrappedGaussian };
  Kind kind = Kind::EuclideanGaussian;
  Vector mean;   // Euclidean mean or on-manifold mean point
  Scalar scale = 1.0;
};

struct PriorSpec {
  ManifoldSpec manifold = ManifoldSpec::euclidean(1);
  std::vector<PriorFactor> factors;

  /// Checks factor count, factor kinds, and mean shapes against the manifold.
  void validate() const;

  /// Standard Gaussian on Euclidean leaves, uniform on sphere leaves, wrapped
  /// unit Gaussian at the identity on SPD leaves.
  static PriorSpec default_for(const ManifoldSpec& manifold);
};

/// Draws n points from the prior; every sample satisfies the point
/// invariants of the target manifold.
std::vector<Vector> sample_prior(const PriorSpec& spec, int n, Rng& rng);

Vector sample_prior_one(const PriorSpec& spec, Rng& rng);

/// Action-chunk prior: one auxiliary draw tiled horizon_len times, so every
/// per-step action of the chunk starts from the same point.
Vector sample_chunk_prior(const PriorSpec& spec, int horizon_len, Rng& rng);

}  // namespace rfmp
