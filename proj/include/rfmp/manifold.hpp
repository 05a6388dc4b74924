#pragma once

#include <string>
#include <vector>

#include "rfmp/types.hpp"

namespace rfmp {

/// Declares the geometry every point and tangent vector lives on.
///
/// Points are stored in ambient coordinates as flat vectors: unit vectors for
/// spheres, symmetric matrices flattened row-major for SPD, concatenations
/// for products. The sphere parameter is the ambient dimension (S2 lives in
/// R^3), the SPD parameter the matrix order.
class ManifoldSpec {
 public:
  enum class Kind { Euclidean, Sphere, Spd, Product };

  static ManifoldSpec euclidean(int dim);
  static ManifoldSpec sphere(int ambient_dim);
  static ManifoldSpec spd(int matrix_order);
  static ManifoldSpec product(std::vector<ManifoldSpec> factors);
  /// n-fold product of `factor` with itself (n = 1 returns the factor).
  static ManifoldSpec power(const ManifoldSpec& factor, int n);

  /// Parses the compact grammar `R<d>`, `S<d>`, `SPD<n>` and `x`-separated
  /// products, e.g. "R3xS3xR1". Printing parses back bit-exactly.
  static ManifoldSpec parse(const std::string& text);
  std::string to_string() const;

  Kind kind() const { return kind_; }
  int param() const { return param_; }
  const std::vector<ManifoldSpec>& factors() const { return factors_; }

  int ambient_dim() const;
  int intrinsic_dim() const;
  bool is_euclidean() const;  // true iff every leaf factor is Euclidean

  /// Leaf factors in order, paired with their ambient coordinate offsets.
  std::vector<std::pair<ManifoldSpec, int>> leaves() const;

  bool operator==(const ManifoldSpec& other) const;
  bool operator!=(const ManifoldSpec& other) const { return !(*this == other); }

 private:
  ManifoldSpec(Kind kind, int param) : kind_(kind), param_(param) {}
  explicit ManifoldSpec(std::vector<ManifoldSpec> factors)
      : kind_(Kind::Product), param_(0), factors_(std::move(factors)) {}

  Kind kind_;
  int param_;  // Euclidean dim, sphere ambient dim, or SPD matrix order
  std::vector<ManifoldSpec> factors_;
};

// Point/tangent invariant checks. Tolerance 1e-9 on unit norm (sphere),
// symmetry (SPD); SPD points must additionally be positive definite.
void check_point(const ManifoldSpec& spec, const Vector& x);
void check_tangent(const ManifoldSpec& spec, const Vector& x, const Vector& v);
bool is_on_manifold(const ManifoldSpec& spec, const Vector& x, Scalar tol = 1e-9);

/// Geodesic step: the point reached from x along tangent v after unit time.
Vector exp_map(const ManifoldSpec& spec, const Vector& x, const Vector& v);

/// Inverse of exp_map: the tangent at x whose geodesic reaches y.
/// Throws CutLocusError for antipodal sphere points.
Vector log_map(const ManifoldSpec& spec, const Vector& x, const Vector& y);

/// Geodesic distance. Products combine factors as the root of summed squares.
Scalar distance(const ManifoldSpec& spec, const Vector& x, const Vector& y);

/// Nearest-point style retraction onto the manifold: normalization for the
/// sphere, symmetrization plus an eigenvalue floor of 1e-8 for SPD. Fixed
/// point for inputs already on the manifold.
Vector project_to_manifold(const ManifoldSpec& spec, const Vector& raw);

/// Orthogonal projection of an ambient vector onto the tangent space at x.
/// Idempotent; identity on Euclidean factors.
Vector project_to_tangent(const ManifoldSpec& spec, const Vector& x, const Vector& raw);

/// Riemannian inner product of two tangents at x (affine-invariant for SPD).
Scalar inner(const ManifoldSpec& spec, const Vector& x, const Vector& u, const Vector& v);

Scalar norm(const ManifoldSpec& spec, const Vector& x, const Vector& v);

/// Applies the metric tensor at x to a tangent, returning the ambient
/// representation of g_x(v, .): identity except Sigma^-1 V Sigma^-1 on SPD.
Vector metric_apply(const ManifoldSpec& spec, const Vector& x, const Vector& v);

/// Draws a uniform (sphere) / standard Gaussian (Euclidean) / wrapped unit
/// Gaussian (SPD, centred at identity) point; used by tests and tooling.
Vector random_point(const ManifoldSpec& spec, class Rng& rng);
Vector random_tangent(const ManifoldSpec& spec, const Vector& x, class Rng& rng);

namespace hooks {
// Fault-injection switch used by the property runner's mutation check.
enum class Mutation { None, SphereExpSignFlip };
extern Mutation mutation;
}  // namespace hooks

}  // namespace rfmp
