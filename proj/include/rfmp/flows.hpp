#pragma once

#include <functional>

#include "rfmp/manifold.hpp"
#include "rfmp/types.hpp"

namespace rfmp {

/// Parameters shared by the conditional and stable flow constructions.
/// lambda_x and lambda_tau are the diagonal blocks of the positive-definite
/// stability matrix acting on the spatial and pseudo-time parts.
struct FlowParams {
  Scalar sigma = 0.0;
  Scalar lambda_x = 2.5;
  Scalar lambda_tau = 2.5;
  Scalar tau0 = 0.0;
  Scalar tau1 = 1.0;

  void validate() const;
};

/// Spatial state augmented with the pseudo-time (temperature) coordinate that
/// makes the stable vector field autonomous.
struct AugmentedState {
  Vector x;
  Scalar tau = 0.0;
};

/// Tangent to the augmented state space at some base state.
struct AugmentedTangent {
  Vector x;
  Scalar tau = 0.0;
};

struct PathPoint {
  Vector x;
  Vector u;  // tangent at x
};

struct AugmentedPathPoint {
  AugmentedState xi;
  AugmentedTangent u;  // tangent at xi
};

/// Gaussian conditional flow on Euclidean space: linear interpolation with
/// residual width sigma. The target field is constant in t. Euclidean only.
PathPoint cfm_path(const ManifoldSpec& spec, Scalar t, const Vector& x0, const Vector& x1,
                   const FlowParams& params);

/// Geodesic conditional flow: x_t runs along the geodesic from x0 (t = 0) to
/// x1 (t = 1) at constant speed; the field is the path's time derivative,
/// returned as a tangent at x_t. Degenerates to cfm_path with sigma = 0 on
/// Euclidean specs, bit for bit.
PathPoint rcfm_geodesic_path(const ManifoldSpec& spec, Scalar t, const Vector& x0,
                             const Vector& x1);

/// Stable Euclidean flow: exponential contraction of state and temperature
/// toward the target, defined for all t >= 0.
AugmentedPathPoint sfm_path(const ManifoldSpec& spec, Scalar t, const AugmentedState& xi0,
                            const AugmentedState& xi1, const FlowParams& params);

/// Stable Riemannian flow: geodesic contraction toward x1 with rate lambda_x.
/// The spatial field is the path's analytic time derivative, a tangent at
/// x_t; on fully Euclidean specs this reproduces sfm_path exactly.
AugmentedPathPoint srfm_path(const ManifoldSpec& spec, Scalar t, const AugmentedState& xi0,
                             const AugmentedState& xi1, const FlowParams& params);

/// Exact stable target field evaluated at xi (the field srfm_path follows):
/// spatial part lambda_x * Log_xi(x1), temperature part -lambda_tau (tau - tau1).
AugmentedTangent stable_target_field(const ManifoldSpec& spec, const AugmentedState& xi,
                                     const AugmentedState& xi1, const FlowParams& params);

/// Candidate Lyapunov value: a weighted squared geodesic distance to xi1 in
/// the augmented space. Zero exactly at xi1, positive elsewhere.
Scalar lyapunov_value(const ManifoldSpec& spec, const AugmentedState& xi,
                      const AugmentedState& xi1, const FlowParams& params);

using AugmentedField =
    std::function<AugmentedTangent(const AugmentedState&)>;

/// Directional derivative of the Lyapunov function along `field` at xi,
/// computed as the Riemannian inner product of grad H with the field value.
/// Nonpositive for the exact stable field; a positive value flags an
/// outward-pointing (destabilizing) field.
Scalar lasalle_check(const ManifoldSpec& spec, const AugmentedState& xi,
                     const AugmentedState& xi1, const FlowParams& params,
                     const AugmentedField& field);

}  // namespace rfmp
