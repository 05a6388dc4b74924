#include "rfmp/flows.hpp"

#include <cmath>

namespace rfmp {

void FlowParams::validate() const {
  if (!(sigma >= 0.0)) throw ConfigError("flow.sigma must be >= 0");
  if (!(lambda_x > 0.0)) throw ConfigError("flow.lambda_x must be > 0");
  if (!(lambda_tau > 0.0)) throw ConfigError("flow.lambda_tau must be > 0");
  if (!(tau0 < tau1)) throw ConfigError("flow.tau0 must be < flow.tau1");
}

PathPoint cfm_path(const ManifoldSpec& spec, Scalar t, const Vector& x0, const Vector& x1,
                   const FlowParams& params) {
  if (!spec.is_euclidean())
    throw ManifoldError("the Gaussian conditional flow is defined on Euclidean specs only");
  PathPoint out;
  out.x = (1.0 - (1.0 - params.sigma) * t) * x0 + t * x1;
  out.u = x1 - (1.0 - params.sigma) * x0;
  return out;
}

PathPoint rcfm_geodesic_path(const ManifoldSpec& spec, Scalar t, const Vector& x0,
                             const Vector& x1) {
  if (spec.is_euclidean()) {
    FlowParams straight;
    straight.sigma = 0.0;
    return cfm_path(spec, t, x0, x1, straight);
  }
  PathPoint out;
  const Vector w = log_map(spec, x1, x0);
  out.x = exp_map(spec, x1, (1.0 - t) * w);
  // Constant-speed derivative; the two closed forms are identical, the switch
  // only avoids the division blowing up near either endpoint.
  if (t <= 0.5) {
    out.u = log_map(spec, out.x, x1) / (1.0 - t);
  } else {
    out.u = -log_map(spec, out.x, x0) / t;
  }
  return out;
}

AugmentedPathPoint sfm_path(const ManifoldSpec& spec, Scalar t, const AugmentedState& xi0,
                            const AugmentedState& xi1, const FlowParams& params) {
  if (!spec.is_euclidean())
    throw ManifoldError("the stable Euclidean flow requires a Euclidean spec");
  AugmentedPathPoint out;
  const Scalar decay_x = std::exp(-params.lambda_x * t);
  const Scalar decay_tau = std::exp(-params.lambda_tau * t);
  out.xi.x = xi1.x + decay_x * (xi0.x - xi1.x);
  out.xi.tau = xi1.tau + decay_tau * (xi0.tau - xi1.tau);
  out.u.x = -params.lambda_x * (out.xi.x - xi1.x);
  out.u.tau = -params.lambda_tau * (out.xi.tau - xi1.tau);
  return out;
}

AugmentedPathPoint srfm_path(const ManifoldSpec& spec, Scalar t, const AugmentedState& xi0,
                             const AugmentedState& xi1, const FlowParams& params) {
  if (spec.is_euclidean()) return sfm_path(spec, t, xi0, xi1, params);
  AugmentedPathPoint out;
  const Scalar decay_x = std::exp(-params.lambda_x * t);
  const Scalar decay_tau = std::exp(-params.lambda_tau * t);
  out.xi.x = exp_map(spec, xi1.x, decay_x * log_map(spec, xi1.x, xi0.x));
  out.xi.tau = xi1.tau + decay_tau * (xi0.tau - xi1.tau);
  // Analytic derivative of the contracting geodesic, expressed at x_t via the
  // geodesic-reversal identity Log_{x_t}(x1) = -P(Log_{x1}(x_t)).
  out.u.x = params.lambda_x * log_map(spec, out.xi.x, xi1.x);
  out.u.tau = -params.lambda_tau * (out.xi.tau - xi1.tau);
  return out;
}

AugmentedTangent stable_target_field(const ManifoldSpec& spec, const AugmentedState& xi,
                                     const AugmentedState& xi1, const FlowParams& params) {
  AugmentedTangent u;
  u.x = params.lambda_x * log_map(spec, xi.x, xi1.x);
  u.tau = -params.lambda_tau * (xi.tau - xi1.tau);
  return u;
}

Scalar lyapunov_value(const ManifoldSpec& spec, const AugmentedState& xi,
                      const AugmentedState& xi1, const FlowParams& params) {
  const Vector w = log_map(spec, xi1.x, xi.x);
  const Scalar dx2 = inner(spec, xi1.x, w, w);
  const Scalar dtau = xi.tau - xi1.tau;
  return 0.5 * (params.lambda_x * dx2 + params.lambda_tau * dtau * dtau);
}

Scalar lasalle_check(const ManifoldSpec& spec, const AugmentedState& xi,
                     const AugmentedState& xi1, const FlowParams& params,
                     const AugmentedField& field) {
  // grad H at xi: the spatial part is -lambda_x Log_xi(x1), the temperature
  // part lambda_tau (tau - tau1).
  const Vector grad_x = -params.lambda_x * log_map(spec, xi.x, xi1.x);
  const Scalar grad_tau = params.lambda_tau * (xi.tau - xi1.tau);
  const AugmentedTangent u = field(xi);
  return inner(spec, xi.x, grad_x, u.x) + grad_tau * u.tau;
}

}  // namespace rfmp
