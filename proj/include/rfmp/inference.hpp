#pragma once

#include <functional>
#include <vector>

#include "rfmp/distributions.hpp"
#include "rfmp/flows.hpp"
#include "rfmp/nnet.hpp"
#include "rfmp/rng.hpp"

namespace rfmp {

struct IntegratorConfig {
  int nfe = 10;          // function evaluations (= Euler steps)
  Scalar t_end = 1.0;    // integration horizon for time-dependent fields
  bool srfmp_first_step = true;  // lead with the 1/lambda_x convergence step
  Scalar refine_step = 0.0;      // refinement step; <= 0 picks 1/(4 lambda_x)
  // When set, the stable-flow schedule derives its step count from t_end
  // instead of treating nfe as the budget.
  bool t_end_from_config = false;

  Scalar refine_step_or_default(const FlowParams& flow) const;
  void validate(const FlowParams& flow) const;
};

struct PolicyConfig {
  int horizon = 16;         // prediction horizon, actions generated per query
  int action_horizon = 8;   // actions actually executed per query
  int obs_horizon = 2;

  void validate() const;
};

/// Time-dependent vector field; must return a tangent at the query point.
using TimeField = std::function<Vector(Scalar t, const Vector& x)>;

/// Explicit Euler in the tangent space with an exponential-map retraction
/// after every step: nfe steps of size t_end / nfe. Returns the nfe + 1
/// visited points, every one satisfying the manifold invariants.
std::vector<Vector> integrate_projected_euler(const ManifoldSpec& spec, const TimeField& field,
                                              const Vector& x0, const IntegratorConfig& config);

/// Autonomous field over the augmented (state, temperature) space.
using AutonomousField = std::function<AugmentedTangent(const AugmentedState&)>;

/// Number of steps the stable-flow schedule will take.
int srfmp_step_count(const FlowParams& flow, const IntegratorConfig& config);

/// Stable-flow sampler: one step of size 1/lambda_x (which lands exactly on
/// the target when the field is exact), then refinement steps of size
/// refine_step. By default nfe is the step budget; with t_end_from_config
/// the step count is derived from t_end instead.
std::vector<AugmentedState> integrate_srfmp(const ManifoldSpec& spec,
                                            const AutonomousField& field,
                                            const AugmentedState& xi0, const FlowParams& flow,
                                            const IntegratorConfig& config);

/// One conditional generation: everything the ODE visited plus the decoded
/// action chunk. Trajectory coordinates are reported in raw (de-normalized)
/// action space; times are the cumulative ODE times of each point.
struct ChunkGeneration {
  Vector chunk;                        // raw coordinates, horizon * action_dim
  std::vector<Vector> trajectory;      // raw coordinates per ODE step
  std::vector<Scalar> times;
  int nfe = 0;
};

/// Samples the tiled chunk prior, conditions the learned field on the given
/// observation pair, and integrates it (projected Euler for rfmp, the stable
/// schedule for srfmp).
ChunkGeneration generate_action_chunk(const PolicyCheckpoint& ckpt, const Vector& obs_prev,
                                      const Vector& obs_ctx, Scalar gap,
                                      const IntegratorConfig& config, const PriorSpec& prior,
                                      Rng& rng);

/// Receding-horizon policy query: builds the observation vector from the two
/// most recent entries of env_history, generates a chunk, and returns its
/// first action_horizon actions (raw coordinates, on-manifold).
std::vector<Vector> policy_act(const PolicyCheckpoint& ckpt,
                               const std::vector<Vector>& env_history,
                               const PolicyConfig& policy, const IntegratorConfig& config,
                               const PriorSpec& prior, Rng& rng);

/// Mean squared third-order difference of the Euclidean position factors,
/// divided by dt^6. Sequences shorter than 4 are rejected; manifolds without
/// Euclidean factors score 0 by convention.
Scalar jerkiness(const ManifoldSpec& step_spec, const std::vector<Vector>& actions, Scalar dt);

}  // namespace rfmp
