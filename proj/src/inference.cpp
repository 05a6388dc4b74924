#include "rfmp/inference.hpp"

#include <cmath>

#include "rfmp/training.hpp"

namespace rfmp {

Scalar IntegratorConfig::refine_step_or_default(const FlowParams& flow) const {
  return refine_step > 0.0 ? refine_step : 1.0 / (4.0 * flow.lambda_x);
}

void IntegratorConfig::validate(const FlowParams& flow) const {
  if (nfe < 1) throw ConfigError("integrator.nfe must be >= 1");
  if (!(t_end > 0.0)) throw ConfigError("integrator.t_end must be > 0");
  if (refine_step_or_default(flow) > 1.0 / flow.lambda_x + 1e-12)
    throw ConfigError("integrator.refine_step must be <= 1/lambda_x");
}

void PolicyConfig::validate() const {
  if (horizon < 1) throw ConfigError("policy.horizon must be >= 1");
  if (action_horizon < 1 || action_horizon > horizon)
    throw ConfigError("policy.action_horizon must satisfy 1 <= T_a <= T_p");
  if (obs_horizon < 2) throw ConfigError("policy.obs_horizon must be >= 2");
}

std::vector<Vector> integrate_projected_euler(const ManifoldSpec& spec, const TimeField& field,
                                              const Vector& x0, const IntegratorConfig& config) {
  if (config.nfe < 1) throw ConfigError("integrator.nfe must be >= 1");
  const Scalar dt = config.t_end / config.nfe;
  std::vector<Vector> trajectory;
  trajectory.reserve(config.nfe + 1);
  trajectory.push_back(x0);
  Vector x = x0;
  for (int k = 0; k < config.nfe; ++k) {
    const Vector v = field(k * dt, x);
    if (!v.allFinite()) throw DivergedError("vector field returned non-finite values");
    x = exp_map(spec, x, dt * v);
    trajectory.push_back(x);
  }
  return trajectory;
}

int srfmp_step_count(const FlowParams& flow, const IntegratorConfig& config) {
  if (!config.t_end_from_config) return config.nfe;
  const Scalar eps = config.refine_step_or_default(flow);
  const Scalar first = config.srfmp_first_step ? 1.0 / flow.lambda_x : eps;
  if (config.t_end <= first + 1e-12) return 1;
  return 1 + static_cast<int>(std::ceil((config.t_end - first) / eps - 1e-9));
}

std::vector<AugmentedState> integrate_srfmp(const ManifoldSpec& spec,
                                            const AutonomousField& field,
                                            const AugmentedState& xi0, const FlowParams& flow,
                                            const IntegratorConfig& config) {
  config.validate(flow);
  const Scalar eps = config.refine_step_or_default(flow);
  const int steps = srfmp_step_count(flow, config);
  std::vector<AugmentedState> trajectory;
  trajectory.reserve(steps + 1);
  trajectory.push_back(xi0);
  AugmentedState xi = xi0;
  for (int k = 0; k < steps; ++k) {
    const Scalar dt = (k == 0 && config.srfmp_first_step) ? 1.0 / flow.lambda_x : eps;
    const AugmentedTangent u = field(xi);
    if (!u.x.allFinite() || !std::isfinite(u.tau))
      throw DivergedError("vector field returned non-finite values");
    xi.x = exp_map(spec, xi.x, dt * u.x);
    xi.tau += dt * u.tau;
    trajectory.push_back(xi);
  }
  return trajectory;
}

ChunkGeneration generate_action_chunk(const PolicyCheckpoint& ckpt, const Vector& obs_prev,
                                      const Vector& obs_ctx, Scalar gap,
                                      const IntegratorConfig& config, const PriorSpec& prior,
                                      Rng& rng) {
  const ManifoldSpec step_spec = ManifoldSpec::parse(ckpt.manifold);
  const ManifoldSpec chunk_spec = ManifoldSpec::power(step_spec, ckpt.horizon);
  const int obs_horizon = ckpt.model.cfg.obs_dim == 2 * ckpt.obs_state_dim ? 2 : 3;
  const Vector obs_net = build_obs_vector(ckpt.norm, obs_prev, obs_ctx, gap, obs_horizon);

  const Vector chunk0_raw = sample_chunk_prior(prior, ckpt.horizon, rng);
  const Vector x_start = ckpt.norm.normalize_chunk(chunk0_raw);

  ChunkGeneration out;
  if (ckpt.mode == "srfmp") {
    AutonomousField field = [&](const AugmentedState& xi) {
      const Vector input = assemble_input(ckpt.model.cfg, xi.x, xi.tau, obs_net);
      const ModelOutput mo = forward_one(ckpt.model, input);
      AugmentedTangent u;
      u.x = project_to_tangent(chunk_spec, xi.x, mo.spatial.row(0).transpose());
      u.tau = mo.tau[0];
      return u;
    };
    const AugmentedState xi0{x_start, ckpt.flow.tau0};
    const auto traj = integrate_srfmp(chunk_spec, field, xi0, ckpt.flow, config);
    Scalar t = 0.0;
    const Scalar eps = config.refine_step_or_default(ckpt.flow);
    for (std::size_t k = 0; k < traj.size(); ++k) {
      out.trajectory.push_back(ckpt.norm.denormalize_chunk(traj[k].x));
      out.times.push_back(t);
      if (k + 1 < traj.size())
        t += (k == 0 && config.srfmp_first_step) ? 1.0 / ckpt.flow.lambda_x : eps;
    }
    out.chunk = out.trajectory.back();
    out.nfe = static_cast<int>(traj.size()) - 1;
  } else {
    TimeField field = [&](Scalar t, const Vector& x) {
      const Vector input = assemble_input(ckpt.model.cfg, x, t, obs_net);
      const ModelOutput mo = forward_one(ckpt.model, input);
      return project_to_tangent(chunk_spec, x, mo.spatial.row(0).transpose());
    };
    const auto traj = integrate_projected_euler(chunk_spec, field, x_start, config);
    const Scalar dt = config.t_end / config.nfe;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      out.trajectory.push_back(ckpt.norm.denormalize_chunk(traj[k]));
      out.times.push_back(k * dt);
    }
    out.chunk = out.trajectory.back();
    out.nfe = config.nfe;
  }
  return out;
}

std::vector<Vector> policy_act(const PolicyCheckpoint& ckpt,
                               const std::vector<Vector>& env_history,
                               const PolicyConfig& policy, const IntegratorConfig& config,
                               const PriorSpec& prior, Rng& rng) {
  policy.validate();
  if (static_cast<int>(env_history.size()) < policy.obs_horizon)
    throw ConfigError("policy warm-up: history holds fewer than T_o observations");
  const std::size_t n = env_history.size();
  const ChunkGeneration gen = generate_action_chunk(ckpt, env_history[n - 1], env_history[n - 2],
                                                    2.0, config, prior, rng);
  const ManifoldSpec step_spec = ManifoldSpec::parse(ckpt.manifold);
  const int ad = step_spec.ambient_dim();
  std::vector<Vector> actions;
  actions.reserve(policy.action_horizon);
  for (int i = 0; i < policy.action_horizon && i < ckpt.horizon; ++i)
    actions.push_back(gen.chunk.segment(i * ad, ad));
  return actions;
}

Scalar jerkiness(const ManifoldSpec& step_spec, const std::vector<Vector>& actions, Scalar dt) {
  if (actions.size() < 4)
    throw ConfigError("jerkiness needs at least 4 actions");
  if (!(dt > 0)) throw ConfigError("jerkiness needs dt > 0");
  std::vector<int> euclid_dims;
  for (const auto& [leaf, off] : step_spec.leaves()) {
    if (leaf.kind() != ManifoldSpec::Kind::Euclidean) continue;
    for (int d = 0; d < leaf.ambient_dim(); ++d) euclid_dims.push_back(off + d);
  }
  if (euclid_dims.empty()) return 0.0;
  Scalar acc = 0.0;
  const std::size_t n = actions.size();
  for (std::size_t i = 0; i + 3 < n; ++i) {
    Scalar sq = 0.0;
    for (int d : euclid_dims) {
      const Scalar diff =
          actions[i + 3][d] - 3.0 * actions[i + 2][d] + 3.0 * actions[i + 1][d] - actions[i][d];
      sq += diff * diff;
    }
    acc += sq;
  }
  const Scalar mean = acc / static_cast<Scalar>(n - 3);
  return mean / std::pow(dt, 6);
}

}  // namespace rfmp
