#pragma once

#include <string>
#include <vector>

#include "rfmp/inference.hpp"
#include "rfmp/tasks.hpp"

#include "json.hpp"

namespace rfmp {

/// One row of the trajectory dump: `rollout_id, ode_step, t, coords...`.
struct TrajectoryRow {
  int rollout_id = 0;
  int ode_step = 0;
  Scalar t = 0.0;
  Vector coords;
};

struct TrialRecord {
  bool success = false;
  Scalar score = 0.0;
  Scalar jerk = 0.0;
  int nfe = 0;
  Scalar wall_time_ms = 0.0;
};

struct EvalResult {
  std::vector<TrialRecord> trials;
  std::vector<TrajectoryRow> trajectories;
  // Offline sampling only: generated chunks (raw coordinates) and the mean
  // geodesic distance from generated actions to their nearest demo action.
  std::vector<Vector> samples;
  Scalar mean_nearest_distance = 0.0;

  Scalar mean_score() const;
  Scalar mean_jerk() const;
  Scalar success_rate() const;
};

struct ReachEvalConfig {
  Scalar tolerance = 0.05;
  int max_steps = 60;
  Scalar dt = 1.0;  // nominal control period for the jerkiness metric
};

/// Seeded closed-loop rollouts in the reach environment, trial k using seed
/// base_seed + k for both the environment and the policy stream.
EvalResult run_reach_rollouts(const PolicyCheckpoint& ckpt, const ReachEvalConfig& env_cfg,
                              const PolicyConfig& policy, const IntegratorConfig& integrator,
                              const PriorSpec& prior, std::uint64_t base_seed, int n_trials);

/// Conditional generation against dataset windows: each sample conditions on
/// a window drawn from the demonstrations, integrates the learned flow, and
/// is scored by nearest-demo geodesic distance. success is distance <=
/// success_threshold.
EvalResult run_offline_sampling(const PolicyCheckpoint& ckpt, const Dataset& dataset,
                                const IntegratorConfig& integrator, const PriorSpec& prior,
                                std::uint64_t seed, int n_samples, Scalar success_threshold);

/// Mean over generated per-step actions of the geodesic distance to the
/// nearest demonstration action.
Scalar mean_nearest_demo_distance(const ManifoldSpec& step_spec, int horizon,
                                  const std::vector<Vector>& chunks, const Dataset& dataset);

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows);

/// Rollout summary: aggregate metrics plus per-trial records. Wall times are
/// the only non-reproducible fields and sit in dedicated keys.
nlohmann::json summary_json(const EvalResult& result, const std::string& mode, int nfe);
void write_summary_json(const std::string& path, const nlohmann::json& summary);

}  // namespace rfmp
