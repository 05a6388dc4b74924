#include "rfmp/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace rfmp {

namespace {

Scalar elapsed_ms(std::chrono::steady_clock::time_point start) {
  const auto now = std::chrono::steady_clock::now();
  return std::chrono::duration<Scalar, std::milli>(now - start).count();
}

std::string format_scalar(Scalar v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Scalar EvalResult::mean_score() const {
  if (trials.empty()) return 0.0;
  Scalar acc = 0.0;
  for (const auto& t : trials) acc += t.score;
  return acc / trials.size();
}

Scalar EvalResult::mean_jerk() const {
  if (trials.empty()) return 0.0;
  Scalar acc = 0.0;
  for (const auto& t : trials) acc += t.jerk;
  return acc / trials.size();
}

Scalar EvalResult::success_rate() const {
  if (trials.empty()) return 0.0;
  Scalar acc = 0.0;
  for (const auto& t : trials) acc += t.success ? 1.0 : 0.0;
  return acc / trials.size();
}

EvalResult run_reach_rollouts(const PolicyCheckpoint& ckpt, const ReachEvalConfig& env_cfg,
                              const PolicyConfig& policy, const IntegratorConfig& integrator,
                              const PriorSpec& prior, std::uint64_t base_seed, int n_trials) {
  if (n_trials < 1) throw ConfigError("rollout.n_trials must be >= 1");
  policy.validate();
  const ManifoldSpec step_spec = ManifoldSpec::parse(ckpt.manifold);
  EvalResult result;
  for (int trial = 0; trial < n_trials; ++trial) {
    const auto start_time = std::chrono::steady_clock::now();
    ReachEnv env(step_spec, env_cfg.tolerance, env_cfg.max_steps, base_seed + trial);
    Rng policy_rng(base_seed + trial);
    std::vector<Vector> history;
    const Vector obs0 = env.reset();
    // The agent is stationary before its first command, so padding the
    // history with the initial observation matches the demonstrations.
    history.push_back(obs0);
    history.push_back(obs0);

    std::vector<Vector> executed;
    executed.push_back(env.agent());
    int ode_step = 0;
    int nfe = 0;
    while (!env.done()) {
      const std::size_t n = history.size();
      const ChunkGeneration gen = generate_action_chunk(ckpt, history[n - 1], history[n - 2],
                                                        2.0, integrator, prior, policy_rng);
      nfe = gen.nfe;
      for (std::size_t k = 0; k < gen.trajectory.size(); ++k)
        result.trajectories.push_back({trial, ode_step++, gen.times[k], gen.trajectory[k]});
      const int ad = step_spec.ambient_dim();
      for (int i = 0; i < policy.action_horizon && !env.done(); ++i) {
        const Vector action = gen.chunk.segment(i * ad, ad);
        const auto step = env.step(action);
        executed.push_back(env.agent());
        history.push_back(step.observation);
      }
    }
    TrialRecord record;
    record.success = env.success();
    record.score = env.score();
    record.nfe = nfe;
    record.jerk =
        executed.size() >= 4 ? jerkiness(step_spec, executed, env_cfg.dt) : 0.0;
    record.wall_time_ms = elapsed_ms(start_time);
    result.trials.push_back(record);
  }
  return result;
}

Scalar mean_nearest_demo_distance(const ManifoldSpec& step_spec, int horizon,
                                  const std::vector<Vector>& chunks, const Dataset& dataset) {
  std::vector<Vector> demo_points;
  for (const auto& demo : dataset.demos)
    for (const auto& a : demo.actions) demo_points.push_back(a);
  if (demo_points.empty()) throw ConfigError("dataset has no actions to compare against");
  const int ad = step_spec.ambient_dim();
  Scalar acc = 0.0;
  long count = 0;
  for (const auto& chunk : chunks) {
    for (int i = 0; i < horizon; ++i) {
      const Vector a = chunk.segment(i * ad, ad);
      Scalar best = std::numeric_limits<Scalar>::infinity();
      for (const auto& p : demo_points) best = std::min(best, distance(step_spec, a, p));
      acc += best;
      ++count;
    }
  }
  return acc / static_cast<Scalar>(count);
}

EvalResult run_offline_sampling(const PolicyCheckpoint& ckpt, const Dataset& dataset,
                                const IntegratorConfig& integrator, const PriorSpec& prior,
                                std::uint64_t seed, int n_samples, Scalar success_threshold) {
  if (n_samples < 1) throw ConfigError("rollout.n_samples must be >= 1");
  const ManifoldSpec step_spec = ManifoldSpec::parse(ckpt.manifold);
  Rng rng(seed);
  EvalResult result;
  const int n_demos = static_cast<int>(dataset.demos.size());
  for (int sample = 0; sample < n_samples; ++sample) {
    const auto start_time = std::chrono::steady_clock::now();
    const int d = static_cast<int>(rng.uniform_int(0, n_demos - 1));
    const auto& demo = dataset.demos[d];
    const int len = static_cast<int>(demo.obs.size());
    if (len < ckpt.horizon + 2)
      throw ConfigError("demonstration too short for the checkpoint horizon");
    const int s = static_cast<int>(rng.uniform_int(2, len - ckpt.horizon));
    const ChunkGeneration gen =
        generate_action_chunk(ckpt, demo.obs[s - 1], demo.obs[s - 2], 2.0, integrator, prior, rng);
    for (std::size_t k = 0; k < gen.trajectory.size(); ++k)
      result.trajectories.push_back(
          {sample, static_cast<int>(k), gen.times[k], gen.trajectory[k]});
    result.samples.push_back(gen.chunk);

    std::vector<Vector> actions;
    const int ad = step_spec.ambient_dim();
    for (int i = 0; i < ckpt.horizon; ++i) actions.push_back(gen.chunk.segment(i * ad, ad));
    TrialRecord record;
    record.nfe = gen.nfe;
    record.score = mean_nearest_demo_distance(step_spec, ckpt.horizon, {gen.chunk}, dataset);
    record.success = record.score <= success_threshold;
    record.jerk = actions.size() >= 4 ? jerkiness(step_spec, actions, 1.0) : 0.0;
    record.wall_time_ms = elapsed_ms(start_time);
    result.trials.push_back(record);
  }
  result.mean_nearest_distance =
      mean_nearest_demo_distance(step_spec, ckpt.horizon, result.samples, dataset);
  return result;
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open trajectory file for writing: " + path);
  os << "rollout_id,ode_step,t";
  const int width = rows.empty() ? 0 : static_cast<int>(rows.front().coords.size());
  for (int i = 0; i < width; ++i) os << ",c" << i;
  os << "\n";
  for (const auto& row : rows) {
    os << row.rollout_id << "," << row.ode_step << "," << format_scalar(row.t);
    for (int i = 0; i < row.coords.size(); ++i) os << "," << format_scalar(row.coords[i]);
    os << "\n";
  }
  if (!os) throw IoError("failed writing trajectories: " + path);
}

nlohmann::json summary_json(const EvalResult& result, const std::string& mode, int nfe) {
  nlohmann::json trials = nlohmann::json::array();
  Scalar wall_total = 0.0;
  for (const auto& t : result.trials) {
    trials.push_back({{"success", t.success},
                      {"score", t.score},
                      {"jerkiness", t.jerk},
                      {"nfe", t.nfe},
                      {"wall_time_ms", t.wall_time_ms}});
    wall_total += t.wall_time_ms;
  }
  return {{"mode", mode},
          {"n_trials", result.trials.size()},
          {"success", result.success_rate()},
          {"score", result.mean_score()},
          {"jerkiness", result.mean_jerk()},
          {"nfe", nfe},
          {"mean_nearest_distance", result.mean_nearest_distance},
          {"trials", trials},
          {"wall_time_ms", wall_total}};
}

void write_summary_json(const std::string& path, const nlohmann::json& summary) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open summary for writing: " + path);
  os << summary.dump(2) << "\n";
  if (!os) throw IoError("failed writing summary: " + path);
}

}  // namespace rfmp
