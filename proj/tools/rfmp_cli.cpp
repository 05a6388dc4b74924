#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rfmp/config.hpp"
#include "rfmp/evaluation.hpp"
#include "rfmp/inference.hpp"
#include "rfmp/properties.hpp"
#include "rfmp/tasks.hpp"
#include "rfmp/training.hpp"

namespace {

using rfmp::ConfigError;
using rfmp::Dataset;
using rfmp::IoError;
using rfmp::RunConfig;

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;

// Leftover "--key value" tokens become dotted-path overrides; a few common
// flags get short aliases.
std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& extras) {
  static const std::map<std::string, std::string> aliases = {
      {"nfe", "integrator.nfe"},       {"t-end", "integrator.t_end"},
      {"seed", "seed"},                {"mode", "mode"},
      {"epochs", "train.epochs"},      {"n-trials", "rollout.n_trials"},
      {"n-samples", "rollout.n_samples"}, {"dataset", "paths.dataset"},
      {"checkpoint", "paths.checkpoint"}, {"output", "paths.output_dir"},
      {"use-ema", "train.use_ema"}};
  std::vector<std::pair<std::string, std::string>> overrides;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string key = extras[i];
    if (key.rfind("--", 0) != 0)
      throw ConfigError("unexpected argument \"" + key + "\" (expected --key value)");
    key = key.substr(2);
    std::string value;
    const auto eq = key.find('=');
    if (eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("override --" + key + " lacks a value");
      value = extras[++i];
    }
    const auto alias = aliases.find(key);
    overrides.emplace_back(alias != aliases.end() ? alias->second : key, value);
  }
  return overrides;
}

Dataset build_dataset(const RunConfig& config) {
  const auto& task = config.task;
  if (task.kind == "strokes") {
    Dataset planar = rfmp::gen_strokes(rfmp::stroke_shape_from_string(task.shape), task.n_demos,
                                       task.noise, config.seed, task.length);
    return task.sphere ? rfmp::project_dataset_to_sphere(planar) : planar;
  }
  if (task.kind == "spd")
    return rfmp::gen_spd_demos(task.n_demos, task.length, task.jitter, config.seed);
  return rfmp::gen_reach_demos(config.manifold_spec(), task.n_demos, task.speed, config.seed,
                               task.length);
}

void ensure_output_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

int cmd_gen_data(const RunConfig& config) {
  config.validate();
  if (config.paths.dataset.empty()) throw ConfigError("paths.dataset must be set for gen-data");
  const Dataset dataset = build_dataset(config);
  nlohmann::json header{{"task", config.task.kind},
                        {"shape", config.task.shape},
                        {"seed", config.seed},
                        {"length", config.task.length},
                        {"noise", config.task.noise},
                        {"jitter", config.task.jitter},
                        {"sphere", config.task.sphere}};
  rfmp::save_dataset(config.paths.dataset, dataset, header);
  std::cout << "wrote " << dataset.demos.size() << " demonstrations to "
            << config.paths.dataset << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& config) {
  config.validate();
  if (config.paths.dataset.empty()) throw ConfigError("paths.dataset must be set for train");
  if (config.paths.checkpoint.empty())
    throw ConfigError("paths.checkpoint must be set for train");
  const auto loaded = rfmp::load_dataset(config.paths.dataset);
  if (loaded.dataset.action_manifold != config.manifold_spec())
    throw ConfigError("dataset manifold " + loaded.dataset.action_manifold.to_string() +
                      " does not match config manifold " + config.manifold);
  ensure_output_dir(config.paths.output_dir);

  const rfmp::TrainResult result =
      rfmp::train(loaded.dataset, config.train, config.flow, config.prior_spec(),
                  config.policy.horizon, config.policy.obs_horizon);
  rfmp::save_checkpoint(config.paths.checkpoint, result.checkpoint);
  const auto reloaded = rfmp::load_checkpoint(config.paths.checkpoint);
  if (!(reloaded.model.pack().array() == result.checkpoint.model.pack().array()).all())
    throw IoError("checkpoint failed its bit-exact reload check");
  rfmp::write_loss_history_csv(config.paths.output_dir + "/loss.csv", result.history);
  if (!result.history.empty())
    std::cout << "trained " << result.history.size() << " epochs, final loss "
              << result.history.back().mean_loss << "\n";
  std::cout << "checkpoint written to " << config.paths.checkpoint << "\n";
  return kExitOk;
}

int cmd_rollout(const RunConfig& config) {
  config.validate();
  if (config.paths.checkpoint.empty())
    throw ConfigError("paths.checkpoint must be set for rollout");
  const rfmp::PolicyCheckpoint ckpt = rfmp::load_checkpoint(config.paths.checkpoint);
  if (ckpt.manifold != config.manifold)
    throw ConfigError("checkpoint manifold " + ckpt.manifold +
                      " does not match config manifold " + config.manifold);
  if (ckpt.mode != config.mode)
    throw ConfigError("checkpoint mode " + ckpt.mode + " does not match config mode " +
                      config.mode);
  ensure_output_dir(config.paths.output_dir);

  rfmp::EvalResult result;
  int nfe = config.integrator.nfe;
  if (config.task.kind == "reach") {
    rfmp::ReachEvalConfig env_cfg;
    env_cfg.tolerance = config.task.tolerance;
    env_cfg.max_steps = config.task.max_steps;
    result = rfmp::run_reach_rollouts(ckpt, env_cfg, config.policy, config.integrator,
                                      config.prior_spec(), config.seed,
                                      config.rollout.n_trials);
  } else {
    if (config.paths.dataset.empty())
      throw ConfigError("paths.dataset must be set for offline sampling rollouts");
    const auto loaded = rfmp::load_dataset(config.paths.dataset);
    if (loaded.dataset.action_manifold != config.manifold_spec())
      throw ConfigError("dataset manifold does not match config manifold");
    result = rfmp::run_offline_sampling(ckpt, loaded.dataset, config.integrator,
                                        config.prior_spec(), config.seed,
                                        config.rollout.n_samples,
                                        config.rollout.success_threshold);
  }
  if (!result.trials.empty()) nfe = result.trials.front().nfe;
  rfmp::write_trajectory_csv(config.paths.output_dir + "/trajectories.csv",
                             result.trajectories);
  const nlohmann::json summary = rfmp::summary_json(result, config.mode, nfe);
  rfmp::write_summary_json(config.paths.output_dir + "/summary.json", summary);
  std::cout << "score " << result.mean_score() << ", success " << result.success_rate()
            << ", nfe " << nfe << "\n";
  return kExitOk;
}

int cmd_eval_properties(const std::string& mutate, const std::string& report_path) {
  if (mutate.empty()) {
    rfmp::hooks::mutation = rfmp::hooks::Mutation::None;
  } else if (mutate == "sphere-exp-sign") {
    rfmp::hooks::mutation = rfmp::hooks::Mutation::SphereExpSignFlip;
  } else {
    throw ConfigError("unknown mutation \"" + mutate + "\"");
  }
  const auto results = rfmp::run_property_suite();
  rfmp::hooks::mutation = rfmp::hooks::Mutation::None;

  nlohmann::json report{{"properties", nlohmann::json::array()}};
  bool all_pass = true;
  for (const auto& r : results) {
    report["properties"].push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    all_pass = all_pass && r.pass;
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name;
    if (!r.pass) std::cout << "  (" << r.detail << ")";
    std::cout << "\n";
  }
  report["all_pass"] = all_pass;
  report["count"] = results.size();
  if (!report_path.empty()) {
    std::ofstream os(report_path);
    if (!os) throw IoError("cannot open report path: " + report_path);
    os << report.dump(2) << "\n";
  }
  std::cout << (all_pass ? "all properties passed" : "property failures detected") << "\n";
  return all_pass ? kExitOk : kExitPropertyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian flow matching policies: data generation, training, and rollouts"};
  app.require_subcommand(1);

  std::string config_path;
  std::string mutate;
  std::string report_path;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic task dataset");
  gen->add_option("--config", config_path, "run config JSON")->required();
  gen->allow_extras();

  auto* train_cmd = app.add_subcommand("train", "train a policy on a dataset");
  train_cmd->add_option("--config", config_path, "run config JSON")->required();
  train_cmd->allow_extras();

  auto* rollout = app.add_subcommand("rollout", "run seeded rollouts / sampling");
  rollout->add_option("--config", config_path, "run config JSON")->required();
  rollout->allow_extras();

  auto* props = app.add_subcommand("eval-properties", "run the module invariant suite");
  props->add_option("--mutate", mutate, "fault-injection hook (sphere-exp-sign)");
  props->add_option("--report", report_path, "write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (props->parsed()) return cmd_eval_properties(mutate, report_path);
    CLI::App* active = gen->parsed() ? gen : train_cmd->parsed() ? train_cmd : rollout;
    const RunConfig config =
        RunConfig::load(config_path, parse_overrides(active->remaining()));
    if (gen->parsed()) return cmd_gen_data(config);
    if (train_cmd->parsed()) return cmd_train(config);
    return cmd_rollout(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rfmp::DivergedError& e) {
    std::cerr << "numeric divergence: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
