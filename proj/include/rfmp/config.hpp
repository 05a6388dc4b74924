#pragma once

#include <string>
#include <vector>

#include "rfmp/distributions.hpp"
#include "rfmp/flows.hpp"
#include "rfmp/inference.hpp"
#include "rfmp/training.hpp"

#include "json.hpp"

namespace rfmp {

struct TaskConfig {
  std::string kind = "strokes";  // strokes | spd | reach
  std::string shape = "L";       // stroke letter
  int n_demos = 50;
  int length = 60;
  Scalar noise = 0.02;
  bool sphere = false;     // project strokes / run reach on S2
  Scalar jitter = 0.05;    // SPD curve jitter
  Scalar tolerance = 0.05; // reach goal tolerance
  int max_steps = 60;      // reach episode cap
  Scalar speed = 0.15;     // reach expert step size
};

struct RolloutConfig {
  int n_trials = 50;
  int n_samples = 256;
  Scalar success_threshold = 0.1;
};

struct PathsConfig {
  std::string dataset;
  std::string checkpoint;
  std::string output_dir = ".";
};

/// One run = one JSON file, overridable with dotted --key value flags. Every
/// random draw in a command descends from the single `seed`.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string manifold = "R2";
  std::string mode = "rfmp";  // rfmp | srfmp
  TaskConfig task;
  FlowParams flow;
  TrainConfig train;
  PolicyConfig policy;
  IntegratorConfig integrator;
  RolloutConfig rollout;
  PathsConfig paths;
  std::vector<PriorFactor> prior_factors;  // empty = default prior

  ManifoldSpec manifold_spec() const { return ManifoldSpec::parse(manifold); }
  PriorSpec prior_spec() const;

  /// Full cross-field validation; throws ConfigError naming the field.
  void validate() const;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path,
                        const std::vector<std::pair<std::string, std::string>>& overrides = {});
};

/// Applies one dotted-path override (e.g. "train.epochs" = "10") onto raw
/// JSON. Values parse as JSON where possible and fall back to strings.
void apply_override(nlohmann::json& j, const std::string& dotted_key, const std::string& value);

}  // namespace rfmp
