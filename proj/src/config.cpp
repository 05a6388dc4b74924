#include "rfmp/config.hpp"

#include <fstream>

#include "rfmp/tasks.hpp"

namespace rfmp {

namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field \"") + key + "\" has the wrong type");
  }
}

Vector read_vector_field(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array())
    throw ConfigError(std::string("prior factor needs an array field \"") + key + "\"");
  const auto& arr = j.at(key);
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<Scalar>();
  return v;
}

}  // namespace

PriorSpec RunConfig::prior_spec() const {
  const ManifoldSpec spec = manifold_spec();
  if (prior_factors.empty()) return PriorSpec::default_for(spec);
  PriorSpec prior;
  prior.manifold = spec;
  prior.factors = prior_factors;
  prior.validate();
  return prior;
}

void RunConfig::validate() const {
  if (mode != "rfmp" && mode != "srfmp")
    throw ConfigError("mode must be \"rfmp\" or \"srfmp\"");
  const ManifoldSpec spec = manifold_spec();  // throws naming the manifold field
  if (task.kind != "strokes" && task.kind != "spd" && task.kind != "reach")
    throw ConfigError("task.kind must be strokes, spd, or reach");
  if (task.kind == "strokes") {
    stroke_shape_from_string(task.shape);
    const std::string expected = task.sphere ? "S2" : "R2";
    if (spec != ManifoldSpec::parse(expected))
      throw ConfigError("manifold must be " + expected + " for this strokes task");
  } else if (task.kind == "spd") {
    if (spec != ManifoldSpec::spd(2)) throw ConfigError("manifold must be SPD2 for the spd task");
  } else if (task.kind == "reach") {
    const std::string expected = task.sphere ? "S2" : "R2";
    if (spec != ManifoldSpec::parse(expected))
      throw ConfigError("manifold must be " + expected + " for this reach task");
  }
  if (task.n_demos < 1) throw ConfigError("task.n_demos must be >= 1");
  if (task.length < 8) throw ConfigError("task.length must be >= 8");
  if (!(task.noise >= 0)) throw ConfigError("task.noise must be >= 0");
  if (!(task.jitter >= 0)) throw ConfigError("task.jitter must be >= 0");
  if (!(task.tolerance > 0)) throw ConfigError("task.tolerance must be > 0");
  if (task.max_steps < 1) throw ConfigError("task.max_steps must be >= 1");
  if (!(task.speed > 0)) throw ConfigError("task.speed must be > 0");

  flow.validate();
  TrainConfig train_check = train;
  train_check.mode = mode;
  train_check.validate();
  policy.validate();
  integrator.validate(flow);
  if (rollout.n_trials < 1) throw ConfigError("rollout.n_trials must be >= 1");
  if (rollout.n_samples < 1) throw ConfigError("rollout.n_samples must be >= 1");
  if (!(rollout.success_threshold > 0))
    throw ConfigError("rollout.success_threshold must be > 0");
  prior_spec();  // validates factor/manifold consistency
  if (task.length < policy.obs_horizon + policy.horizon)
    throw ConfigError("task.length must cover policy.obs_horizon + policy.horizon");
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig cfg;
  read_field(j, "seed", cfg.seed);
  read_field(j, "manifold", cfg.manifold);
  read_field(j, "mode", cfg.mode);

  if (j.contains("task")) {
    const auto& t = j.at("task");
    read_field(t, "kind", cfg.task.kind);
    read_field(t, "shape", cfg.task.shape);
    read_field(t, "n_demos", cfg.task.n_demos);
    read_field(t, "length", cfg.task.length);
    read_field(t, "noise", cfg.task.noise);
    read_field(t, "sphere", cfg.task.sphere);
    read_field(t, "jitter", cfg.task.jitter);
    read_field(t, "tolerance", cfg.task.tolerance);
    read_field(t, "max_steps", cfg.task.max_steps);
    read_field(t, "speed", cfg.task.speed);
  }
  if (j.contains("flow")) {
    const auto& f = j.at("flow");
    read_field(f, "sigma", cfg.flow.sigma);
    read_field(f, "lambda_x", cfg.flow.lambda_x);
    read_field(f, "lambda_tau", cfg.flow.lambda_tau);
    read_field(f, "tau0", cfg.flow.tau0);
    read_field(f, "tau1", cfg.flow.tau1);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    read_field(t, "learning_rate", cfg.train.learning_rate);
    read_field(t, "weight_decay", cfg.train.weight_decay);
    read_field(t, "ema_decay", cfg.train.ema_decay);
    read_field(t, "beta1", cfg.train.beta1);
    read_field(t, "beta2", cfg.train.beta2);
    read_field(t, "eps", cfg.train.eps);
    read_field(t, "epochs", cfg.train.epochs);
    read_field(t, "batch_size", cfg.train.batch_size);
    read_field(t, "use_ema", cfg.train.use_ema);
    read_field(t, "val_fraction", cfg.train.val_fraction);
    read_field(t, "hidden", cfg.train.hidden);
    read_field(t, "embed_dim", cfg.train.embed_dim);
    read_field(t, "separate_tau_mlp", cfg.train.separate_tau_mlp);
    read_field(t, "tau_hidden", cfg.train.tau_hidden);
  }
  if (j.contains("policy")) {
    const auto& p = j.at("policy");
    read_field(p, "horizon", cfg.policy.horizon);
    read_field(p, "action_horizon", cfg.policy.action_horizon);
    read_field(p, "obs_horizon", cfg.policy.obs_horizon);
  }
  if (j.contains("integrator")) {
    const auto& i = j.at("integrator");
    read_field(i, "nfe", cfg.integrator.nfe);
    read_field(i, "srfmp_first_step", cfg.integrator.srfmp_first_step);
    read_field(i, "refine_step", cfg.integrator.refine_step);
    if (i.contains("t_end")) {
      read_field(i, "t_end", cfg.integrator.t_end);
      // An explicit horizon opts the stable-flow schedule into time-based
      // step counting for integration-time studies.
      cfg.integrator.t_end_from_config = true;
    }
  }
  if (j.contains("rollout")) {
    const auto& r = j.at("rollout");
    read_field(r, "n_trials", cfg.rollout.n_trials);
    read_field(r, "n_samples", cfg.rollout.n_samples);
    read_field(r, "success_threshold", cfg.rollout.success_threshold);
  }
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    read_field(p, "dataset", cfg.paths.dataset);
    read_field(p, "checkpoint", cfg.paths.checkpoint);
    read_field(p, "output_dir", cfg.paths.output_dir);
  }
  if (j.contains("prior")) {
    if (!j.at("prior").is_array()) throw ConfigError("prior must be an array of factors");
    for (const auto& pf : j.at("prior")) {
      PriorFactor factor;
      const std::string kind = pf.value("kind", "");
      if (kind == "euclidean_gaussian") {
        factor.kind = PriorFactor::Kind::EuclideanGaussian;
        factor.mean = read_vector_field(pf, "mean");
      } else if (kind == "sphere_uniform") {
        factor.kind = PriorFactor::Kind::SphereUniform;
      } else if (kind == "wrapped_gaussian") {
        factor.kind = PriorFactor::Kind::WrappedGaussian;
        factor.mean = read_vector_field(pf, "mean");
      } else {
        throw ConfigError("prior factor kind \"" + kind + "\" is not recognized");
      }
      if (pf.contains("scale")) factor.scale = pf.at("scale").get<Scalar>();
      cfg.prior_factors.push_back(std::move(factor));
    }
  }
  cfg.train.seed = cfg.seed;
  cfg.train.mode = cfg.mode;
  return cfg;
}

void apply_override(json& j, const std::string& dotted_key, const std::string& value) {
  if (dotted_key.empty()) throw ConfigError("empty override key");
  json* node = &j;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = dotted_key.find('.', pos);
    const std::string part = dotted_key.substr(pos, dot - pos);
    if (part.empty()) throw ConfigError("malformed override key \"" + dotted_key + "\"");
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[part];
    pos = dot + 1;
  }
}

RunConfig RunConfig::load(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  for (const auto& [key, value] : overrides) apply_override(j, key, value);
  return from_json(j);
}

}  // namespace rfmp
