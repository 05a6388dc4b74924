#include "rfmp/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace rfmp {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("train.learning_rate must be > 0");
  if (!(weight_decay >= 0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(ema_decay >= 0 && ema_decay <= 1)) throw ConfigError("train.ema_decay must be in [0,1]");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw ConfigError("train.beta1/beta2 must be in [0,1)");
  if (!(eps > 0)) throw ConfigError("train.eps must be > 0");
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (mode != "rfmp" && mode != "srfmp") throw ConfigError("train.mode must be rfmp or srfmp");
  if (!(val_fraction >= 0 && val_fraction < 1))
    throw ConfigError("train.val_fraction must be in [0,1)");
}

int Dataset::obs_dim() const {
  if (demos.empty() || demos.front().obs.empty()) return 0;
  return static_cast<int>(demos.front().obs.front().size());
}

void Dataset::validate(int horizon, int obs_horizon) const {
  if (demos.empty()) throw ConfigError("dataset has no demonstrations");
  const int od = obs_dim();
  for (std::size_t d = 0; d < demos.size(); ++d) {
    const auto& demo = demos[d];
    if (demo.obs.size() != demo.actions.size())
      throw ConfigError("demonstration " + std::to_string(d) +
                        " has mismatched observation/action lengths");
    if (static_cast<int>(demo.actions.size()) < obs_horizon + horizon)
      throw ConfigError("demonstration " + std::to_string(d) + " is shorter than T_o + T_p");
    for (const auto& o : demo.obs)
      if (static_cast<int>(o.size()) != od)
        throw ConfigError("inconsistent observation dimension in demonstration " +
                          std::to_string(d));
    for (const auto& a : demo.actions)
      if (!is_on_manifold(action_manifold, a))
        throw ConfigError("off-manifold action in demonstration " + std::to_string(d));
  }
}

Normalizer compute_normalizer(const Dataset& dataset) {
  const int ad = dataset.action_dim();
  const int od = dataset.obs_dim();
  Normalizer norm = Normalizer::identity(ad, od);

  Vector a_sum = Vector::Zero(ad), a_sq = Vector::Zero(ad);
  Vector o_sum = Vector::Zero(od), o_sq = Vector::Zero(od);
  long n = 0;
  for (const auto& demo : dataset.demos) {
    for (std::size_t i = 0; i < demo.actions.size(); ++i) {
      a_sum += demo.actions[i];
      a_sq += demo.actions[i].cwiseProduct(demo.actions[i]);
      o_sum += demo.obs[i];
      o_sq += demo.obs[i].cwiseProduct(demo.obs[i]);
      ++n;
    }
  }
  if (n == 0) return norm;
  const Vector a_mean = a_sum / Scalar(n);
  const Vector o_mean = o_sum / Scalar(n);
  auto stddev = [n](const Vector& sq, const Vector& mean) {
    return ((sq / Scalar(n)) - mean.cwiseProduct(mean))
        .cwiseMax(0.0)
        .cwiseSqrt()
        .cwiseMax(1e-8)
        .eval();
  };
  // Standardizing a manifold coordinate would break its invariants, so only
  // Euclidean action leaves get non-trivial statistics.
  for (const auto& [leaf, off] : dataset.action_manifold.leaves()) {
    if (leaf.kind() != ManifoldSpec::Kind::Euclidean) continue;
    const int d = leaf.ambient_dim();
    norm.action_mean.segment(off, d) = a_mean.segment(off, d);
    norm.action_scale.segment(off, d) = stddev(a_sq, a_mean).segment(off, d);
  }
  norm.obs_mean = o_mean;
  norm.obs_scale = stddev(o_sq, o_mean);
  return norm;
}

TrainingPair make_training_pair(const Demonstration& demo, int s, int horizon, int obs_horizon,
                                Rng& rng) {
  const int len = static_cast<int>(demo.actions.size());
  if (obs_horizon < 2) throw ConfigError("observation horizon must be >= 2");
  if (s - obs_horizon < 0 || s + horizon > len)
    throw ConfigError("training window [" + std::to_string(s) + "] out of range");
  const int ad = static_cast<int>(demo.actions.front().size());
  TrainingPair pair;
  pair.chunk = Vector(ad * horizon);
  for (int i = 0; i < horizon; ++i) pair.chunk.segment(i * ad, ad) = demo.actions[s + i];
  const int c = (obs_horizon == 2)
                    ? s - 2
                    : static_cast<int>(rng.uniform_int(s - obs_horizon, s - 2));
  const int od = static_cast<int>(demo.obs.front().size());
  const bool with_gap = obs_horizon > 2;
  pair.obs = Vector(2 * od + (with_gap ? 1 : 0));
  pair.obs.head(od) = demo.obs[s - 1];
  pair.obs.segment(od, od) = demo.obs[c];
  if (with_gap) pair.obs[2 * od] = Scalar(s - c);
  return pair;
}

int obs_vector_dim(int obs_state_dim, int obs_horizon) {
  return 2 * obs_state_dim + (obs_horizon > 2 ? 1 : 0);
}

Vector build_obs_vector(const Normalizer& norm, const Vector& obs_prev, const Vector& obs_ctx,
                        Scalar gap, int obs_horizon) {
  const int od = static_cast<int>(obs_prev.size());
  Vector out(obs_vector_dim(od, obs_horizon));
  out.head(od) = norm.normalize_obs(obs_prev);
  out.segment(od, od) = norm.normalize_obs(obs_ctx);
  if (obs_horizon > 2) out[2 * od] = gap;
  return out;
}

PreparedBatch prepare_batch(const std::string& mode, const ManifoldSpec& chunk_spec,
                            const Normalizer& norm, const FlowParams& flow,
                            const ModelConfig& cfg, const std::vector<BatchItem>& items,
                            int obs_horizon, int obs_state_dim) {
  const int b = static_cast<int>(items.size());
  const int cd = chunk_spec.ambient_dim();
  const bool stable = mode == "srfmp";
  PreparedBatch batch;
  batch.input = Matrix(b, cfg.input_dim());
  batch.x_t = Matrix(b, cd);
  batch.u_target = Matrix(b, cd);
  if (stable) {
    batch.tau_t = Vector(b);
    batch.u_tau = Vector(b);
  }
  for (int i = 0; i < b; ++i) {
    const auto& item = items[i];
    const Vector c0 = norm.normalize_chunk(item.chunk0_raw);
    const Vector c1 = norm.normalize_chunk(item.chunk1_raw);
    const Vector obs_net = build_obs_vector(
        norm, item.obs_raw.head(obs_state_dim), item.obs_raw.segment(obs_state_dim, obs_state_dim),
        obs_horizon > 2 ? item.obs_raw[2 * obs_state_dim] : 0.0, obs_horizon);

    Scalar conditioning_time;
    if (stable) {
      const AugmentedState xi0{c0, flow.tau0};
      const AugmentedState xi1{c1, flow.tau1};
      const AugmentedPathPoint p = srfm_path(chunk_spec, item.t, xi0, xi1, flow);
      batch.x_t.row(i) = p.xi.x.transpose();
      batch.u_target.row(i) = p.u.x.transpose();
      batch.tau_t[i] = p.xi.tau;
      batch.u_tau[i] = p.u.tau;
      conditioning_time = p.xi.tau;
    } else {
      const PathPoint p = rcfm_geodesic_path(chunk_spec, item.t, c0, c1);
      batch.x_t.row(i) = p.x.transpose();
      batch.u_target.row(i) = p.u.transpose();
      conditioning_time = item.t;
    }
    batch.input.row(i) =
        assemble_input(cfg, batch.x_t.row(i).transpose(), conditioning_time, obs_net).transpose();
  }
  return batch;
}

Scalar loss_from_outputs(const ModelOutput& out, const PreparedBatch& batch,
                         const ManifoldSpec& chunk_spec, Matrix* dspatial, Vector* dtau) {
  const int b = static_cast<int>(batch.x_t.rows());
  const bool stable = batch.tau_t.size() > 0;
  Scalar total = 0.0;
  if (dspatial) *dspatial = Matrix::Zero(b, batch.x_t.cols());
  if (dtau && stable) *dtau = Vector::Zero(b);
  for (int i = 0; i < b; ++i) {
    const Vector x = batch.x_t.row(i).transpose();
    const Vector raw = out.spatial.row(i).transpose();
    const Vector residual =
        project_to_tangent(chunk_spec, x, raw) - batch.u_target.row(i).transpose();
    total += inner(chunk_spec, x, residual, residual);
    if (dspatial) {
      // d/draw of <P r, G P r> with symmetric projector P and metric G.
      const Vector g = metric_apply(chunk_spec, x, residual);
      dspatial->row(i) = (2.0 / b) * project_to_tangent(chunk_spec, x, g).transpose();
    }
    if (stable) {
      const Scalar rtau = out.tau[i] - batch.u_tau[i];
      total += rtau * rtau;
      if (dtau) (*dtau)[i] = (2.0 / b) * rtau;
    }
  }
  return total / b;
}

Scalar rfmp_loss(const VectorFieldModel& model, const PreparedBatch& batch,
                 const ManifoldSpec& chunk_spec) {
  return loss_from_outputs(forward(model, batch.input), batch, chunk_spec);
}

Scalar srfmp_loss(const VectorFieldModel& model, const PreparedBatch& batch,
                  const ManifoldSpec& chunk_spec) {
  return loss_from_outputs(forward(model, batch.input), batch, chunk_spec);
}

LossAndGrads loss_and_grads(const VectorFieldModel& model, const PreparedBatch& batch,
                            const ManifoldSpec& chunk_spec) {
  ForwardCache cache;
  const ModelOutput out = forward(model, batch.input, &cache);
  Matrix dspatial;
  Vector dtau;
  LossAndGrads result;
  result.loss = loss_from_outputs(out, batch, chunk_spec, &dspatial, &dtau);
  result.grads = backward(model, cache, dspatial, dtau);
  return result;
}

void adamw_step(Vector& params, const Vector& grads, AdamWState& state,
                const TrainConfig& config) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ConfigError("optimizer shapes do not match");
  state.step += 1;
  // Decoupled decay, applied independently of the adaptive update.
  params -= config.learning_rate * config.weight_decay * params;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * grads;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * grads.cwiseProduct(grads);
  const Scalar bc1 = 1.0 - std::pow(config.beta1, static_cast<Scalar>(state.step));
  const Scalar bc2 = 1.0 - std::pow(config.beta2, static_cast<Scalar>(state.step));
  for (int i = 0; i < params.size(); ++i) {
    const Scalar m_hat = state.m[i] / bc1;
    const Scalar v_hat = state.v[i] / bc2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

void ema_update(Vector& ema, const Vector& params, Scalar decay) {
  ema = decay * ema + (1.0 - decay) * params;
}

namespace {

struct Window {
  int demo;
  int s;
};

std::vector<Window> collect_windows(const Dataset& dataset, int first_demo, int last_demo,
                                    int horizon, int obs_horizon) {
  std::vector<Window> windows;
  for (int d = first_demo; d < last_demo; ++d) {
    const int len = static_cast<int>(dataset.demos[d].actions.size());
    for (int s = obs_horizon; s + horizon <= len; ++s) windows.push_back({d, s});
  }
  return windows;
}

std::vector<BatchItem> assemble_items(const Dataset& dataset, const std::vector<Window>& windows,
                                      std::size_t begin, std::size_t end, const PriorSpec& prior,
                                      int horizon, int obs_horizon, Rng& rng) {
  std::vector<BatchItem> items;
  items.reserve(end - begin);
  for (std::size_t k = begin; k < end; ++k) {
    const auto& w = windows[k];
    BatchItem item;
    TrainingPair pair = make_training_pair(dataset.demos[w.demo], w.s, horizon, obs_horizon, rng);
    item.chunk1_raw = std::move(pair.chunk);
    item.obs_raw = std::move(pair.obs);
    item.chunk0_raw = sample_chunk_prior(prior, horizon, rng);
    item.t = rng.uniform();
    items.push_back(std::move(item));
  }
  return items;
}

Scalar evaluate_loss(const VectorFieldModel& model, const Dataset& dataset,
                     const std::vector<Window>& windows, const ManifoldSpec& chunk_spec,
                     const Normalizer& norm, const FlowParams& flow, const PriorSpec& prior,
                     const TrainConfig& config, int horizon, int obs_horizon, Rng rng) {
  if (windows.empty()) return std::numeric_limits<Scalar>::quiet_NaN();
  Scalar total = 0.0;
  std::size_t pos = 0;
  while (pos < windows.size()) {
    const std::size_t end = std::min(windows.size(), pos + config.batch_size);
    const auto items = assemble_items(dataset, windows, pos, end, prior, horizon, obs_horizon, rng);
    const PreparedBatch batch = prepare_batch(config.mode, chunk_spec, norm, flow, model.cfg,
                                              items, obs_horizon, dataset.obs_dim());
    total += loss_from_outputs(forward(model, batch.input), batch, chunk_spec) *
             static_cast<Scalar>(items.size());
    pos = end;
  }
  return total / static_cast<Scalar>(windows.size());
}

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& config, const FlowParams& flow,
                  const PriorSpec& prior, int horizon, int obs_horizon) {
  config.validate();
  flow.validate();
  dataset.validate(horizon, obs_horizon);
  prior.validate();
  if (prior.manifold != dataset.action_manifold)
    throw ConfigError("prior manifold does not match the dataset action manifold");

  const ManifoldSpec chunk_spec = ManifoldSpec::power(dataset.action_manifold, horizon);
  const Normalizer norm = compute_normalizer(dataset);

  ModelConfig cfg;
  cfg.chunk_dim = chunk_spec.ambient_dim();
  cfg.obs_dim = obs_vector_dim(dataset.obs_dim(), obs_horizon);
  cfg.embed_dim = config.embed_dim;
  cfg.hidden = config.hidden;
  cfg.tau_head = config.mode == "srfmp";
  cfg.separate_tau_mlp = config.separate_tau_mlp;
  cfg.tau_hidden = config.tau_hidden;

  Rng rng(config.seed);
  VectorFieldModel model = VectorFieldModel::init(cfg, rng);
  Vector params = model.pack();
  Vector ema = params;
  AdamWState opt = AdamWState::zero(static_cast<int>(params.size()));

  const int n_demos = static_cast<int>(dataset.demos.size());
  const int n_val = static_cast<int>(std::floor(config.val_fraction * n_demos));
  const int n_train = n_demos - n_val;
  if (n_train < 1) throw ConfigError("validation split leaves no training demonstrations");

  const auto train_windows = collect_windows(dataset, 0, n_train, horizon, obs_horizon);
  const auto val_windows = collect_windows(dataset, n_train, n_demos, horizon, obs_horizon);
  if (train_windows.empty()) throw ConfigError("no valid training windows");

  TrainResult result;
  VectorFieldModel ema_model = model;
  VectorFieldModel best_model = model;
  Scalar best_metric = std::numeric_limits<Scalar>::infinity();
  std::vector<Window> order = train_windows;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with the run RNG keeps epochs reproducible.
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j =
          static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    Scalar epoch_loss = 0.0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t end = std::min(order.size(), pos + config.batch_size);
      const auto items = assemble_items(dataset, order, pos, end, prior, horizon, obs_horizon, rng);
      const PreparedBatch batch = prepare_batch(config.mode, chunk_spec, norm, flow, cfg, items,
                                                obs_horizon, dataset.obs_dim());
      const LossAndGrads lg = loss_and_grads(model, batch, chunk_spec);
      if (!std::isfinite(lg.loss)) throw DivergedError("training loss became non-finite");
      epoch_loss += lg.loss * static_cast<Scalar>(items.size());
      adamw_step(params, pack_grads(lg.grads), opt, config);
      model.unpack(params);
      ema_update(ema, params, config.ema_decay);
      pos = end;
    }
    ema_model.unpack(ema);

    EpochRecord record;
    record.mean_loss = epoch_loss / static_cast<Scalar>(order.size());
    const VectorFieldModel& eval_model = config.use_ema ? ema_model : model;
    record.val_loss = evaluate_loss(eval_model, dataset, val_windows, chunk_spec, norm, flow,
                                    prior, config, horizon, obs_horizon,
                                    Rng(config.seed ^ (0x9E3779B9ULL + epoch)));
    result.history.push_back(record);

    const Scalar metric = val_windows.empty() ? record.mean_loss : record.val_loss;
    if (metric < best_metric) {
      best_metric = metric;
      best_model = eval_model;
    }
  }

  if (config.epochs == 0) best_model = config.use_ema ? ema_model : model;

  result.model = model;
  result.ema_model = ema_model;
  result.checkpoint.manifold = dataset.action_manifold.to_string();
  result.checkpoint.horizon = horizon;
  result.checkpoint.obs_state_dim = dataset.obs_dim();
  result.checkpoint.mode = config.mode;
  result.checkpoint.weights_kind = config.use_ema ? "ema" : "raw";
  result.checkpoint.flow = flow;
  result.checkpoint.norm = norm;
  result.checkpoint.model = best_model;
  return result;
}

void write_loss_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open loss history for writing: " + path);
  os << "epoch,mean_loss,val_loss\n";
  char buf[64];
  for (std::size_t i = 0; i < history.size(); ++i) {
    os << i << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", history[i].mean_loss);
    os << buf << ",";
    if (std::isnan(history[i].val_loss)) {
      os << "nan";
    } else {
      std::snprintf(buf, sizeof(buf), "%.17g", history[i].val_loss);
      os << buf;
    }
    os << "\n";
  }
  if (!os) throw IoError("failed writing loss history: " + path);
}

}  // namespace rfmp
