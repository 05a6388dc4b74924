#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rfmp/distributions.hpp"
#include "rfmp/flows.hpp"
#include "rfmp/manifold.hpp"
#include "rfmp/nnet.hpp"
#include "rfmp/rng.hpp"

namespace rfmp {

struct TrainConfig {
  Scalar learning_rate = 1e-4;
  Scalar weight_decay = 0.001;
  Scalar ema_decay = 0.999;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
  int epochs = 100;
  int batch_size = 256;
  std::uint64_t seed = 0;
  std::string mode = "rfmp";  // "rfmp" | "srfmp"
  bool use_ema = true;        // which weights the saved checkpoint carries
  Scalar val_fraction = 0.1;  // trailing demonstrations held out

  std::vector<int> hidden = {256, 256, 256};
  int embed_dim = 32;
  bool separate_tau_mlp = false;
  int tau_hidden = 64;

  void validate() const;
};

/// One recorded demonstration: per-step observation state vectors paired
/// with on-manifold actions, equal lengths.
struct Demonstration {
  std::vector<Vector> obs;
  std::vector<Vector> actions;
};

struct Dataset {
  ManifoldSpec action_manifold = ManifoldSpec::euclidean(1);
  std::vector<Demonstration> demos;

  int obs_dim() const;
  int action_dim() const { return action_manifold.ambient_dim(); }
  /// Checks per-demo length equality, action invariants, and that sequences
  /// are long enough for the given horizons.
  void validate(int horizon, int obs_horizon) const;
};

/// Standardization statistics from the training demonstrations: Euclidean
/// action coordinates and all observation coordinates get zero mean / unit
/// variance; sphere and SPD action coordinates are left untouched.
Normalizer compute_normalizer(const Dataset& dataset);

/// One supervised window: the action chunk starting at step s plus the
/// observation vector [o^{s-1}, o^c, s-c] with the context step c drawn
/// uniformly from [s-obs_horizon, s-2]. With obs_horizon == 2 the time gap
/// is dropped and the observation is just the two latest states.
struct TrainingPair {
  Vector chunk;  // raw action coordinates, horizon consecutive steps
  Vector obs;    // raw conditioning vector
};
TrainingPair make_training_pair(const Demonstration& demo, int s, int horizon, int obs_horizon,
                                Rng& rng);

/// Conditioning vector layout shared by training and inference.
Vector build_obs_vector(const Normalizer& norm, const Vector& obs_prev, const Vector& obs_ctx,
                        Scalar gap, int obs_horizon);
int obs_vector_dim(int obs_state_dim, int obs_horizon);

/// A batch with flow targets already evaluated, everything in normalized
/// coordinates: x_t rows are chunk points on the path, u rows the target
/// field at x_t (plus temperature channels in srfmp mode).
struct PreparedBatch {
  Matrix input;
  Matrix x_t;
  Matrix u_target;
  Vector tau_t;      // empty in rfmp mode
  Vector u_tau;      // empty in rfmp mode
};

struct BatchItem {
  Vector chunk0_raw;  // prior draw
  Vector chunk1_raw;  // demonstration chunk
  Vector obs_raw;     // assembled raw observation vector
  Scalar t = 0.0;
};

PreparedBatch prepare_batch(const std::string& mode, const ManifoldSpec& chunk_spec,
                            const Normalizer& norm, const FlowParams& flow,
                            const ModelConfig& cfg, const std::vector<BatchItem>& items,
                            int obs_horizon, int obs_state_dim);

/// Squared-residual loss in the Riemannian metric at x_t (plus the squared
/// temperature residual in srfmp mode), averaged over the batch. Optionally
/// emits the derivative with respect to the raw network outputs.
Scalar loss_from_outputs(const ModelOutput& out, const PreparedBatch& batch,
                         const ManifoldSpec& chunk_spec, Matrix* dspatial = nullptr,
                         Vector* dtau = nullptr);

Scalar rfmp_loss(const VectorFieldModel& model, const PreparedBatch& batch,
                 const ManifoldSpec& chunk_spec);
Scalar srfmp_loss(const VectorFieldModel& model, const PreparedBatch& batch,
                  const ManifoldSpec& chunk_spec);

struct LossAndGrads {
  Scalar loss = 0.0;
  ModelGrads grads;
};
LossAndGrads loss_and_grads(const VectorFieldModel& model, const PreparedBatch& batch,
                            const ManifoldSpec& chunk_spec);

/// Decoupled-weight-decay Adam on a packed parameter vector.
struct AdamWState {
  Vector m, v;
  long step = 0;
  static AdamWState zero(int n) { return {Vector::Zero(n), Vector::Zero(n), 0}; }
};
void adamw_step(Vector& params, const Vector& grads, AdamWState& state,
                const TrainConfig& config);

/// ema <- decay * ema + (1 - decay) * params, elementwise.
void ema_update(Vector& ema, const Vector& params, Scalar decay);

struct EpochRecord {
  Scalar mean_loss = 0.0;
  Scalar val_loss = std::numeric_limits<Scalar>::quiet_NaN();
};

struct TrainResult {
  PolicyCheckpoint checkpoint;  // best-validation snapshot
  VectorFieldModel model;       // final raw weights
  VectorFieldModel ema_model;   // final EMA weights
  std::vector<EpochRecord> history;
};

/// Full training loop: shuffled exhaustive windows per epoch, AdamW updates,
/// EMA tracking, trailing-demo validation, best-validation checkpointing.
/// Deterministic given config.seed.
TrainResult train(const Dataset& dataset, const TrainConfig& config, const FlowParams& flow,
                  const PriorSpec& prior, int horizon, int obs_horizon);

void write_loss_history_csv(const std::string& path, const std::vector<EpochRecord>& history);

}  // namespace rfmp
