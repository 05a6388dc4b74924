#pragma once

#include <string>
#include <vector>

#include "rfmp/flows.hpp"
#include "rfmp/rng.hpp"
#include "rfmp/types.hpp"

namespace rfmp {

/// Sinusoidal embedding of a scalar time/temperature: interleaved
/// [sin(t w_k), cos(t w_k)] pairs over a geometric frequency ladder from 1
/// down to 1e-4. embedding_dim must be even and >= 2.
Vector embed_time(Scalar t, int embedding_dim);

/// Per-dimension affine standardization of network inputs and outputs.
/// Manifold-valued coordinates keep mean 0 / scale 1 so their invariants
/// survive the transform; only Euclidean coordinates are standardized.
struct Normalizer {
  Vector action_mean, action_scale;  // per-step action ambient coordinates
  Vector obs_mean, obs_scale;        // raw per-step observation coordinates

  static Normalizer identity(int action_dim, int obs_dim);

  Vector normalize_action(const Vector& a) const;
  Vector denormalize_action(const Vector& a) const;
  Vector normalize_chunk(const Vector& chunk) const;
  Vector denormalize_chunk(const Vector& chunk) const;
  Vector normalize_obs(const Vector& o) const;
};

struct ModelConfig {
  int chunk_dim = 0;    // ambient dimension of the full action chunk
  int obs_dim = 0;      // assembled conditioning vector dimension
  int embed_dim = 32;   // sinusoidal embedding width
  std::vector<int> hidden = {256, 256, 256};
  bool tau_head = false;          // additionally predict temperature velocity
  bool separate_tau_mlp = false;  // give that head its own small MLP
  int tau_hidden = 64;

  int input_dim() const { return chunk_dim + embed_dim + obs_dim; }
  int trunk_output_dim() const {
    return (tau_head && !separate_tau_mlp) ? chunk_dim + 1 : chunk_dim;
  }
  void validate() const;
};

struct DenseLayer {
  Matrix w;  // rows = outputs, cols = inputs
  Vector b;
};

struct ModelOutput {
  Matrix spatial;  // batch x chunk_dim, raw (pre tangent projection)
  Vector tau;      // batch, empty unless tau_head
};

/// Activations recorded by forward() so backward() can replay the chain.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   // trunk pre-activations, one per layer
  std::vector<Matrix> act;   // activations fed into each trunk layer
  std::vector<Matrix> tau_pre;
  std::vector<Matrix> tau_act;
};

struct ModelGrads {
  std::vector<DenseLayer> trunk;
  std::vector<DenseLayer> tau_mlp;
};

/// The trainable vector-field regressor: a SiLU MLP over the concatenation
/// [chunk coords, time embedding, observation vector], with an optional
/// temperature-velocity head sharing the trunk.
struct VectorFieldModel {
  ModelConfig cfg;
  std::vector<DenseLayer> trunk;
  std::vector<DenseLayer> tau_mlp;

  /// Uniform +-1/sqrt(fan_in) hidden layers; output layers start at zero so
  /// the initial field vanishes everywhere.
  static VectorFieldModel init(const ModelConfig& cfg, Rng& rng);

  int n_params() const;
  Vector pack() const;
  void unpack(const Vector& params);
  ModelGrads zero_grads() const;
};

/// Assembles one network input row.
Vector assemble_input(const ModelConfig& cfg, const Vector& chunk, Scalar time_or_tau,
                      const Vector& obs);

/// Batched forward pass; rows of `input` are independent samples. Pass a
/// cache to keep what backward() needs.
ModelOutput forward(const VectorFieldModel& model, const Matrix& input,
                    ForwardCache* cache = nullptr);

ModelOutput forward_one(const VectorFieldModel& model, const Vector& input);

/// Reverse-mode gradients of a scalar loss given its derivative with respect
/// to the raw network outputs (same shapes as ModelOutput).
ModelGrads backward(const VectorFieldModel& model, const ForwardCache& cache,
                    const Matrix& dloss_dspatial, const Vector& dloss_dtau);

Vector pack_grads(const ModelGrads& grads);

/// Everything inference needs, serialized as one binary checkpoint:
/// magic "RFMPCKPT", format version, manifold string, layout descriptor,
/// flow mode, flow parameters, normalization statistics, then per-layer
/// shape headers with little-endian 64-bit float payloads. Byte-exact
/// round trips are part of the contract.
struct PolicyCheckpoint {
  std::string manifold;  // per-step action manifold
  int horizon = 1;       // chunk length the model was trained with
  int obs_state_dim = 0;
  std::string mode = "rfmp";  // "rfmp" | "srfmp"
  std::string weights_kind = "ema";
  FlowParams flow;
  Normalizer norm;
  VectorFieldModel model;
};

void save_checkpoint(const std::string& path, const PolicyCheckpoint& ckpt);
PolicyCheckpoint load_checkpoint(const std::string& path);

}  // namespace rfmp
