#include "rfmp/nnet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace rfmp {

Vector embed_time(Scalar t, int embedding_dim) {
  if (embedding_dim < 2 || embedding_dim % 2 != 0)
    throw ConfigError("embedding dimension must be even and >= 2");
  Vector out(embedding_dim);
  const int pairs = embedding_dim / 2;
  for (int k = 0; k < pairs; ++k) {
    const Scalar omega = std::pow(10000.0, -2.0 * k / embedding_dim);
    out[2 * k] = std::sin(t * omega);
    out[2 * k + 1] = std::cos(t * omega);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalizer
// ---------------------------------------------------------------------------

Normalizer Normalizer::identity(int action_dim, int obs_dim) {
  Normalizer n;
  n.action_mean = Vector::Zero(action_dim);
  n.action_scale = Vector::Ones(action_dim);
  n.obs_mean = Vector::Zero(obs_dim);
  n.obs_scale = Vector::Ones(obs_dim);
  return n;
}

Vector Normalizer::normalize_action(const Vector& a) const {
  return (a - action_mean).cwiseQuotient(action_scale);
}

Vector Normalizer::denormalize_action(const Vector& a) const {
  return a.cwiseProduct(action_scale) + action_mean;
}

Vector Normalizer::normalize_chunk(const Vector& chunk) const {
  const int d = static_cast<int>(action_mean.size());
  Vector out(chunk.size());
  for (int i = 0; i * d < chunk.size(); ++i)
    out.segment(i * d, d) = normalize_action(chunk.segment(i * d, d));
  return out;
}

Vector Normalizer::denormalize_chunk(const Vector& chunk) const {
  const int d = static_cast<int>(action_mean.size());
  Vector out(chunk.size());
  for (int i = 0; i * d < chunk.size(); ++i)
    out.segment(i * d, d) = denormalize_action(chunk.segment(i * d, d));
  return out;
}

Vector Normalizer::normalize_obs(const Vector& o) const {
  return (o - obs_mean).cwiseQuotient(obs_scale);
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
  if (chunk_dim < 1) throw ConfigError("model chunk dimension must be >= 1");
  if (obs_dim < 0) throw ConfigError("model observation dimension must be >= 0");
  if (embed_dim < 2 || embed_dim % 2 != 0)
    throw ConfigError("embedding dimension must be even and >= 2");
  if (hidden.empty()) throw ConfigError("model needs at least one hidden layer");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden widths must be >= 1");
  if (separate_tau_mlp && tau_hidden < 1) throw ConfigError("tau head width must be >= 1");
}

namespace {

DenseLayer init_layer(int out_dim, int in_dim, Rng& rng, bool zero) {
  DenseLayer layer;
  layer.w = Matrix(out_dim, in_dim);
  layer.b = Vector(out_dim);
  if (zero) {
    layer.w.setZero();
    layer.b.setZero();
    return layer;
  }
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(in_dim));
  for (int i = 0; i < out_dim; ++i) {
    for (int j = 0; j < in_dim; ++j) layer.w(i, j) = rng.uniform(-bound, bound);
    layer.b[i] = rng.uniform(-bound, bound);
  }
  return layer;
}

Matrix silu(const Matrix& z) {
  return (z.array() / (1.0 + (-z.array()).exp())).matrix();
}

Matrix silu_grad(const Matrix& z) {
  const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-z.array()).exp());
  return (sig * (1.0 + z.array() * (1.0 - sig))).matrix();
}

Matrix affine(const DenseLayer& layer, const Matrix& x) {
  return (x * layer.w.transpose()).rowwise() + layer.b.transpose();
}

// Runs one MLP branch, recording activations when wanted.
Matrix run_branch(const std::vector<DenseLayer>& layers, const Matrix& input,
                  std::vector<Matrix>* pre, std::vector<Matrix>* act) {
  Matrix x = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (act) act->push_back(x);
    Matrix z = affine(layers[l], x);
    if (pre) pre->push_back(z);
    x = (l + 1 < layers.size()) ? silu(z) : std::move(z);
  }
  return x;
}

// Backpropagates through one branch; returns grads and writes dL/dinput.
std::vector<DenseLayer> branch_backward(const std::vector<DenseLayer>& layers,
                                        const std::vector<Matrix>& pre,
                                        const std::vector<Matrix>& act, const Matrix& dout,
                                        Matrix* dinput) {
  std::vector<DenseLayer> grads(layers.size());
  Matrix delta = dout;
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    if (l + 1 < static_cast<int>(layers.size()))
      delta = delta.cwiseProduct(silu_grad(pre[l]));
    grads[l].w = delta.transpose() * act[l];
    grads[l].b = delta.colwise().sum().transpose();
    if (l > 0 || dinput) {
      Matrix next = delta * layers[l].w;
      if (l == 0) {
        *dinput = std::move(next);
      } else {
        delta = std::move(next);
      }
    }
  }
  return grads;
}

}  // namespace

VectorFieldModel VectorFieldModel::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  VectorFieldModel model;
  model.cfg = cfg;
  int in_dim = cfg.input_dim();
  for (int h : cfg.hidden) {
    model.trunk.push_back(init_layer(h, in_dim, rng, false));
    in_dim = h;
  }
  model.trunk.push_back(init_layer(cfg.trunk_output_dim(), in_dim, rng, true));
  if (cfg.tau_head && cfg.separate_tau_mlp) {
    model.tau_mlp.push_back(init_layer(cfg.tau_hidden, cfg.input_dim(), rng, false));
    model.tau_mlp.push_back(init_layer(1, cfg.tau_hidden, rng, true));
  }
  return model;
}

int VectorFieldModel::n_params() const {
  int n = 0;
  for (const auto& l : trunk) n += static_cast<int>(l.w.size() + l.b.size());
  for (const auto& l : tau_mlp) n += static_cast<int>(l.w.size() + l.b.size());
  return n;
}

namespace {

void pack_layers(const std::vector<DenseLayer>& layers, Vector& out, int& pos) {
  for (const auto& l : layers) {
    for (int i = 0; i < l.w.rows(); ++i)
      for (int j = 0; j < l.w.cols(); ++j) out[pos++] = l.w(i, j);
    for (int i = 0; i < l.b.size(); ++i) out[pos++] = l.b[i];
  }
}

void unpack_layers(std::vector<DenseLayer>& layers, const Vector& in, int& pos) {
  for (auto& l : layers) {
    for (int i = 0; i < l.w.rows(); ++i)
      for (int j = 0; j < l.w.cols(); ++j) l.w(i, j) = in[pos++];
    for (int i = 0; i < l.b.size(); ++i) l.b[i] = in[pos++];
  }
}

}  // namespace

Vector VectorFieldModel::pack() const {
  Vector out(n_params());
  int pos = 0;
  pack_layers(trunk, out, pos);
  pack_layers(tau_mlp, out, pos);
  return out;
}

void VectorFieldModel::unpack(const Vector& params) {
  if (params.size() != n_params()) throw ConfigError("parameter vector has wrong length");
  int pos = 0;
  unpack_layers(trunk, params, pos);
  unpack_layers(tau_mlp, params, pos);
}

ModelGrads VectorFieldModel::zero_grads() const {
  ModelGrads g;
  for (const auto& l : trunk)
    g.trunk.push_back({Matrix::Zero(l.w.rows(), l.w.cols()), Vector::Zero(l.b.size())});
  for (const auto& l : tau_mlp)
    g.tau_mlp.push_back({Matrix::Zero(l.w.rows(), l.w.cols()), Vector::Zero(l.b.size())});
  return g;
}

Vector pack_grads(const ModelGrads& grads) {
  int n = 0;
  for (const auto& l : grads.trunk) n += static_cast<int>(l.w.size() + l.b.size());
  for (const auto& l : grads.tau_mlp) n += static_cast<int>(l.w.size() + l.b.size());
  Vector out(n);
  int pos = 0;
  pack_layers(grads.trunk, out, pos);
  pack_layers(grads.tau_mlp, out, pos);
  return out;
}

Vector assemble_input(const ModelConfig& cfg, const Vector& chunk, Scalar time_or_tau,
                      const Vector& obs) {
  if (chunk.size() != cfg.chunk_dim || obs.size() != cfg.obs_dim)
    throw ConfigError("network input layout mismatch");
  Vector input(cfg.input_dim());
  input.head(cfg.chunk_dim) = chunk;
  input.segment(cfg.chunk_dim, cfg.embed_dim) = embed_time(time_or_tau, cfg.embed_dim);
  input.tail(cfg.obs_dim) = obs;
  return input;
}

ModelOutput forward(const VectorFieldModel& model, const Matrix& input, ForwardCache* cache) {
  if (input.cols() != model.cfg.input_dim())
    throw ConfigError("network input has wrong width");
  ModelOutput out;
  Matrix trunk_out = run_branch(model.trunk, input, cache ? &cache->pre : nullptr,
                                cache ? &cache->act : nullptr);
  if (cache) cache->input = input;
  if (model.cfg.tau_head && !model.cfg.separate_tau_mlp) {
    out.spatial = trunk_out.leftCols(model.cfg.chunk_dim);
    out.tau = trunk_out.rightCols<1>();
  } else {
    out.spatial = std::move(trunk_out);
    if (model.cfg.tau_head) {
      Matrix tau_out = run_branch(model.tau_mlp, input, cache ? &cache->tau_pre : nullptr,
                                  cache ? &cache->tau_act : nullptr);
      out.tau = tau_out.col(0);
    }
  }
  if (!out.spatial.allFinite() || (out.tau.size() > 0 && !out.tau.allFinite()))
    throw DivergedError("network produced non-finite outputs");
  return out;
}

ModelOutput forward_one(const VectorFieldModel& model, const Vector& input) {
  return forward(model, input.transpose());
}

ModelGrads backward(const VectorFieldModel& model, const ForwardCache& cache,
                    const Matrix& dloss_dspatial, const Vector& dloss_dtau) {
  ModelGrads grads;
  Matrix dout;
  if (model.cfg.tau_head && !model.cfg.separate_tau_mlp) {
    dout = Matrix(dloss_dspatial.rows(), model.cfg.chunk_dim + 1);
    dout.leftCols(model.cfg.chunk_dim) = dloss_dspatial;
    dout.rightCols<1>() = dloss_dtau;
  } else {
    dout = dloss_dspatial;
  }
  grads.trunk = branch_backward(model.trunk, cache.pre, cache.act, dout, nullptr);
  if (model.cfg.tau_head && model.cfg.separate_tau_mlp)
    grads.tau_mlp =
        branch_backward(model.tau_mlp, cache.tau_pre, cache.tau_act, dloss_dtau, nullptr);
  return grads;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'F', 'M', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& os, Scalar v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

Scalar read_f64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  Scalar v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}

void write_vector(std::ostream& os, const Vector& v) {
  write_u32(os, static_cast<std::uint32_t>(v.size()));
  for (int i = 0; i < v.size(); ++i) write_f64(os, v[i]);
}

Vector read_vector(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  Vector v(n);
  for (std::uint32_t i = 0; i < n; ++i) v[i] = read_f64(is);
  return v;
}

void write_layers(std::ostream& os, const std::vector<DenseLayer>& layers) {
  write_u32(os, static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    write_u32(os, static_cast<std::uint32_t>(l.w.rows()));
    write_u32(os, static_cast<std::uint32_t>(l.w.cols()));
    for (int i = 0; i < l.w.rows(); ++i)
      for (int j = 0; j < l.w.cols(); ++j) write_f64(os, l.w(i, j));
    write_vector(os, l.b);
  }
}

std::vector<DenseLayer> read_layers(std::istream& is) {
  const std::uint32_t count = read_u32(is);
  std::vector<DenseLayer> layers(count);
  for (auto& l : layers) {
    const std::uint32_t rows = read_u32(is);
    const std::uint32_t cols = read_u32(is);
    l.w = Matrix(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j) l.w(i, j) = read_f64(is);
    l.b = read_vector(is);
  }
  return layers;
}

}  // namespace

void save_checkpoint(const std::string& path, const PolicyCheckpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 8);
  write_u32(os, kVersion);
  write_string(os, ckpt.manifold);
  write_u32(os, static_cast<std::uint32_t>(ckpt.horizon));
  write_u32(os, static_cast<std::uint32_t>(ckpt.obs_state_dim));
  write_string(os, ckpt.mode);
  write_string(os, ckpt.weights_kind);
  for (Scalar v : {ckpt.flow.sigma, ckpt.flow.lambda_x, ckpt.flow.lambda_tau, ckpt.flow.tau0,
                   ckpt.flow.tau1})
    write_f64(os, v);
  write_vector(os, ckpt.norm.action_mean);
  write_vector(os, ckpt.norm.action_scale);
  write_vector(os, ckpt.norm.obs_mean);
  write_vector(os, ckpt.norm.obs_scale);
  const ModelConfig& cfg = ckpt.model.cfg;
  write_u32(os, static_cast<std::uint32_t>(cfg.chunk_dim));
  write_u32(os, static_cast<std::uint32_t>(cfg.obs_dim));
  write_u32(os, static_cast<std::uint32_t>(cfg.embed_dim));
  write_u32(os, static_cast<std::uint32_t>(cfg.hidden.size()));
  for (int h : cfg.hidden) write_u32(os, static_cast<std::uint32_t>(h));
  write_u32(os, cfg.tau_head ? 1 : 0);
  write_u32(os, cfg.separate_tau_mlp ? 1 : 0);
  write_u32(os, static_cast<std::uint32_t>(cfg.tau_hidden));
  write_layers(os, ckpt.model.trunk);
  write_layers(os, ckpt.model.tau_mlp);
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

PolicyCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("not a policy checkpoint: " + path);
  const std::uint32_t version = read_u32(is);
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  PolicyCheckpoint ckpt;
  ckpt.manifold = read_string(is);
  ckpt.horizon = static_cast<int>(read_u32(is));
  ckpt.obs_state_dim = static_cast<int>(read_u32(is));
  ckpt.mode = read_string(is);
  ckpt.weights_kind = read_string(is);
  ckpt.flow.sigma = read_f64(is);
  ckpt.flow.lambda_x = read_f64(is);
  ckpt.flow.lambda_tau = read_f64(is);
  ckpt.flow.tau0 = read_f64(is);
  ckpt.flow.tau1 = read_f64(is);
  ckpt.norm.action_mean = read_vector(is);
  ckpt.norm.action_scale = read_vector(is);
  ckpt.norm.obs_mean = read_vector(is);
  ckpt.norm.obs_scale = read_vector(is);
  ModelConfig cfg;
  cfg.chunk_dim = static_cast<int>(read_u32(is));
  cfg.obs_dim = static_cast<int>(read_u32(is));
  cfg.embed_dim = static_cast<int>(read_u32(is));
  const std::uint32_t n_hidden = read_u32(is);
  cfg.hidden.clear();
  for (std::uint32_t i = 0; i < n_hidden; ++i) cfg.hidden.push_back(static_cast<int>(read_u32(is)));
  cfg.tau_head = read_u32(is) != 0;
  cfg.separate_tau_mlp = read_u32(is) != 0;
  cfg.tau_hidden = static_cast<int>(read_u32(is));
  ckpt.model.cfg = cfg;
  ckpt.model.trunk = read_layers(is);
  ckpt.model.tau_mlp = read_layers(is);
  if (!is) throw IoError("truncated checkpoint: " + path);
  return ckpt;
}

}  // namespace rfmp
