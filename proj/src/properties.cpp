#include "rfmp/properties.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>

#include "rfmp/distributions.hpp"
#include "rfmp/evaluation.hpp"
#include "rfmp/flows.hpp"
#include "rfmp/inference.hpp"
#include "rfmp/manifold.hpp"
#include "rfmp/nnet.hpp"
#include "rfmp/tasks.hpp"
#include "rfmp/training.hpp"

namespace rfmp {

namespace {

struct Check {
  std::string detail;
  bool pass = true;

  void expect(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
  void expect_le(Scalar value, Scalar bound, const std::string& what) {
    if (!(value <= bound)) expect(false, what + " (" + std::to_string(value) + " > " +
                                            std::to_string(bound) + ")");
  }
};

std::vector<ManifoldSpec> suite_manifolds() {
  return {ManifoldSpec::euclidean(2), ManifoldSpec::sphere(3), ManifoldSpec::sphere(4),
          ManifoldSpec::spd(2), ManifoldSpec::spd(3), ManifoldSpec::parse("R3xS3xR1")};
}

// Tangent draw bounded away from the sphere cut locus.
Vector bounded_tangent(const ManifoldSpec& spec, const Vector& x, Rng& rng, Scalar max_norm) {
  Vector v = random_tangent(spec, x, rng);
  const Scalar n = norm(spec, x, v);
  if (n > max_norm) v *= max_norm / n;
  return v;
}

void check_roundtrip(Check& c, int samples_per_manifold) {
  for (const auto& spec : suite_manifolds()) {
    Rng rng(11);
    const bool has_sphere = spec.to_string().find('S') != std::string::npos;
    const Scalar cap = has_sphere ? M_PI - 0.1 : 1.0;
    for (int k = 0; k < samples_per_manifold; ++k) {
      const Vector x = random_point(spec, rng);
      const Vector v = bounded_tangent(spec, x, rng, std::min(cap, Scalar(1.0)));
      const Vector y = exp_map(spec, x, v);
      const Vector back = log_map(spec, x, y);
      c.expect_le((back - v).cwiseAbs().maxCoeff(), 1e-8,
                  spec.to_string() + " log(exp(v)) != v");
      c.expect_le(std::abs(distance(spec, x, y) - norm(spec, x, v)), 1e-8,
                  spec.to_string() + " |exp step| != |v|");
    }
  }
}

PropertyResult property(const std::string& name, const std::function<void(Check&)>& body) {
  PropertyResult result;
  result.name = name;
  Check c;
  try {
    body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  result.pass = c.pass;
  result.detail = c.pass ? "ok" : c.detail;
  return result;
}

FlowParams default_flow() {
  return FlowParams{};
}

}  // namespace

std::vector<PropertyResult> run_property_suite() {
  std::vector<PropertyResult> results;
  auto add = [&results](const std::string& name, const std::function<void(Check&)>& body) {
    results.push_back(property(name, body));
  };

  // -- manifolds ------------------------------------------------------------

  add("manifold_exp_log_roundtrip", [](Check& c) { check_roundtrip(c, 60); });

  add("manifold_product_factorization", [](Check& c) {
    const ManifoldSpec prod = ManifoldSpec::parse("R3xS3xR1");
    Rng rng(5);
    for (int k = 0; k < 40; ++k) {
      const Vector x = random_point(prod, rng);
      const Vector y = random_point(prod, rng);
      const Vector v = bounded_tangent(prod, x, rng, 1.0);
      Scalar d2 = 0.0;
      Vector exp_cat(prod.ambient_dim()), log_cat(prod.ambient_dim());
      for (const auto& [leaf, off] : prod.leaves()) {
        const int d = leaf.ambient_dim();
        exp_cat.segment(off, d) = exp_map(leaf, x.segment(off, d), v.segment(off, d));
        log_cat.segment(off, d) = log_map(leaf, x.segment(off, d), y.segment(off, d));
        const Scalar fd = distance(leaf, x.segment(off, d), y.segment(off, d));
        d2 += fd * fd;
      }
      c.expect_le((exp_map(prod, x, v) - exp_cat).cwiseAbs().maxCoeff(), 1e-12,
                  "product exp is not the factor concatenation");
      c.expect_le((log_map(prod, x, y) - log_cat).cwiseAbs().maxCoeff(), 1e-12,
                  "product log is not the factor concatenation");
      c.expect_le(std::abs(distance(prod, x, y) - std::sqrt(d2)), 1e-12,
                  "product distance is not the factor root-sum-square");
    }
  });

  add("manifold_tangent_projection", [](Check& c) {
    Rng rng(7);
    for (const auto& spec : suite_manifolds()) {
      for (int k = 0; k < 40; ++k) {
        const Vector x = random_point(spec, rng);
        const Vector raw = rng.normal_vector(spec.ambient_dim());
        const Vector p = project_to_tangent(spec, x, raw);
        const Vector pp = project_to_tangent(spec, x, p);
        c.expect_le((pp - p).cwiseAbs().maxCoeff(), 1e-12,
                    spec.to_string() + " tangent projection is not idempotent");
        const Vector w = random_tangent(spec, x, rng);
        if (spec.kind() == ManifoldSpec::Kind::Sphere)
          c.expect_le(std::abs(inner(spec, x, raw - p, w)), 1e-9,
                      "sphere projection residual is not orthogonal to tangents");
      }
    }
  });

  add("manifold_spec_string_roundtrip", [](Check& c) {
    for (const std::string s : {"R2", "S2", "S3", "SPD2", "SPD3", "R3xS3xR1", "R1xSPD2xS2"}) {
      c.expect(ManifoldSpec::parse(s).to_string() == s,
               "spec string \"" + s + "\" does not round trip");
    }
  });

  // -- distributions ----------------------------------------------------------

  add("prior_wrapped_gaussian_support", [](Check& c) {
    const ManifoldSpec s2 = ManifoldSpec::sphere(3);
    PriorSpec prior;
    prior.manifold = s2;
    PriorFactor f;
    f.kind = PriorFactor::Kind::WrappedGaussian;
    f.mean = (Vector(3) << 0, 0, 1).finished();
    f.scale = 0.4;
    prior.factors = {f};
    Rng rng(3);
    const int n = 4000;
    Vector mean = Vector::Zero(3);
    for (const auto& p : sample_prior(prior, n, rng)) {
      c.expect_le(std::abs(p.norm() - 1.0), 1e-9, "wrapped Gaussian sample off the sphere");
      mean += p;
    }
    mean /= n;
    // Direction of the empirical mean concentrates at the mean point.
    c.expect(mean.normalized()[2] > 0.99, "wrapped Gaussian mean direction drifted");
  });

  add("prior_sphere_uniform_moments", [](Check& c) {
    const ManifoldSpec s2 = ManifoldSpec::sphere(3);
    PriorSpec prior = PriorSpec::default_for(s2);
    Rng rng(4);
    const int n = 100000;
    Matrix cov = Matrix::Zero(3, 3);
    Vector mean = Vector::Zero(3);
    for (const auto& p : sample_prior(prior, n, rng)) {
      cov += p * p.transpose();
      mean += p;
    }
    cov /= n;
    mean /= n;
    c.expect_le(mean.norm(), 0.02, "uniform sphere mean is biased");
    c.expect_le((cov - Matrix::Identity(3, 3) / 3.0).cwiseAbs().maxCoeff(), 0.02,
                "uniform sphere covariance is not isotropic");
  });

  add("prior_determinism", [](Check& c) {
    const ManifoldSpec spec = ManifoldSpec::parse("R3xS3xR1");
    PriorSpec prior = PriorSpec::default_for(spec);
    Rng a(99), b(99);
    for (int k = 0; k < 50; ++k) {
      const Vector pa = sample_prior_one(prior, a);
      const Vector pb = sample_prior_one(prior, b);
      c.expect((pa.array() == pb.array()).all(), "identical seeds diverged");
    }
  });

  add("prior_chunk_tiling", [](Check& c) {
    const ManifoldSpec s2 = ManifoldSpec::sphere(3);
    PriorSpec prior = PriorSpec::default_for(s2);
    Rng rng(12);
    const Vector chunk = sample_chunk_prior(prior, 16, rng);
    for (int i = 1; i < 16; ++i)
      c.expect((chunk.segment(3 * i, 3).array() == chunk.head(3).array()).all(),
               "chunk prior entries are not identical tiles");
    c.expect_le(std::abs(chunk.head(3).norm() - 1.0), 1e-9, "tiled entry off the sphere");
  });

  // -- flows -----------------------------------------------------------------

  add("flow_finite_difference_consistency", [](Check& c) {
    const FlowParams params = default_flow();
    const Scalar h = 1e-5;
    Rng rng(21);
    for (const auto& spec : suite_manifolds()) {
      for (int k = 0; k < 25; ++k) {
        const Vector x0 = random_point(spec, rng);
        Vector x1 = random_point(spec, rng);
        const Scalar t = rng.uniform(0.05, 0.95);
        const auto path = [&](Scalar tt) { return rcfm_geodesic_path(spec, tt, x0, x1); };
        const PathPoint p = path(t);
        const Vector fd =
            (log_map(spec, p.x, path(t + h).x) - log_map(spec, p.x, path(t - h).x)) / (2 * h);
        c.expect_le((fd - p.u).cwiseAbs().maxCoeff(), 1e-5,
                    spec.to_string() + " geodesic flow/field mismatch");

        const AugmentedState xi0{x0, params.tau0};
        const AugmentedState xi1{x1, params.tau1};
        const auto spath = [&](Scalar tt) { return srfm_path(spec, tt, xi0, xi1, params); };
        const AugmentedPathPoint sp = spath(t);
        const Vector sfd = (log_map(spec, sp.xi.x, spath(t + h).xi.x) -
                            log_map(spec, sp.xi.x, spath(t - h).xi.x)) /
                           (2 * h);
        c.expect_le((sfd - sp.u.x).cwiseAbs().maxCoeff(), 1e-5,
                    spec.to_string() + " stable flow/field mismatch");
        const Scalar tau_fd = (spath(t + h).xi.tau - spath(t - h).xi.tau) / (2 * h);
        c.expect_le(std::abs(tau_fd - sp.u.tau), 1e-5, "temperature flow/field mismatch");
      }
    }
  });

  add("flow_lyapunov_monotone", [](Check& c) {
    const FlowParams params = default_flow();
    Rng rng(22);
    for (const auto& spec : suite_manifolds()) {
      for (int k = 0; k < 10; ++k) {
        const AugmentedState xi0{random_point(spec, rng), params.tau0};
        const AugmentedState xi1{random_point(spec, rng), params.tau1};
        Scalar prev = lyapunov_value(spec, xi0, xi1, params);
        for (int i = 1; i <= 100; ++i) {
          const Scalar t = 5.0 * i / 100.0;
          const Scalar h = lyapunov_value(spec, srfm_path(spec, t, xi0, xi1, params).xi, xi1,
                                          params);
          if (prev > 1e-12)
            c.expect(h < prev + 1e-12, "Lyapunov value increased along the stable flow");
          prev = h;
        }
      }
    }
  });

  add("flow_boundary_conditions", [](Check& c) {
    Rng rng(23);
    for (const auto& spec : suite_manifolds()) {
      for (int k = 0; k < 20; ++k) {
        const Vector x0 = random_point(spec, rng);
        const Vector x1 = random_point(spec, rng);
        c.expect_le(distance(spec, rcfm_geodesic_path(spec, 0.0, x0, x1).x, x0), 1e-9,
                    "geodesic flow does not start at x0");
        c.expect_le(distance(spec, rcfm_geodesic_path(spec, 1.0, x0, x1).x, x1), 1e-9,
                    "geodesic flow does not end at x1");
      }
    }
  });

  add("flow_euclidean_degeneration", [](Check& c) {
    const ManifoldSpec r3 = ManifoldSpec::euclidean(3);
    FlowParams params = default_flow();
    params.sigma = 0.0;
    Rng rng(24);
    for (int k = 0; k < 30; ++k) {
      const Vector x0 = rng.normal_vector(3), x1 = rng.normal_vector(3);
      const Scalar t = rng.uniform();
      const PathPoint a = cfm_path(r3, t, x0, x1, params);
      const PathPoint b = rcfm_geodesic_path(r3, t, x0, x1);
      c.expect((a.x.array() == b.x.array()).all() && (a.u.array() == b.u.array()).all(),
               "geodesic flow is not bitwise the linear flow on Euclidean specs");
      const AugmentedState xi0{x0, 0.0}, xi1{x1, 1.0};
      const AugmentedPathPoint sa = sfm_path(r3, t, xi0, xi1, params);
      const AugmentedPathPoint sb = srfm_path(r3, t, xi0, xi1, params);
      c.expect((sa.xi.x.array() == sb.xi.x.array()).all() && sa.xi.tau == sb.xi.tau,
               "stable Riemannian flow is not bitwise the Euclidean one");
    }
  });

  add("flow_contraction_reparametrization", [](Check& c) {
    // With equal rates the stable flow is the geodesic flow under
    // s = 1 - exp(-lambda t).
    const FlowParams params = default_flow();
    Rng rng(25);
    for (const auto& spec : suite_manifolds()) {
      for (int k = 0; k < 15; ++k) {
        const Vector x0 = random_point(spec, rng);
        const Vector x1 = random_point(spec, rng);
        const Scalar t = rng.uniform(0.0, 3.0);
        const Scalar s = 1.0 - std::exp(-params.lambda_x * t);
        const AugmentedState xi0{x0, params.tau0}, xi1{x1, params.tau1};
        const Vector via_stable = srfm_path(spec, t, xi0, xi1, params).xi.x;
        const Vector via_geodesic = rcfm_geodesic_path(spec, s, x0, x1).x;
        c.expect_le(distance(spec, via_stable, via_geodesic), 1e-10,
                    spec.to_string() + " reparametrized flows disagree");
      }
    }
  });

  // -- nnet --------------------------------------------------------------------

  add("nnet_gradient_check", [](Check& c) {
    for (const std::string manifold : {"R2", "S2", "SPD2"}) {
      const ManifoldSpec step = ManifoldSpec::parse(manifold);
      const int horizon = 2;
      const ManifoldSpec chunk_spec = ManifoldSpec::power(step, horizon);
      ModelConfig cfg;
      cfg.chunk_dim = chunk_spec.ambient_dim();
      cfg.obs_dim = 2 * step.ambient_dim();
      cfg.embed_dim = 4;
      cfg.hidden = {8, 8};
      cfg.tau_head = true;
      cfg.separate_tau_mlp = manifold == "SPD2";  // exercise both head layouts
      cfg.tau_hidden = 8;
      Rng rng(31);
      VectorFieldModel model = VectorFieldModel::init(cfg, rng);
      // Random output layer so gradients are non-trivial.
      Vector params = model.pack();
      for (int i = 0; i < params.size(); ++i)
        if (params[i] == 0.0) params[i] = 0.1 * rng.normal();
      model.unpack(params);

      PriorSpec prior = PriorSpec::default_for(step);
      FlowParams flow = default_flow();
      std::vector<BatchItem> items;
      for (int b = 0; b < 4; ++b) {
        BatchItem item;
        item.chunk0_raw = sample_chunk_prior(prior, horizon, rng);
        item.chunk1_raw = sample_chunk_prior(prior, horizon, rng);
        item.obs_raw = rng.normal_vector(cfg.obs_dim);
        item.t = rng.uniform(0.1, 0.9);
        items.push_back(item);
      }
      const Normalizer norm = Normalizer::identity(step.ambient_dim(), step.ambient_dim());
      const PreparedBatch batch = prepare_batch("srfmp", chunk_spec, norm, flow, cfg, items, 2,
                                                step.ambient_dim());
      const LossAndGrads lg = loss_and_grads(model, batch, chunk_spec);
      const Vector analytic = pack_grads(lg.grads);
      const Scalar h = 1e-6;
      Scalar worst = 0.0;
      for (int i = 0; i < params.size(); ++i) {
        Vector p = params;
        p[i] += h;
        model.unpack(p);
        const Scalar up = loss_from_outputs(forward(model, batch.input), batch, chunk_spec);
        p[i] -= 2 * h;
        model.unpack(p);
        const Scalar down = loss_from_outputs(forward(model, batch.input), batch, chunk_spec);
        const Scalar fd = (up - down) / (2 * h);
        const Scalar denom = std::max({std::abs(fd), std::abs(analytic[i]), Scalar(1e-6)});
        worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
      }
      model.unpack(params);
      c.expect_le(worst, 1e-4, manifold + " reverse-mode gradient mismatch");
    }
  });

  add("nnet_checkpoint_roundtrip", [](Check& c) {
    ModelConfig cfg;
    cfg.chunk_dim = 6;
    cfg.obs_dim = 6;
    cfg.embed_dim = 8;
    cfg.hidden = {16, 16};
    cfg.tau_head = true;
    Rng rng(32);
    PolicyCheckpoint ckpt;
    ckpt.manifold = "S2";
    ckpt.horizon = 2;
    ckpt.obs_state_dim = 3;
    ckpt.mode = "srfmp";
    ckpt.norm = Normalizer::identity(3, 3);
    ckpt.model = VectorFieldModel::init(cfg, rng);
    Vector params = ckpt.model.pack();
    for (int i = 0; i < params.size(); ++i) params[i] += 0.01 * rng.normal();
    ckpt.model.unpack(params);

    const auto path =
        (std::filesystem::temp_directory_path() / "rfmp_prop_ckpt.bin").string();
    save_checkpoint(path, ckpt);
    const PolicyCheckpoint loaded = load_checkpoint(path);
    std::filesystem::remove(path);
    c.expect((loaded.model.pack().array() == ckpt.model.pack().array()).all(),
             "checkpoint weights changed across the round trip");
    const Vector input = rng.normal_vector(cfg.input_dim());
    const ModelOutput a = forward_one(ckpt.model, input);
    const ModelOutput b = forward_one(loaded.model, input);
    c.expect((a.spatial.array() == b.spatial.array()).all() && a.tau[0] == b.tau[0],
             "reloaded checkpoint produces different outputs");
  });

  add("nnet_output_tangency", [](Check& c) {
    const ManifoldSpec step = ManifoldSpec::sphere(3);
    const int horizon = 4;
    const ManifoldSpec chunk_spec = ManifoldSpec::power(step, horizon);
    Rng rng(33);
    for (int k = 0; k < 30; ++k) {
      const Vector x = random_point(chunk_spec, rng);
      const Vector raw = rng.normal_vector(chunk_spec.ambient_dim());
      const Vector v = project_to_tangent(chunk_spec, x, raw);
      for (int i = 0; i < horizon; ++i)
        c.expect_le(std::abs(x.segment(3 * i, 3).dot(v.segment(3 * i, 3))), 1e-9,
                    "projected output not tangent per chunk step");
    }
  });

  // -- training -----------------------------------------------------------------

  add("training_optimizer_oracle", [](Check& c) {
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.weight_decay = 0.0;
    // Quadratic bowl: grad f(w) = w.
    Vector w = (Vector(2) << 5.0, 5.0).finished();
    AdamWState state = AdamWState::zero(2);
    // Independent scalar recurrence, one axis.
    double sw = 5.0, sm = 0.0, sv = 0.0;
    Scalar prev_norm = w.norm();
    for (int step = 1; step <= 100; ++step) {
      const Vector g = w;
      const double sg = sw;
      adamw_step(w, g, state, cfg);
      sm = 0.9 * sm + 0.1 * sg;
      sv = 0.999 * sv + 0.001 * sg * sg;
      const double mhat = sm / (1.0 - std::pow(0.9, step));
      const double vhat = sv / (1.0 - std::pow(0.999, step));
      sw -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
      c.expect_le(std::abs(w[0] - sw), 1e-10, "optimizer diverged from the scalar recurrence");
      if (step > 5) {
        c.expect(w.norm() < prev_norm, "optimizer not monotone on the quadratic bowl");
        prev_norm = w.norm();
      }
    }
    c.expect(w.norm() < 5.0 * std::sqrt(2.0), "optimizer failed to descend");
  });

  add("training_ema_convergence", [](Check& c) {
    Vector ema = Vector::Zero(4);
    const Vector target = Vector::Ones(4);
    const Scalar decay = 0.9;
    for (int k = 1; k <= 50; ++k) {
      ema_update(ema, target, decay);
      const Scalar expected = 1.0 - std::pow(decay, k);
      c.expect_le(std::abs(ema[0] - expected), 1e-12, "EMA deviates from the geometric rate");
    }
  });

  add("training_interpolant_equivalence", [](Check& c) {
    // rfmp and srfmp batch assembly traverse the same points under the
    // time reparametrization s = 1 - exp(-lambda t) when rates are equal.
    const ManifoldSpec step = ManifoldSpec::sphere(3);
    const int horizon = 3;
    const ManifoldSpec chunk_spec = ManifoldSpec::power(step, horizon);
    const FlowParams flow = default_flow();
    PriorSpec prior = PriorSpec::default_for(step);
    Rng rng(41);
    ModelConfig cfg;
    cfg.chunk_dim = chunk_spec.ambient_dim();
    cfg.obs_dim = 2 * step.ambient_dim();
    cfg.embed_dim = 4;
    cfg.hidden = {4};
    const Normalizer norm = Normalizer::identity(step.ambient_dim(), step.ambient_dim());
    for (int k = 0; k < 20; ++k) {
      BatchItem item;
      item.chunk0_raw = sample_chunk_prior(prior, horizon, rng);
      item.chunk1_raw = sample_chunk_prior(prior, horizon, rng);
      item.obs_raw = rng.normal_vector(cfg.obs_dim);
      item.t = rng.uniform(0.0, 1.0);
      ModelConfig cfg_tau = cfg;
      cfg_tau.tau_head = true;
      const PreparedBatch stable = prepare_batch("srfmp", chunk_spec, norm, flow, cfg_tau, {item},
                                                 2, step.ambient_dim());
      BatchItem reparam = item;
      reparam.t = 1.0 - std::exp(-flow.lambda_x * item.t);
      const PreparedBatch geodesic = prepare_batch("rfmp", chunk_spec, norm, flow, cfg, {reparam},
                                                   2, step.ambient_dim());
      c.expect_le((stable.x_t.row(0) - geodesic.x_t.row(0)).cwiseAbs().maxCoeff(), 1e-10,
                  "training interpolants disagree after reparametrization");
    }
  });

  add("training_determinism", [](Check& c) {
    Dataset dataset = gen_strokes(StrokeShape::L, 4, 0.01, 7, 16);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.hidden = {16};
    cfg.embed_dim = 4;
    cfg.seed = 13;
    cfg.learning_rate = 1e-3;
    const FlowParams flow = default_flow();
    const PriorSpec prior = PriorSpec::default_for(dataset.action_manifold);
    const TrainResult a = train(dataset, cfg, flow, prior, 4, 2);
    const TrainResult b = train(dataset, cfg, flow, prior, 4, 2);
    c.expect(a.history.size() == b.history.size(), "histories have different lengths");
    auto same = [](Scalar x, Scalar y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    for (std::size_t i = 0; i < a.history.size(); ++i)
      c.expect(same(a.history[i].mean_loss, b.history[i].mean_loss) &&
                   same(a.history[i].val_loss, b.history[i].val_loss),
               "same seed produced different loss histories");
    c.expect((a.model.pack().array() == b.model.pack().array()).all(),
             "same seed produced different weights");
  });

  // -- inference ----------------------------------------------------------------

  add("inference_manifold_closure", [](Check& c) {
    Rng rng(51);
    for (const auto& spec : suite_manifolds()) {
      const Vector x0 = random_point(spec, rng);
      const Vector x1 = random_point(spec, rng);
      IntegratorConfig cfg;
      cfg.nfe = 25;
      const auto field = [&](Scalar t, const Vector& x) {
        return t <= 0.5 ? Vector(log_map(spec, x, x1) / (1.0 - t))
                        : Vector(-log_map(spec, x, x0) / t);
      };
      for (const auto& p : integrate_projected_euler(spec, field, x0, cfg))
        c.expect(is_on_manifold(spec, p, 1e-9),
                 spec.to_string() + " integrator left the manifold");
    }
  });

  add("inference_exact_field_recovery", [](Check& c) {
    const ManifoldSpec s2 = ManifoldSpec::sphere(3);
    Rng rng(52);
    for (int k = 0; k < 20; ++k) {
      const Vector x0 = random_point(s2, rng);
      Vector x1 = random_point(s2, rng);
      if (distance(s2, x0, x1) > M_PI - 0.3) x1 = -x1;
      IntegratorConfig cfg;
      cfg.nfe = 100;
      const auto field = [&](Scalar t, const Vector& x) {
        return t <= 0.5 ? Vector(log_map(s2, x, x1) / (1.0 - t))
                        : Vector(-log_map(s2, x, x0) / t);
      };
      const auto traj = integrate_projected_euler(s2, field, x0, cfg);
      c.expect_le(distance(s2, traj.back(), x1), 0.02 * distance(s2, x0, x1) + 1e-12,
                  "Euler endpoint strayed from the geodesic target");
    }
  });

  add("inference_single_step_convergence", [](Check& c) {
    const FlowParams flow = default_flow();
    Rng rng(53);
    for (const std::string m : {"R2", "S2", "SPD2"}) {
      const ManifoldSpec spec = ManifoldSpec::parse(m);
      for (int k = 0; k < 20; ++k) {
        const AugmentedState xi1{random_point(spec, rng), flow.tau1};
        AugmentedState xi0{random_point(spec, rng), flow.tau0};
        if (spec.kind() == ManifoldSpec::Kind::Sphere &&
            distance(spec, xi0.x, xi1.x) > M_PI - 0.2)
          xi0.x = -xi0.x;
        IntegratorConfig cfg;
        cfg.nfe = 1;
        const auto field = [&](const AugmentedState& xi) {
          return stable_target_field(spec, xi, xi1, flow);
        };
        const auto traj = integrate_srfmp(spec, field, xi0, flow, cfg);
        const Scalar tol = spec.kind() == ManifoldSpec::Kind::Euclidean ? 1e-12 : 1e-10;
        c.expect_le(distance(spec, traj.back().x, xi1.x), tol,
                    m + " single 1/lambda step missed the target");
      }
    }
  });

  add("inference_refinement_idempotence", [](Check& c) {
    const FlowParams flow = default_flow();
    Rng rng(54);
    const ManifoldSpec s2 = ManifoldSpec::sphere(3);
    for (int k = 0; k < 10; ++k) {
      const AugmentedState xi1{random_point(s2, rng), flow.tau1};
      IntegratorConfig cfg;
      cfg.nfe = 6;
      const auto field = [&](const AugmentedState& xi) {
        return stable_target_field(s2, xi, xi1, flow);
      };
      const auto traj = integrate_srfmp(s2, field, {xi1.x, flow.tau1}, flow, cfg);
      for (std::size_t i = 1; i < traj.size(); ++i)
        c.expect_le(distance(s2, traj[i].x, traj[i - 1].x), 1e-10,
                    "refinement steps moved a converged state");
    }
  });

  add("inference_time_robustness", [](Check& c) {
    // The stable schedule parks on the target, so doubling the horizon
    // leaves the endpoint in place; the geodesic field extended past its
    // horizon keeps moving.
    const ManifoldSpec s2 = ManifoldSpec::sphere(3);
    const FlowParams flow = default_flow();
    Rng rng(55);
    for (int k = 0; k < 10; ++k) {
      const Vector x0 = random_point(s2, rng);
      Vector x1 = random_point(s2, rng);
      if (distance(s2, x0, x1) > M_PI - 0.3) x1 = -x1;
      const AugmentedState xi0{x0, flow.tau0};
      const AugmentedState xi1{x1, flow.tau1};
      const auto stable_field = [&](const AugmentedState& xi) {
        return stable_target_field(s2, xi, xi1, flow);
      };
      IntegratorConfig short_cfg;
      short_cfg.t_end = 1.0;
      short_cfg.t_end_from_config = true;
      IntegratorConfig long_cfg;
      long_cfg.t_end = 2.0;
      long_cfg.t_end_from_config = true;
      const Vector end1 = integrate_srfmp(s2, stable_field, xi0, flow, short_cfg).back().x;
      const Vector end2 = integrate_srfmp(s2, stable_field, xi0, flow, long_cfg).back().x;
      c.expect_le(distance(s2, end1, end2), 1e-8, "stable endpoint moved between horizons");

      const auto geodesic_field = [&](Scalar t, const Vector& x) {
        return t <= 0.5 ? Vector(log_map(s2, x, x1) / (1.0 - t))
                        : Vector(-log_map(s2, x, x0) / t);
      };
      IntegratorConfig g_short;
      g_short.nfe = 50;
      g_short.t_end = 1.0;
      IntegratorConfig g_long;
      g_long.nfe = 100;
      g_long.t_end = 2.0;
      const Vector g1 = integrate_projected_euler(s2, geodesic_field, x0, g_short).back();
      const Vector g2 = integrate_projected_euler(s2, geodesic_field, x0, g_long).back();
      c.expect(distance(s2, g1, g2) > 0.1 * distance(s2, x0, x1),
               "extended geodesic field unexpectedly stayed put");
    }
  });

  // -- tasks ----------------------------------------------------------------------

  add("task_stereographic_roundtrip", [](Check& c) {
    for (Scalar u = -1.5; u <= 1.5; u += 0.25) {
      for (Scalar v = -1.5; v <= 1.5; v += 0.25) {
        const Vector p = (Vector(2) << u, v).finished();
        const Vector q = stereographic_to_sphere(p);
        c.expect_le(std::abs(q.norm() - 1.0), 1e-12, "projection left the sphere");
        c.expect_le((sphere_to_stereographic(q) - p).cwiseAbs().maxCoeff(), 1e-10,
                    "stereographic round trip broke");
      }
    }
  });

  add("task_dataset_determinism", [](Check& c) {
    const Dataset a = gen_strokes(StrokeShape::TwoMode, 6, 0.05, 17, 24);
    const Dataset b = gen_strokes(StrokeShape::TwoMode, 6, 0.05, 17, 24);
    bool equal = a.demos.size() == b.demos.size();
    for (std::size_t d = 0; equal && d < a.demos.size(); ++d)
      for (std::size_t s = 0; equal && s < a.demos[d].actions.size(); ++s)
        equal = (a.demos[d].actions[s].array() == b.demos[d].actions[s].array()).all();
    c.expect(equal, "same seed produced different stroke datasets");
    const auto pa = gen_spd_dataset(50, 23, 0.05);
    const auto pb = gen_spd_dataset(50, 23, 0.05);
    for (std::size_t i = 0; i < pa.size(); ++i)
      c.expect((pa[i].array() == pb[i].array()).all(),
               "same seed produced different SPD datasets");
  });

  add("task_sphere_stroke_invariants", [](Check& c) {
    const Dataset planar = gen_strokes(StrokeShape::L, 5, 0.05, 29, 30);
    const Dataset sphere = project_dataset_to_sphere(planar);
    const ManifoldSpec s2 = ManifoldSpec::sphere(3);
    for (const auto& demo : sphere.demos)
      for (const auto& a : demo.actions)
        c.expect(is_on_manifold(s2, a, 1e-9), "projected stroke left the sphere");
    for (const auto& demo : planar.demos)
      for (const auto& a : demo.actions)
        c.expect(a.cwiseAbs().maxCoeff() <= 1.5 + 1e-12, "stroke escaped the working range");
  });

  add("task_twomode_bimodality", [](Check& c) {
    const Dataset d = gen_strokes(StrokeShape::TwoMode, 10, 0.02, 31, 21);
    std::vector<Scalar> mids;
    for (const auto& demo : d.demos) mids.push_back(demo.actions[10][1]);
    Scalar lo = 0, hi = 0;
    int nlo = 0, nhi = 0;
    for (Scalar m : mids) {
      if (m > 0) {
        hi += m;
        ++nhi;
      } else {
        lo += m;
        ++nlo;
      }
    }
    c.expect(nlo > 0 && nhi > 0, "two-mode strokes collapsed to one family");
    if (nlo > 0 && nhi > 0)
      c.expect(hi / nhi - lo / nlo > 0.5, "two-mode midpoint clusters are too close");
  });

  add("task_spd_dataset_validity", [](Check& c) {
    const ManifoldSpec spd2 = ManifoldSpec::spd(2);
    const auto clean = gen_spd_dataset(40, 3, 0.0);
    const auto jittered = gen_spd_dataset(40, 3, 0.08);
    for (std::size_t i = 0; i < clean.size(); ++i) {
      c.expect(is_on_manifold(spd2, clean[i], 1e-9), "SPD curve point invalid");
      c.expect(is_on_manifold(spd2, jittered[i], 1e-9), "jittered SPD point invalid");
    }
    const auto again = gen_spd_dataset(40, 99, 0.0);
    for (std::size_t i = 0; i < clean.size(); ++i)
      c.expect((clean[i].array() == again[i].array()).all(),
               "jitter-free curve depends on the seed");
  });

  return results;
}

}  // namespace rfmp
