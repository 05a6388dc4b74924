#include <cmath>

#include "doctest.h"
#include "rfmp/inference.hpp"
#include "rfmp/training.hpp"

using namespace rfmp;

namespace {

Vector vec2(Scalar a, Scalar b) { return (Vector(2) << a, b).finished(); }
Vector vec3(Scalar a, Scalar b, Scalar c) { return (Vector(3) << a, b, c).finished(); }

// A tiny trained-model stand-in with random weights on an arbitrary manifold.
PolicyCheckpoint make_random_checkpoint(const std::string& manifold, int horizon,
                                        int obs_state_dim, const std::string& mode,
                                        std::uint64_t seed) {
  const ManifoldSpec step = ManifoldSpec::parse(manifold);
  ModelConfig cfg;
  cfg.chunk_dim = step.ambient_dim() * horizon;
  cfg.obs_dim = 2 * obs_state_dim;
  cfg.embed_dim = 8;
  cfg.hidden = {16, 16};
  cfg.tau_head = mode == "srfmp";
  Rng rng(seed);
  PolicyCheckpoint ckpt;
  ckpt.manifold = manifold;
  ckpt.horizon = horizon;
  ckpt.obs_state_dim = obs_state_dim;
  ckpt.mode = mode;
  ckpt.norm = Normalizer::identity(step.ambient_dim(), obs_state_dim);
  ckpt.model = VectorFieldModel::init(cfg, rng);
  Vector params = ckpt.model.pack();
  for (int i = 0; i < params.size(); ++i) params[i] += 0.05 * rng.normal();
  ckpt.model.unpack(params);
  return ckpt;
}

}  // namespace

TEST_CASE("zero field leaves the state in place") {
  const ManifoldSpec s2 = ManifoldSpec::sphere(3);
  IntegratorConfig cfg;
  cfg.nfe = 7;
  const auto traj = integrate_projected_euler(
      s2, [](Scalar, const Vector& x) { return Vector(Vector::Zero(x.size())); },
      vec3(0, 0, 1), cfg);
  REQUIRE(traj.size() == 8);
  for (const auto& p : traj) CHECK((p - vec3(0, 0, 1)).norm() == 0);
}

TEST_CASE("euclidean contraction follows the per-step recursion") {
  // Exact stable field: after n steps the gap scales by (1 - lambda dt)^n.
  const ManifoldSpec r2 = ManifoldSpec::euclidean(2);
  const Scalar lambda = 2.5;
  const Vector x0 = vec2(3, -1), x1 = vec2(0, 2);
  IntegratorConfig cfg;
  cfg.nfe = 10;
  cfg.t_end = 1.0;
  const auto field = [&](Scalar, const Vector& x) { return Vector(lambda * (x1 - x)); };
  const auto traj = integrate_projected_euler(r2, field, x0, cfg);
  const Scalar dt = 0.1;
  for (int n = 0; n <= 10; ++n) {
    const Vector expected = x1 + std::pow(1.0 - lambda * dt, n) * (x0 - x1);
    CHECK((traj[n] - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("a constant quarter-circle tangent lands on the geodesic endpoint") {
  const ManifoldSpec s2 = ManifoldSpec::sphere(3);
  IntegratorConfig cfg;
  cfg.nfe = 1;
  cfg.t_end = 1.0;
  const Vector x0 = vec3(1, 0, 0);
  const Vector v = vec3(0, M_PI / 2, 0);
  const auto traj = integrate_projected_euler(
      s2, [&](Scalar, const Vector&) { return v; }, x0, cfg);
  CHECK((traj.back() - vec3(0, 1, 0)).norm() <= 1e-12);
}

TEST_CASE("stable schedule: the first step lands on the target") {
  FlowParams flow;
  flow.lambda_x = 2.5;

  SUBCASE("euclidean, exactly") {
    const ManifoldSpec r2 = ManifoldSpec::euclidean(2);
    const AugmentedState xi1{vec2(0, 2), 1.0};
    const AugmentedState xi0{vec2(3, -1), 0.0};
    IntegratorConfig cfg;
    cfg.nfe = 1;
    const auto field = [&](const AugmentedState& xi) {
      return stable_target_field(r2, xi, xi1, flow);
    };
    const auto traj = integrate_srfmp(r2, field, xi0, flow, cfg);
    REQUIRE(traj.size() == 2);
    CHECK((traj.back().x - vec2(0, 2)).norm() == 0.0);
  }

  SUBCASE("sphere, within 1e-10") {
    const ManifoldSpec s2 = ManifoldSpec::sphere(3);
    const AugmentedState xi1{vec3(0, 1, 0), 1.0};
    const AugmentedState xi0{vec3(1, 0, 0), 0.0};
    IntegratorConfig cfg;
    cfg.nfe = 4;
    const auto field = [&](const AugmentedState& xi) {
      return stable_target_field(s2, xi, xi1, flow);
    };
    const auto traj = integrate_srfmp(s2, field, xi0, flow, cfg);
    CHECK(distance(s2, traj[1].x, xi1.x) <= 1e-10);
    // Refinement steps hold the converged state.
    CHECK(distance(s2, traj.back().x, xi1.x) <= 1e-10);
  }
}

TEST_CASE("stable schedule derives its step count from an explicit horizon") {
  FlowParams flow;
  flow.lambda_x = 2.5;
  IntegratorConfig cfg;
  cfg.t_end_from_config = true;
  cfg.t_end = 1.0;
  CHECK(srfmp_step_count(flow, cfg) == 7);  // 0.4 + 6 * 0.1
  cfg.t_end = 2.0;
  CHECK(srfmp_step_count(flow, cfg) == 17);
  cfg.t_end = 0.3;
  CHECK(srfmp_step_count(flow, cfg) == 1);
  cfg.t_end_from_config = false;
  cfg.nfe = 5;
  CHECK(srfmp_step_count(flow, cfg) == 5);
}

TEST_CASE("non-finite fields abort integration") {
  const ManifoldSpec r1 = ManifoldSpec::euclidean(1);
  IntegratorConfig cfg;
  cfg.nfe = 3;
  const auto bad = [](Scalar, const Vector& x) {
    return Vector(Vector::Constant(x.size(), std::numeric_limits<Scalar>::quiet_NaN()));
  };
  CHECK_THROWS_AS(integrate_projected_euler(r1, bad, Vector::Zero(1), cfg), DivergedError);
}

TEST_CASE("policy queries return the action horizon") {
  const PolicyCheckpoint ckpt = make_random_checkpoint("R2", 16, 4, "rfmp", 3);
  PolicyConfig policy;
  policy.horizon = 16;
  policy.action_horizon = 8;
  IntegratorConfig integ;
  integ.nfe = 4;
  const PriorSpec prior = PriorSpec::default_for(ManifoldSpec::euclidean(2));
  std::vector<Vector> history{(Vector(4) << 0, 0, 1, 1).finished(),
                              (Vector(4) << 0.1, 0, 1, 1).finished()};

  Rng rng(5);
  const auto actions = policy_act(ckpt, history, policy, integ, prior, rng);
  CHECK(actions.size() == 8);
  for (const auto& a : actions) CHECK(a.size() == 2);

  Rng rng_a(9), rng_b(9);
  const auto a1 = policy_act(ckpt, history, policy, integ, prior, rng_a);
  const auto a2 = policy_act(ckpt, history, policy, integ, prior, rng_b);
  for (std::size_t i = 0; i < a1.size(); ++i)
    CHECK((a1[i].array() == a2[i].array()).all());
}

TEST_CASE("policy needs a warm history") {
  const PolicyCheckpoint ckpt = make_random_checkpoint("R2", 4, 4, "rfmp", 4);
  PolicyConfig policy;
  policy.horizon = 4;
  policy.action_horizon = 2;
  IntegratorConfig integ;
  const PriorSpec prior = PriorSpec::default_for(ManifoldSpec::euclidean(2));
  Rng rng(1);
  std::vector<Vector> short_history{(Vector(4) << 0, 0, 1, 1).finished()};
  CHECK_THROWS_AS(policy_act(ckpt, short_history, policy, integ, prior, rng), ConfigError);
}

TEST_CASE("product-manifold actions keep their quaternion blocks unit") {
  const PolicyCheckpoint ckpt = make_random_checkpoint("R3xS3xR1", 4, 8, "srfmp", 6);
  PolicyConfig policy;
  policy.horizon = 4;
  policy.action_horizon = 4;
  IntegratorConfig integ;
  integ.nfe = 6;
  const ManifoldSpec step = ManifoldSpec::parse("R3xS3xR1");
  const PriorSpec prior = PriorSpec::default_for(step);
  Rng rng(7);
  std::vector<Vector> history{rng.normal_vector(8), rng.normal_vector(8)};
  history[0].segment(3, 4).normalize();
  history[1].segment(3, 4).normalize();

  const auto actions = policy_act(ckpt, history, policy, integ, prior, rng);
  for (const auto& a : actions) {
    CHECK(is_on_manifold(step, a, 1e-9));
    CHECK(std::abs(a.segment(3, 4).norm() - 1.0) <= 1e-9);
  }
}

TEST_CASE("integrator iterates stay on-manifold") {
  Rng rng(8);
  for (const std::string m : {"S2", "SPD2", "R3xS3xR1"}) {
    const ManifoldSpec spec = ManifoldSpec::parse(m);
    const Vector x0 = random_point(spec, rng);
    const Vector x1 = random_point(spec, rng);
    IntegratorConfig cfg;
    cfg.nfe = 40;
    const auto field = [&](Scalar t, const Vector& x) {
      return t <= 0.5 ? Vector(log_map(spec, x, x1) / (1.0 - t))
                      : Vector(-log_map(spec, x, x0) / t);
    };
    for (const auto& p : integrate_projected_euler(spec, field, x0, cfg))
      CHECK(is_on_manifold(spec, p, 1e-9));
  }
}

TEST_CASE("jerkiness metric") {
  const ManifoldSpec r1 = ManifoldSpec::euclidean(1);

  std::vector<Vector> constant(6, Vector::Constant(1, 0.7));
  CHECK(jerkiness(r1, constant, 1.0) == 0.0);

  std::vector<Vector> quadratic;
  for (int k = 0; k < 8; ++k) quadratic.push_back(Vector::Constant(1, 0.5 * k * k));
  CHECK(jerkiness(r1, quadratic, 1.0) == 0.0);

  std::vector<Vector> cubic;
  for (int k = 0; k < 8; ++k) cubic.push_back(Vector::Constant(1, k * k * k));
  CHECK(jerkiness(r1, cubic, 1.0) == doctest::Approx(36.0));

  // Sampling the same cubic finer leaves the metric unchanged.
  std::vector<Vector> cubic_fine;
  for (int k = 0; k < 16; ++k) {
    const Scalar t = 0.5 * k;
    cubic_fine.push_back(Vector::Constant(1, t * t * t));
  }
  CHECK(jerkiness(r1, cubic_fine, 0.5) == doctest::Approx(36.0));

  std::vector<Vector> too_short(3, Vector::Zero(1));
  CHECK_THROWS_AS(jerkiness(r1, too_short, 1.0), ConfigError);

  // Only Euclidean factors count; a pure sphere sequence scores zero.
  const ManifoldSpec s2 = ManifoldSpec::sphere(3);
  std::vector<Vector> sphere_seq;
  Rng rng(9);
  for (int k = 0; k < 6; ++k) sphere_seq.push_back(random_point(s2, rng));
  CHECK(jerkiness(s2, sphere_seq, 1.0) == 0.0);
}

TEST_CASE("integrator config validation") {
  FlowParams flow;
  IntegratorConfig cfg;
  cfg.nfe = 0;
  CHECK_THROWS_AS(cfg.validate(flow), ConfigError);
  cfg.nfe = 1;
  cfg.refine_step = 1.0;  // > 1/lambda_x
  CHECK_THROWS_AS(cfg.validate(flow), ConfigError);
  cfg.refine_step = 0.0;
  cfg.t_end = -1.0;
  CHECK_THROWS_AS(cfg.validate(flow), ConfigError);
}
