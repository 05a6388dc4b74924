#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "rfmp/tasks.hpp"

using namespace rfmp;

namespace {
Vector vec2(Scalar a, Scalar b) { return (Vector(2) << a, b).finished(); }
Vector vec3(Scalar a, Scalar b, Scalar c) { return (Vector(3) << a, b, c).finished(); }
}  // namespace

TEST_CASE("noise-free strokes are identical across demos") {
  const Dataset d = gen_strokes(StrokeShape::L, 2, 0.0, 11, 40);
  REQUIRE(d.demos.size() == 2);
  REQUIRE(d.demos[0].actions.size() == 40);
  for (std::size_t s = 0; s < 40; ++s)
    CHECK((d.demos[0].actions[s] - d.demos[1].actions[s]).norm() == 0);
}

TEST_CASE("strokes stay inside the working range") {
  for (const auto shape : {StrokeShape::L, StrokeShape::S, StrokeShape::TwoMode}) {
    const Dataset d = gen_strokes(shape, 8, 0.1, 13, 30);
    for (const auto& demo : d.demos)
      for (const auto& a : demo.actions) CHECK(a.cwiseAbs().maxCoeff() <= 1.5);
  }
}

TEST_CASE("two-mode strokes form two separated families") {
  const Dataset d = gen_strokes(StrokeShape::TwoMode, 10, 0.02, 17, 21);
  Scalar up = 0, down = 0;
  int n_up = 0, n_down = 0;
  for (const auto& demo : d.demos) {
    const Scalar mid_y = demo.actions[10][1];
    (mid_y > 0 ? up : down) += mid_y;
    (mid_y > 0 ? n_up : n_down) += 1;
  }
  REQUIRE(n_up > 0);
  REQUIRE(n_down > 0);
  CHECK(up / n_up - down / n_down > 0.5);
}

TEST_CASE("stereographic projection formulas") {
  CHECK((stereographic_to_sphere(vec2(0, 0)) - vec3(0, 0, 1)).norm() <= 1e-15);
  CHECK((stereographic_to_sphere(vec2(1, 0)) - vec3(1, 0, 0)).norm() <= 1e-15);
  const Vector q = stereographic_to_sphere(vec2(0.5, 0.5));
  CHECK((q - vec3(2.0 / 3, 2.0 / 3, 1.0 / 3)).norm() <= 1e-15);

  for (Scalar u = -1.5; u <= 1.5; u += 0.125) {
    for (Scalar v = -1.5; v <= 1.5; v += 0.125) {
      const Vector p = vec2(u, v);
      const Vector s = stereographic_to_sphere(p);
      CHECK(std::abs(s.norm() - 1.0) <= 1e-12);
      CHECK((sphere_to_stereographic(s) - p).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("sphere-projected strokes satisfy the sphere invariants") {
  const Dataset planar = gen_strokes(StrokeShape::S, 5, 0.05, 19, 25);
  const Dataset sphere = project_dataset_to_sphere(planar);
  CHECK(sphere.action_manifold == ManifoldSpec::sphere(3));
  for (const auto& demo : sphere.demos) {
    for (const auto& a : demo.actions) CHECK(std::abs(a.norm() - 1.0) <= 1e-9);
    for (const auto& o : demo.obs) CHECK(std::abs(o.norm() - 1.0) <= 1e-9);
  }
}

TEST_CASE("SPD toy dataset") {
  const ManifoldSpec spd2 = ManifoldSpec::spd(2);

  SUBCASE("zero jitter lies exactly on the generating curve") {
    const auto a = gen_spd_dataset(25, 3, 0.0);
    const auto b = gen_spd_dataset(25, 99, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK((a[i].array() == b[i].array()).all());
  }

  SUBCASE("all points are positive definite") {
    for (const auto& p : gen_spd_dataset(60, 5, 0.1)) {
      CHECK(is_on_manifold(spd2, p, 1e-9));
      Matrix m(2, 2);
      m << p[0], p[1], p[2], p[3];
      Eigen::SelfAdjointEigenSolver<Matrix> es(m);
      CHECK(es.eigenvalues().minCoeff() > 0);
    }
  }

  SUBCASE("regeneration is bit-identical") {
    const auto a = gen_spd_dataset(100, 21, 0.05);
    const auto b = gen_spd_dataset(100, 21, 0.05);
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK((a[i].array() == b[i].array()).all());
  }

  SUBCASE("demo wrapper produces a valid dataset") {
    const Dataset d = gen_spd_demos(4, 20, 0.05, 23);
    d.validate(4, 2);
    CHECK(d.demos.size() == 4);
  }
}

TEST_CASE("reach environment") {
  const ManifoldSpec r2 = ManifoldSpec::euclidean(2);

  SUBCASE("command the goal: immediate success with score 1") {
    ReachEnv env(r2, 0.05, 50, 1);
    env.reset();
    const auto result = env.step(env.goal());
    CHECK(result.done);
    CHECK(env.success());
    CHECK(result.score == doctest::Approx(1.0));
  }

  SUBCASE("a frozen agent scores 0 at the step limit") {
    ReachEnv env(r2, 0.01, 10, 2);
    env.reset();
    const Vector stay = env.agent();
    ReachEnv::StepResult result;
    while (!env.done()) result = env.step(stay);
    CHECK(result.done);
    CHECK(!env.success());
    CHECK(result.score == doctest::Approx(0.0));
  }

  SUBCASE("sphere mode projects commanded actions onto the manifold") {
    const ManifoldSpec s2 = ManifoldSpec::sphere(3);
    ReachEnv env(s2, 0.05, 20, 3);
    Vector obs = env.reset();
    CHECK(std::abs(obs.head(3).norm() - 1.0) <= 1e-9);
    const auto result = env.step(vec3(3, 0, 0));  // off-manifold command
    CHECK(std::abs(result.observation.head(3).norm() - 1.0) <= 1e-9);
    CHECK((env.agent() - vec3(1, 0, 0)).norm() <= 1e-12);
  }

  SUBCASE("stepping a finished episode is a protocol error") {
    ReachEnv env(r2, 0.05, 5, 4);
    env.reset();
    while (!env.done()) env.step(env.goal());
    CHECK_THROWS_AS(env.step(env.goal()), std::logic_error);
  }
}

TEST_CASE("reach demonstrations are manifold-valid and windowed") {
  for (const std::string m : {"R2", "S2"}) {
    const ManifoldSpec spec = ManifoldSpec::parse(m);
    const Dataset d = gen_reach_demos(spec, 5, 0.2, 7, 30);
    d.validate(8, 2);
    for (const auto& demo : d.demos) {
      CHECK(demo.actions.size() == 30);
      // The expert holds still on its first command.
      CHECK((demo.actions[0] - demo.obs[0].head(spec.ambient_dim())).norm() <= 1e-12);
      // Later observations carry the previous commanded position.
      for (std::size_t s = 1; s < demo.obs.size(); ++s)
        CHECK((demo.obs[s].head(spec.ambient_dim()) - demo.actions[s - 1]).norm() <= 1e-12);
    }
  }
}

TEST_CASE("dataset files round trip") {
  const Dataset d = gen_strokes(StrokeShape::TwoMode, 3, 0.05, 31, 20);
  const auto path = (std::filesystem::temp_directory_path() / "rfmp_test_dataset.csv").string();
  nlohmann::json header{{"task", "strokes"}, {"shape", "TwoMode"}, {"seed", 31}};
  save_dataset(path, d, header);

  const LoadedDataset loaded = load_dataset(path);
  CHECK(loaded.header["task"] == "strokes");
  CHECK(loaded.header["manifold"] == "R2");
  CHECK(loaded.header["n_demos"] == 3);
  REQUIRE(loaded.dataset.demos.size() == d.demos.size());
  for (std::size_t i = 0; i < d.demos.size(); ++i) {
    REQUIRE(loaded.dataset.demos[i].actions.size() == d.demos[i].actions.size());
    for (std::size_t s = 0; s < d.demos[i].actions.size(); ++s) {
      CHECK((loaded.dataset.demos[i].actions[s].array() == d.demos[i].actions[s].array()).all());
      CHECK((loaded.dataset.demos[i].obs[s].array() == d.demos[i].obs[s].array()).all());
    }
  }
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_dataset("/nonexistent/rfmp_data.csv"), IoError);
}
