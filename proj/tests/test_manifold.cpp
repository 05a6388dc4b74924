#include <Eigen/Eigenvalues>
#include <cmath>

#include "doctest.h"
#include "rfmp/manifold.hpp"
#include "rfmp/rng.hpp"

using namespace rfmp;

namespace {

Vector vec2(Scalar a, Scalar b) { return (Vector(2) << a, b).finished(); }
Vector vec3(Scalar a, Scalar b, Scalar c) { return (Vector(3) << a, b, c).finished(); }
Vector spd_flat(Scalar a, Scalar b, Scalar c, Scalar d) {
  return (Vector(4) << a, b, c, d).finished();
}

// Independent affine-invariant distance: eigendecompose S^-1/2 B S^-1/2 by
// hand through Eigen's generalized solver and sum squared log-eigenvalues.
Scalar spd_distance_oracle(const Matrix& a, const Matrix& b) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(b, a);
  Scalar acc = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const Scalar l = std::log(es.eigenvalues()[i]);
    acc += l * l;
  }
  return std::sqrt(acc);
}

std::vector<ManifoldSpec> all_manifolds() {
  return {ManifoldSpec::euclidean(2), ManifoldSpec::sphere(3), ManifoldSpec::sphere(4),
          ManifoldSpec::spd(2), ManifoldSpec::spd(3), ManifoldSpec::parse("R3xS3xR1")};
}

}  // namespace

TEST_CASE("exp map closed forms") {
  const ManifoldSpec s2 = ManifoldSpec::sphere(3);
  const Vector quarter = exp_map(s2, vec3(1, 0, 0), vec3(0, M_PI / 2, 0));
  CHECK((quarter - vec3(0, 1, 0)).norm() < 1e-12);

  const ManifoldSpec spd2 = ManifoldSpec::spd(2);
  const Vector identity = spd_flat(1, 0, 0, 1);
  const Vector diag_log = spd_flat(std::log(2.0), 0, 0, std::log(3.0));
  CHECK((exp_map(spd2, identity, diag_log) - spd_flat(2, 0, 0, 3)).norm() < 1e-12);

  const ManifoldSpec r2 = ManifoldSpec::euclidean(2);
  CHECK((exp_map(r2, vec2(1, 1), vec2(2, -1)) - vec2(3, 0)).norm() == 0);
}

TEST_CASE("log map inverts exp map") {
  const ManifoldSpec s2 = ManifoldSpec::sphere(3);
  CHECK((log_map(s2, vec3(1, 0, 0), vec3(0, 1, 0)) - vec3(0, M_PI / 2, 0)).norm() < 1e-12);

  const ManifoldSpec spd2 = ManifoldSpec::spd(2);
  const Vector identity = spd_flat(1, 0, 0, 1);
  const Vector back = log_map(spd2, identity, spd_flat(2, 0, 0, 3));
  CHECK((back - spd_flat(std::log(2.0), 0, 0, std::log(3.0))).norm() < 1e-12);

  const ManifoldSpec r2 = ManifoldSpec::euclidean(2);
  CHECK((log_map(r2, vec2(1, 1), vec2(3, 0)) - vec2(2, -1)).norm() == 0);
}

TEST_CASE("distances") {
  const ManifoldSpec s2 = ManifoldSpec::sphere(3);
  CHECK(distance(s2, vec3(1, 0, 0), vec3(0, 1, 0)) == doctest::Approx(M_PI / 2).epsilon(1e-12));

  const ManifoldSpec spd2 = ManifoldSpec::spd(2);
  const Vector identity = spd_flat(1, 0, 0, 1);
  const Vector target = spd_flat(std::exp(2.0), 0, 0, 1);
  CHECK(distance(spd2, identity, target) == doctest::Approx(2.0).epsilon(1e-10));

  const ManifoldSpec r2 = ManifoldSpec::euclidean(2);
  CHECK(distance(r2, vec2(0, 0), vec2(3, 4)) == doctest::Approx(5.0));
}

TEST_CASE("SPD distance matches the eigendecomposition oracle") {
  Rng rng(2);
  const ManifoldSpec spd3 = ManifoldSpec::spd(3);
  for (int k = 0; k < 50; ++k) {
    const Vector x = random_point(spd3, rng);
    const Vector y = random_point(spd3, rng);
    Matrix a(3, 3), b(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        a(i, j) = x[3 * i + j];
        b(i, j) = y[3 * i + j];
      }
    CHECK(distance(spd3, x, y) == doctest::Approx(spd_distance_oracle(a, b)).epsilon(1e-9));
  }
}

TEST_CASE("distance axioms on sampled triples") {
  Rng rng(3);
  for (const auto& spec : all_manifolds()) {
    for (int k = 0; k < 30; ++k) {
      const Vector x = random_point(spec, rng);
      const Vector y = random_point(spec, rng);
      const Vector z = random_point(spec, rng);
      CHECK(distance(spec, x, y) == doctest::Approx(distance(spec, y, x)).epsilon(1e-10));
      CHECK(distance(spec, x, x) <= 1e-12);
      CHECK(distance(spec, x, z) <= distance(spec, x, y) + distance(spec, y, z) + 1e-8);
    }
  }
}

TEST_CASE("manifold projection") {
  const ManifoldSpec s2 = ManifoldSpec::sphere(3);
  CHECK((project_to_manifold(s2, vec3(2, 0, 0)) - vec3(1, 0, 0)).norm() == 0);
  CHECK((project_to_manifold(s2, vec3(0.6, 0.8, 0)) - vec3(0.6, 0.8, 0)).norm() < 1e-15);
  CHECK_THROWS_AS(project_to_manifold(s2, vec3(0, 0, 0)), ManifoldError);

  const ManifoldSpec spd2 = ManifoldSpec::spd(2);
  const Vector projected = project_to_manifold(spd2, spd_flat(1, 0.5, 0.4, 1));
  CHECK((projected - spd_flat(1, 0.45, 0.45, 1)).norm() < 1e-12);

  // Indefinite symmetric input gets its eigenvalues floored.
  const Vector floored = project_to_manifold(spd2, spd_flat(1, 0, 0, -2));
  CHECK(is_on_manifold(spd2, floored));
}

TEST_CASE("tangent projection") {
  const ManifoldSpec s2 = ManifoldSpec::sphere(3);
  CHECK((project_to_tangent(s2, vec3(1, 0, 0), vec3(5, 1, 2)) - vec3(0, 1, 2)).norm() == 0);

  const ManifoldSpec r4 = ManifoldSpec::euclidean(4);
  Rng rng(4);
  const Vector raw = rng.normal_vector(4);
  CHECK((project_to_tangent(r4, Vector::Zero(4), raw) - raw).norm() == 0);

  const ManifoldSpec spd2 = ManifoldSpec::spd(2);
  const Vector sym = project_to_tangent(spd2, spd_flat(1, 0, 0, 1), spd_flat(1, 2, 0, 1));
  CHECK((sym - spd_flat(1, 1, 1, 1)).norm() == 0);
}

TEST_CASE("inner products") {
  const ManifoldSpec s2 = ManifoldSpec::sphere(3);
  CHECK(inner(s2, vec3(1, 0, 0), vec3(0, 1, 0), vec3(0, 0, 1)) == 0.0);

  const ManifoldSpec r2 = ManifoldSpec::euclidean(2);
  CHECK(inner(r2, vec2(0, 0), vec2(1, 2), vec2(3, 4)) == doctest::Approx(11.0));

  const ManifoldSpec spd2 = ManifoldSpec::spd(2);
  const Vector identity = spd_flat(1, 0, 0, 1);
  const Vector u = spd_flat(1, 0, 0, 0);
  CHECK(inner(spd2, identity, u, u) == doctest::Approx(1.0).epsilon(1e-12));

  // Trace oracle at a non-identity base point.
  Rng rng(5);
  const Vector base = random_point(spd2, rng);
  const Vector v1 = random_tangent(spd2, base, rng);
  const Vector v2 = random_tangent(spd2, base, rng);
  Matrix sigma(2, 2), m1(2, 2), m2(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      sigma(i, j) = base[2 * i + j];
      m1(i, j) = v1[2 * i + j];
      m2(i, j) = v2[2 * i + j];
    }
  const Matrix inv = sigma.inverse();
  CHECK(inner(spd2, base, v1, v2) ==
        doctest::Approx((inv * m1 * inv * m2).trace()).epsilon(1e-9));
}

TEST_CASE("precondition violations raise") {
  const ManifoldSpec s2 = ManifoldSpec::sphere(3);
  CHECK_THROWS_AS(exp_map(s2, vec3(1, 0, 0), vec3(1, 1, 0)), ManifoldError);
  CHECK_THROWS_AS(log_map(s2, vec3(1, 0, 0), vec3(-1, 0, 0)), CutLocusError);
}

TEST_CASE("exp/log round trip across the manifold zoo") {
  Rng rng(6);
  for (const auto& spec : all_manifolds()) {
    const bool has_sphere = spec.to_string().find('S') != std::string::npos &&
                            spec.to_string().find("SPD") == std::string::npos;
    for (int k = 0; k < 100; ++k) {
      const Vector x = random_point(spec, rng);
      Vector v = random_tangent(spec, x, rng);
      const Scalar cap = has_sphere ? M_PI - 0.1 : 1.0;
      const Scalar n = norm(spec, x, v);
      if (n > std::min(cap, Scalar(1))) v *= std::min(cap, Scalar(1)) / n;
      const Vector y = exp_map(spec, x, v);
      CHECK(is_on_manifold(spec, y, 1e-9));
      CHECK((log_map(spec, x, y) - v).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(std::abs(distance(spec, x, y) - norm(spec, x, v)) < 1e-8);
    }
  }
}

TEST_CASE("sphere exp respects the cut-locus bound") {
  const ManifoldSpec s3 = ManifoldSpec::sphere(4);
  Rng rng(7);
  const Vector x = random_point(s3, rng);
  Vector v = random_tangent(s3, x, rng);
  v *= (M_PI - 1e-3) / v.norm();
  const Vector y = exp_map(s3, x, v);
  CHECK(distance(s3, x, y) == doctest::Approx(M_PI - 1e-3).epsilon(1e-9));
}

TEST_CASE("manifold spec grammar") {
  for (const std::string s :
       {"R1", "R7", "S1", "S2", "S3", "SPD2", "SPD5", "R3xS3xR1", "SPD2xS2", "R2xR2xR2"}) {
    CHECK(ManifoldSpec::parse(s).to_string() == s);
  }
  CHECK(ManifoldSpec::parse("S2").ambient_dim() == 3);
  CHECK(ManifoldSpec::parse("SPD3").ambient_dim() == 9);
  CHECK(ManifoldSpec::parse("R3xS3xR1").ambient_dim() == 8);
  CHECK(ManifoldSpec::parse("S2").intrinsic_dim() == 2);
  CHECK(ManifoldSpec::parse("SPD3").intrinsic_dim() == 6);

  CHECK_THROWS_AS(ManifoldSpec::parse("S"), ConfigError);
  CHECK_THROWS_AS(ManifoldSpec::parse(""), ConfigError);
  CHECK_THROWS_AS(ManifoldSpec::parse("Q3"), ConfigError);
  CHECK_THROWS_AS(ManifoldSpec::parse("R3x"), ConfigError);
  CHECK_THROWS_AS(ManifoldSpec::parse("R0"), ConfigError);
  CHECK_THROWS_AS(ManifoldSpec::parse("S0"), ConfigError);
  CHECK_THROWS_AS(ManifoldSpec::parse("SPD1"), ConfigError);
}

TEST_CASE("product manifold factorizes") {
  const ManifoldSpec prod = ManifoldSpec::parse("R3xS3xR1");
  Rng rng(8);
  const Vector x = random_point(prod, rng);
  const Vector y = random_point(prod, rng);
  Scalar sum_sq = 0;
  for (const auto& [leaf, off] : prod.leaves()) {
    const Scalar d = distance(leaf, x.segment(off, leaf.ambient_dim()),
                              y.segment(off, leaf.ambient_dim()));
    sum_sq += d * d;
  }
  CHECK(distance(prod, x, y) == doctest::Approx(std::sqrt(sum_sq)).epsilon(1e-12));
}
