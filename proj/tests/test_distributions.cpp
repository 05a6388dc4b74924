#include <cmath>

#include "doctest.h"
#include "rfmp/distributions.hpp"

using namespace rfmp;

namespace {

PriorSpec wrapped_sphere_prior(Scalar scale) {
  PriorSpec prior;
  prior.manifold = ManifoldSpec::sphere(3);
  PriorFactor f;
  f.kind = PriorFactor::Kind::WrappedGaussian;
  f.mean = (Vector(3) << 0, 0, 1).finished();
  f.scale = scale;
  prior.factors = {f};
  return prior;
}

}  // namespace

TEST_CASE("wrapped Gaussian degenerates to its mean at zero scale") {
  Rng rng(1);
  const auto samples = sample_prior(wrapped_sphere_prior(0.0), 3, rng);
  REQUIRE(samples.size() == 3);
  for (const auto& p : samples)
    CHECK((p - (Vector(3) << 0, 0, 1).finished()).norm() < 1e-15);
}

TEST_CASE("sphere uniform mean vanishes") {
  PriorSpec prior = PriorSpec::default_for(ManifoldSpec::sphere(3));
  Rng rng(2);
  Vector mean = Vector::Zero(3);
  const int n = 10000;
  for (const auto& p : sample_prior(prior, n, rng)) mean += p;
  mean /= n;
  // Monte-Carlo bound: component s.e. is 1/sqrt(3n).
  CHECK(mean.norm() <= 0.05);
}

TEST_CASE("euclidean Gaussian matches its mean") {
  PriorSpec prior;
  prior.manifold = ManifoldSpec::euclidean(2);
  PriorFactor f;
  f.kind = PriorFactor::Kind::EuclideanGaussian;
  f.mean = (Vector(2) << 1, 1).finished();
  f.scale = 1.0;
  prior.factors = {f};
  Rng rng(3);
  Vector mean = Vector::Zero(2);
  const int n = 10000;
  for (const auto& p : sample_prior(prior, n, rng)) mean += p;
  mean /= n;
  CHECK(std::abs(mean[0] - 1.0) <= 0.05);
  CHECK(std::abs(mean[1] - 1.0) <= 0.05);
}

TEST_CASE("wrapped Gaussian stays on-manifold and concentrates at the mean") {
  const auto prior = wrapped_sphere_prior(0.4);
  Rng rng(4);
  const int n = 2000;
  Vector mean = Vector::Zero(3);
  for (const auto& p : sample_prior(prior, n, rng)) {
    CHECK(std::abs(p.norm() - 1.0) <= 1e-9);
    mean += p;
  }
  mean /= n;
  // Mean direction within 3 standard errors (scale / sqrt(n) per tangent axis).
  const Scalar angle = std::acos(std::clamp(mean.normalized()[2], -1.0, 1.0));
  CHECK(angle <= 3 * 0.4 / std::sqrt(static_cast<Scalar>(n)));
}

TEST_CASE("chunk prior tiles one auxiliary draw") {
  PriorSpec prior = PriorSpec::default_for(ManifoldSpec::euclidean(2));
  Rng rng(5);
  const Vector chunk = sample_chunk_prior(prior, 16, rng);
  REQUIRE(chunk.size() == 32);
  for (int i = 1; i < 16; ++i)
    CHECK((chunk.segment(2 * i, 2) - chunk.head(2)).norm() == 0);

  const Vector single = sample_chunk_prior(prior, 1, rng);
  CHECK(single.size() == 2);

  PriorSpec sphere_prior = PriorSpec::default_for(ManifoldSpec::sphere(3));
  const Vector sphere_chunk = sample_chunk_prior(sphere_prior, 5, rng);
  for (int i = 0; i < 5; ++i)
    CHECK(std::abs(sphere_chunk.segment(3 * i, 3).norm() - 1.0) <= 1e-9);
}

TEST_CASE("identical seeds give bit-identical streams") {
  PriorSpec prior = PriorSpec::default_for(ManifoldSpec::parse("R3xS3xR1"));
  Rng a(42), b(42);
  for (int k = 0; k < 100; ++k) {
    const Vector pa = sample_prior_one(prior, a);
    const Vector pb = sample_prior_one(prior, b);
    CHECK((pa.array() == pb.array()).all());
  }
}

TEST_CASE("prior validation names mismatches") {
  PriorSpec prior = PriorSpec::default_for(ManifoldSpec::sphere(3));
  prior.factors.push_back(prior.factors.front());
  CHECK_THROWS_AS(prior.validate(), ConfigError);

  PriorSpec wrong;
  wrong.manifold = ManifoldSpec::sphere(3);
  PriorFactor f;
  f.kind = PriorFactor::Kind::EuclideanGaussian;
  f.mean = Vector::Zero(3);
  wrong.factors = {f};
  CHECK_THROWS_AS(wrong.validate(), ConfigError);

  PriorSpec off_manifold = wrapped_sphere_prior(0.2);
  off_manifold.factors[0].mean = (Vector(3) << 0, 0, 2).finished();
  CHECK_THROWS_AS(off_manifold.validate(), ConfigError);
}

TEST_CASE("sphere uniform covariance is isotropic") {
  PriorSpec prior = PriorSpec::default_for(ManifoldSpec::sphere(3));
  Rng rng(6);
  Matrix cov = Matrix::Zero(3, 3);
  const int n = 100000;
  for (const auto& p : sample_prior(prior, n, rng)) cov += p * p.transpose();
  cov /= n;
  CHECK((cov - Matrix::Identity(3, 3) / 3.0).cwiseAbs().maxCoeff() <= 0.02);
}
