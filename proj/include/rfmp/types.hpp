#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace rfmp {

// 64-bit floating point throughout; tolerances in the test suites assume it.
using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Violated manifold invariant or operation precondition.
struct ManifoldError : std::runtime_error {
  explicit ManifoldError(const std::string& what) : std::runtime_error(what) {}
};

/// Logarithmic map queried at (or numerically too close to) the cut locus.
struct CutLocusError : ManifoldError {
  explicit CutLocusError(const std::string& what) : ManifoldError(what) {}
};

/// Invalid or inconsistent configuration. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem / serialization failure. CLI maps this to exit code 3.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values encountered while training or integrating. Exit code 4.
struct DivergedError : std::runtime_error {
  explicit DivergedError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rfmp
