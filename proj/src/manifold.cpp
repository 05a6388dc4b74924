#include "rfmp/manifold.hpp"

#include <Eigen/Eigenvalues>
#include <cctype>
#include <cmath>
#include <sstream>

#include "rfmp/rng.hpp"

namespace rfmp {

namespace hooks {
Mutation mutation = Mutation::None;
}

namespace {

constexpr Scalar kPointTol = 1e-9;
constexpr Scalar kSpdEigFloor = 1e-8;
// Cut-locus guard: log is rejected once <x,y> drops below -1 + this slack.
constexpr Scalar kAntipodalTol = 1e-12;

Matrix as_matrix(const Vector& flat, int n) {
  using RowMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(flat.data(), n, n);
}

Vector as_flat(const Matrix& m) {
  const int n = static_cast<int>(m.rows());
  Vector flat(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) flat[i * n + j] = m(i, j);
  return flat;
}

Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// f applied to the eigenvalues of a symmetric matrix.
template <typename F>
Matrix sym_apply(const Matrix& m, F f) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  Vector ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) ev[i] = f(ev[i]);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Matrix sym_sqrt(const Matrix& m) {
  return sym_apply(m, [](Scalar x) { return std::sqrt(std::max(x, Scalar(0))); });
}
Matrix sym_inv_sqrt(const Matrix& m) {
  return sym_apply(m, [](Scalar x) { return 1.0 / std::sqrt(std::max(x, kSpdEigFloor)); });
}
Matrix sym_log(const Matrix& m) {
  return sym_apply(m, [](Scalar x) { return std::log(std::max(x, kSpdEigFloor)); });
}
Matrix sym_exp(const Matrix& m) {
  return sym_apply(m, [](Scalar x) { return std::exp(x); });
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ManifoldError(what);
}

}  // namespace

// ---------------------------------------------------------------------------
// ManifoldSpec
// ---------------------------------------------------------------------------

ManifoldSpec ManifoldSpec::euclidean(int dim) {
  require(dim >= 1, "Euclidean dimension must be >= 1");
  return ManifoldSpec(Kind::Euclidean, dim);
}

ManifoldSpec ManifoldSpec::sphere(int ambient_dim) {
  require(ambient_dim >= 2, "sphere ambient dimension must be >= 2");
  return ManifoldSpec(Kind::Sphere, ambient_dim);
}

ManifoldSpec ManifoldSpec::spd(int matrix_order) {
  require(matrix_order >= 2, "SPD matrix order must be >= 2");
  return ManifoldSpec(Kind::Spd, matrix_order);
}

ManifoldSpec ManifoldSpec::product(std::vector<ManifoldSpec> factors) {
  require(!factors.empty(), "product manifold needs at least one factor");
  if (factors.size() == 1) return factors.front();
  return ManifoldSpec(std::move(factors));
}

ManifoldSpec ManifoldSpec::power(const ManifoldSpec& factor, int n) {
  require(n >= 1, "power exponent must be >= 1");
  if (n == 1) return factor;
  return ManifoldSpec(std::vector<ManifoldSpec>(n, factor));
}

int ManifoldSpec::ambient_dim() const {
  switch (kind_) {
    case Kind::Euclidean: return param_;
    case Kind::Sphere: return param_;
    case Kind::Spd: return param_ * param_;
    case Kind::Product: {
      int d = 0;
      for (const auto& f : factors_) d += f.ambient_dim();
      return d;
    }
  }
  return 0;
}

int ManifoldSpec::intrinsic_dim() const {
  switch (kind_) {
    case Kind::Euclidean: return param_;
    case Kind::Sphere: return param_ - 1;
    case Kind::Spd: return param_ * (param_ + 1) / 2;
    case Kind::Product: {
      int d = 0;
      for (const auto& f : factors_) d += f.intrinsic_dim();
      return d;
    }
  }
  return 0;
}

bool ManifoldSpec::is_euclidean() const {
  if (kind_ == Kind::Euclidean) return true;
  if (kind_ != Kind::Product) return false;
  for (const auto& f : factors_)
    if (!f.is_euclidean()) return false;
  return true;
}

std::vector<std::pair<ManifoldSpec, int>> ManifoldSpec::leaves() const {
  std::vector<std::pair<ManifoldSpec, int>> out;
  int offset = 0;
  auto walk = [&out, &offset](const ManifoldSpec& s, auto&& self) -> void {
    if (s.kind() == Kind::Product) {
      for (const auto& f : s.factors()) self(f, self);
    } else {
      out.emplace_back(s, offset);
      offset += s.ambient_dim();
    }
  };
  walk(*this, walk);
  return out;
}

bool ManifoldSpec::operator==(const ManifoldSpec& other) const {
  if (kind_ != other.kind_ || param_ != other.param_) return false;
  if (factors_.size() != other.factors_.size()) return false;
  for (std::size_t i = 0; i < factors_.size(); ++i)
    if (!(factors_[i] == other.factors_[i])) return false;
  return true;
}

std::string ManifoldSpec::to_string() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Euclidean: os << "R" << param_; break;
    case Kind::Sphere: os << "S" << (param_ - 1); break;
    case Kind::Spd: os << "SPD" << param_; break;
    case Kind::Product:
      for (std::size_t i = 0; i < factors_.size(); ++i) {
        if (i > 0) os << "x";
        os << factors_[i].to_string();
      }
      break;
  }
  return os.str();
}

ManifoldSpec ManifoldSpec::parse(const std::string& text) {
  std::vector<ManifoldSpec> factors;
  std::size_t pos = 0;
  auto fail = [&text](const std::string& why) -> ManifoldSpec {
    throw ConfigError("invalid manifold string \"" + text + "\": " + why);
  };
  while (pos < text.size()) {
    std::size_t head = pos;
    while (head < text.size() && std::isalpha(static_cast<unsigned char>(text[head]))) ++head;
    const std::string tag = text.substr(pos, head - pos);
    std::size_t tail = head;
    while (tail < text.size() && std::isdigit(static_cast<unsigned char>(text[tail]))) ++tail;
    if (head == tail) return fail("expected a dimension after \"" + tag + "\"");
    const int value = std::stoi(text.substr(head, tail - head));
    try {
      if (tag == "R") {
        factors.push_back(euclidean(value));
      } else if (tag == "S") {
        if (value < 1) return fail("sphere dimension must be >= 1");
        factors.push_back(sphere(value + 1));
      } else if (tag == "SPD") {
        factors.push_back(spd(value));
      } else {
        return fail("unknown factor \"" + tag + "\"");
      }
    } catch (const ManifoldError& e) {
      return fail(e.what());
    }
    pos = tail;
    if (pos < text.size()) {
      if (text[pos] != 'x') return fail("expected 'x' between factors");
      ++pos;
      if (pos == text.size()) return fail("trailing 'x'");
    }
  }
  if (factors.empty()) throw ConfigError("invalid manifold string \"" + text + "\": empty");
  return product(std::move(factors));
}

// ---------------------------------------------------------------------------
// Invariant checks
// ---------------------------------------------------------------------------

bool is_on_manifold(const ManifoldSpec& spec, const Vector& x, Scalar tol) {
  if (x.size() != spec.ambient_dim() || !x.allFinite()) return false;
  switch (spec.kind()) {
    case ManifoldSpec::Kind::Euclidean:
      return true;
    case ManifoldSpec::Kind::Sphere:
      return std::abs(x.norm() - 1.0) <= tol;
    case ManifoldSpec::Kind::Spd: {
      const int n = spec.param();
      const Matrix m = as_matrix(x, n);
      if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol) return false;
      Eigen::SelfAdjointEigenSolver<Matrix> es(sym(m));
      return es.eigenvalues().minCoeff() > 0.0;
    }
    case ManifoldSpec::Kind::Product: {
      int off = 0;
      for (const auto& f : spec.factors()) {
        if (!is_on_manifold(f, x.segment(off, f.ambient_dim()), tol)) return false;
        off += f.ambient_dim();
      }
      return true;
    }
  }
  return false;
}

void check_point(const ManifoldSpec& spec, const Vector& x) {
  if (x.size() != spec.ambient_dim())
    throw ManifoldError("point has dimension " + std::to_string(x.size()) + ", expected " +
                        std::to_string(spec.ambient_dim()) + " for " + spec.to_string());
  if (!is_on_manifold(spec, x))
    throw ManifoldError("point violates " + spec.to_string() + " invariants");
}

void check_tangent(const ManifoldSpec& spec, const Vector& x, const Vector& v) {
  if (v.size() != spec.ambient_dim())
    throw ManifoldError("tangent has dimension " + std::to_string(v.size()) + ", expected " +
                        std::to_string(spec.ambient_dim()));
  if (!v.allFinite()) throw ManifoldError("tangent has non-finite entries");
  switch (spec.kind()) {
    case ManifoldSpec::Kind::Euclidean:
      return;
    case ManifoldSpec::Kind::Sphere:
      if (std::abs(x.dot(v)) > kPointTol * std::max(Scalar(1), v.norm()))
        throw ManifoldError("sphere tangent is not orthogonal to its base point");
      return;
    case ManifoldSpec::Kind::Spd: {
      const Matrix m = as_matrix(v, spec.param());
      if ((m - m.transpose()).cwiseAbs().maxCoeff() > kPointTol)
        throw ManifoldError("SPD tangent is not symmetric");
      return;
    }
    case ManifoldSpec::Kind::Product: {
      int off = 0;
      for (const auto& f : spec.factors()) {
        check_tangent(f, x.segment(off, f.ambient_dim()), v.segment(off, f.ambient_dim()));
        off += f.ambient_dim();
      }
      return;
    }
  }
}

// ---------------------------------------------------------------------------
// Per-factor kernels
// ---------------------------------------------------------------------------

namespace {

Vector sphere_exp(const Vector& x, const Vector& v) {
  const Scalar theta = v.norm();
  if (theta < 1e-300) return x;
  // cos(t) x + sinc(t) v, with the small-angle series for sinc.
  const Scalar sinc = theta < 1e-6 ? 1.0 - theta * theta / 6.0 : std::sin(theta) / theta;
  Scalar c = std::cos(theta);
  if (hooks::mutation == hooks::Mutation::SphereExpSignFlip) c = -c;
  Vector y = c * x + sinc * v;
  y /= y.norm();
  return y;
}

Vector sphere_log(const Vector& x, const Vector& y) {
  const Scalar c = std::clamp(x.dot(y), Scalar(-1), Scalar(1));
  if (c < -1.0 + kAntipodalTol)
    throw CutLocusError("logarithmic map undefined for antipodal sphere points");
  Vector p = y - c * x;  // component of y orthogonal to x
  const Scalar s = p.norm();
  const Scalar theta = std::atan2(s, c);
  if (s < 1e-300) return Vector::Zero(x.size());
  return (theta / s) * p;
}

Scalar sphere_distance(const Vector& x, const Vector& y) {
  const Scalar c = std::clamp(x.dot(y), Scalar(-1), Scalar(1));
  const Scalar s = (y - c * x).norm();
  return std::atan2(s, c);
}

// Affine-invariant SPD kernels: geodesics through congruence with the base.
Vector spd_exp(const Vector& x, const Vector& v, int n) {
  const Matrix sigma = sym(as_matrix(x, n));
  const Matrix s = sym_sqrt(sigma);
  const Matrix si = sym_inv_sqrt(sigma);
  const Matrix inner_mat = sym(si * sym(as_matrix(v, n)) * si);
  return as_flat(sym(s * sym_exp(inner_mat) * s));
}

Vector spd_log(const Vector& x, const Vector& y, int n) {
  const Matrix sigma = sym(as_matrix(x, n));
  const Matrix s = sym_sqrt(sigma);
  const Matrix si = sym_inv_sqrt(sigma);
  const Matrix inner_mat = sym(si * sym(as_matrix(y, n)) * si);
  return as_flat(sym(s * sym_log(inner_mat) * s));
}

Scalar spd_distance(const Vector& x, const Vector& y, int n) {
  const Matrix si = sym_inv_sqrt(sym(as_matrix(x, n)));
  const Matrix m = sym(si * sym(as_matrix(y, n)) * si);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  Scalar acc = 0;
  for (int i = 0; i < n; ++i) {
    const Scalar l = std::log(std::max(es.eigenvalues()[i], kSpdEigFloor));
    acc += l * l;
  }
  return std::sqrt(acc);
}

Scalar spd_inner(const Vector& x, const Vector& u, const Vector& v, int n) {
  const Matrix sigma = sym(as_matrix(x, n));
  const auto solver = sigma.ldlt();
  const Matrix a = solver.solve(sym(as_matrix(u, n)));
  const Matrix b = solver.solve(sym(as_matrix(v, n)));
  return (a * b).trace();
}

}  // namespace

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

Vector exp_map(const ManifoldSpec& spec, const Vector& x, const Vector& v) {
  check_tangent(spec, x, v);
  switch (spec.kind()) {
    case ManifoldSpec::Kind::Euclidean: return x + v;
    case ManifoldSpec::Kind::Sphere: return sphere_exp(x, v);
    case ManifoldSpec::Kind::Spd: return spd_exp(x, v, spec.param());
    case ManifoldSpec::Kind::Product: {
      Vector out(spec.ambient_dim());
      int off = 0;
      for (const auto& f : spec.factors()) {
        const int d = f.ambient_dim();
        out.segment(off, d) = exp_map(f, x.segment(off, d), v.segment(off, d));
        off += d;
      }
      return out;
    }
  }
  throw ManifoldError("unreachable");
}

Vector log_map(const ManifoldSpec& spec, const Vector& x, const Vector& y) {
  switch (spec.kind()) {
    case ManifoldSpec::Kind::Euclidean: return y - x;
    case ManifoldSpec::Kind::Sphere: return sphere_log(x, y);
    case ManifoldSpec::Kind::Spd: return spd_log(x, y, spec.param());
    case ManifoldSpec::Kind::Product: {
      Vector out(spec.ambient_dim());
      int off = 0;
      for (const auto& f : spec.factors()) {
        const int d = f.ambient_dim();
        out.segment(off, d) = log_map(f, x.segment(off, d), y.segment(off, d));
        off += d;
      }
      return out;
    }
  }
  throw ManifoldError("unreachable");
}

Scalar distance(const ManifoldSpec& spec, const Vector& x, const Vector& y) {
  switch (spec.kind()) {
    case ManifoldSpec::Kind::Euclidean: return (y - x).norm();
    case ManifoldSpec::Kind::Sphere: return sphere_distance(x, y);
    case ManifoldSpec::Kind::Spd: return spd_distance(x, y, spec.param());
    case ManifoldSpec::Kind::Product: {
      Scalar acc = 0;
      int off = 0;
      for (const auto& f : spec.factors()) {
        const int d = f.ambient_dim();
        const Scalar fd = distance(f, x.segment(off, d), y.segment(off, d));
        acc += fd * fd;
        off += d;
      }
      return std::sqrt(acc);
    }
  }
  throw ManifoldError("unreachable");
}

Vector project_to_manifold(const ManifoldSpec& spec, const Vector& raw) {
  if (raw.size() != spec.ambient_dim())
    throw ManifoldError("projection input has wrong ambient dimension");
  switch (spec.kind()) {
    case ManifoldSpec::Kind::Euclidean:
      return raw;
    case ManifoldSpec::Kind::Sphere: {
      const Scalar n = raw.norm();
      if (n < 1e-12) throw ManifoldError("cannot project the zero vector onto a sphere");
      return raw / n;
    }
    case ManifoldSpec::Kind::Spd: {
      const Matrix m = sym(as_matrix(raw, spec.param()));
      return as_flat(sym_apply(m, [](Scalar x) { return std::max(x, kSpdEigFloor); }));
    }
    case ManifoldSpec::Kind::Product: {
      Vector out(spec.ambient_dim());
      int off = 0;
      for (const auto& f : spec.factors()) {
        const int d = f.ambient_dim();
        out.segment(off, d) = project_to_manifold(f, raw.segment(off, d));
        off += d;
      }
      return out;
    }
  }
  throw ManifoldError("unreachable");
}

Vector project_to_tangent(const ManifoldSpec& spec, const Vector& x, const Vector& raw) {
  switch (spec.kind()) {
    case ManifoldSpec::Kind::Euclidean:
      return raw;
    case ManifoldSpec::Kind::Sphere:
      return raw - x.dot(raw) * x;
    case ManifoldSpec::Kind::Spd:
      return as_flat(sym(as_matrix(raw, spec.param())));
    case ManifoldSpec::Kind::Product: {
      Vector out(spec.ambient_dim());
      int off = 0;
      for (const auto& f : spec.factors()) {
        const int d = f.ambient_dim();
        out.segment(off, d) = project_to_tangent(f, x.segment(off, d), raw.segment(off, d));
        off += d;
      }
      return out;
    }
  }
  throw ManifoldError("unreachable");
}

Scalar inner(const ManifoldSpec& spec, const Vector& x, const Vector& u, const Vector& v) {
  switch (spec.kind()) {
    case ManifoldSpec::Kind::Euclidean:
    case ManifoldSpec::Kind::Sphere:
      return u.dot(v);
    case ManifoldSpec::Kind::Spd:
      return spd_inner(x, u, v, spec.param());
    case ManifoldSpec::Kind::Product: {
      Scalar acc = 0;
      int off = 0;
      for (const auto& f : spec.factors()) {
        const int d = f.ambient_dim();
        acc += inner(f, x.segment(off, d), u.segment(off, d), v.segment(off, d));
        off += d;
      }
      return acc;
    }
  }
  throw ManifoldError("unreachable");
}

Scalar norm(const ManifoldSpec& spec, const Vector& x, const Vector& v) {
  return std::sqrt(std::max(Scalar(0), inner(spec, x, v, v)));
}

Vector metric_apply(const ManifoldSpec& spec, const Vector& x, const Vector& v) {
  switch (spec.kind()) {
    case ManifoldSpec::Kind::Euclidean:
    case ManifoldSpec::Kind::Sphere:
      return v;
    case ManifoldSpec::Kind::Spd: {
      const int n = spec.param();
      const Matrix sigma_inv =
          sym(as_matrix(x, n)).ldlt().solve(Matrix::Identity(n, n));
      return as_flat(sym(sigma_inv * sym(as_matrix(v, n)) * sigma_inv));
    }
    case ManifoldSpec::Kind::Product: {
      Vector out(spec.ambient_dim());
      int off = 0;
      for (const auto& f : spec.factors()) {
        const int d = f.ambient_dim();
        out.segment(off, d) = metric_apply(f, x.segment(off, d), v.segment(off, d));
        off += d;
      }
      return out;
    }
  }
  throw ManifoldError("unreachable");
}

Vector random_point(const ManifoldSpec& spec, Rng& rng) {
  switch (spec.kind()) {
    case ManifoldSpec::Kind::Euclidean:
      return rng.normal_vector(spec.param());
    case ManifoldSpec::Kind::Sphere: {
      Vector v = rng.normal_vector(spec.param());
      while (v.norm() < 1e-8) v = rng.normal_vector(spec.param());
      return v / v.norm();
    }
    case ManifoldSpec::Kind::Spd: {
      const int n = spec.param();
      Vector identity = as_flat(Matrix::Identity(n, n));
      Vector tangent = project_to_tangent(spec, identity, rng.normal_vector(n * n));
      return exp_map(spec, identity, tangent);
    }
    case ManifoldSpec::Kind::Product: {
      Vector out(spec.ambient_dim());
      int off = 0;
      for (const auto& f : spec.factors()) {
        out.segment(off, f.ambient_dim()) = random_point(f, rng);
        off += f.ambient_dim();
      }
      return out;
    }
  }
  throw ManifoldError("unreachable");
}

Vector random_tangent(const ManifoldSpec& spec, const Vector& x, Rng& rng) {
  return project_to_tangent(spec, x, rng.normal_vector(spec.ambient_dim()));
}

}  // namespace rfmp
