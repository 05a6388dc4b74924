#include "rfmp/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rfmp {

namespace {

constexpr Scalar kBound = 1.5;

Vector clamp_box(Vector p, Scalar bound) {
  for (int i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i], -bound, bound);
  return p;
}

std::string format_scalar(Scalar v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Arc-length resampling of a polyline into `count` evenly spaced points.
std::vector<Vector> resample_polyline(const std::vector<Vector>& waypoints, int count) {
  std::vector<Scalar> cumulative{0.0};
  for (std::size_t i = 1; i < waypoints.size(); ++i)
    cumulative.push_back(cumulative.back() + (waypoints[i] - waypoints[i - 1]).norm());
  const Scalar total = cumulative.back();
  std::vector<Vector> points;
  points.reserve(count);
  for (int k = 0; k < count; ++k) {
    const Scalar target = total * k / (count - 1);
    std::size_t seg = 1;
    while (seg + 1 < cumulative.size() && cumulative[seg] < target) ++seg;
    const Scalar span = cumulative[seg] - cumulative[seg - 1];
    const Scalar w = span > 0 ? (target - cumulative[seg - 1]) / span : 0.0;
    points.push_back(waypoints[seg - 1] + w * (waypoints[seg] - waypoints[seg - 1]));
  }
  return points;
}

std::vector<Vector> base_trace(StrokeShape shape, int length, bool second_mode) {
  std::vector<Vector> trace;
  switch (shape) {
    case StrokeShape::L: {
      std::vector<Vector> waypoints;
      waypoints.push_back((Vector(2) << -0.8, 1.0).finished());
      waypoints.push_back((Vector(2) << -0.8, -1.0).finished());
      waypoints.push_back((Vector(2) << 1.0, -1.0).finished());
      trace = resample_polyline(waypoints, length);
      break;
    }
    case StrokeShape::S: {
      trace.reserve(length);
      for (int k = 0; k < length; ++k) {
        const Scalar u = Scalar(k) / (length - 1);
        const Scalar y = 1.0 - 2.0 * u;
        trace.push_back((Vector(2) << -0.8 * std::sin(M_PI * y), y).finished());
      }
      break;
    }
    case StrokeShape::TwoMode: {
      // Quadratic arc from (-1, 0) to (1, 0) bulging up or down; the two
      // families are separate homotopy classes around the origin.
      const Scalar control_y = second_mode ? -1.8 : 1.8;
      trace.reserve(length);
      for (int k = 0; k < length; ++k) {
        const Scalar u = Scalar(k) / (length - 1);
        const Scalar x = -1.0 * (1 - u) * (1 - u) + 1.0 * u * u;
        const Scalar y = 2.0 * (1 - u) * u * control_y;
        trace.push_back((Vector(2) << x, y).finished());
      }
      break;
    }
  }
  return trace;
}

}  // namespace

StrokeShape stroke_shape_from_string(const std::string& name) {
  if (name == "L") return StrokeShape::L;
  if (name == "S") return StrokeShape::S;
  if (name == "TwoMode" || name == "two_mode") return StrokeShape::TwoMode;
  throw ConfigError("unknown stroke shape \"" + name + "\" (expected L, S, or TwoMode)");
}

std::string to_string(StrokeShape shape) {
  switch (shape) {
    case StrokeShape::L: return "L";
    case StrokeShape::S: return "S";
    case StrokeShape::TwoMode: return "TwoMode";
  }
  return "L";
}

Dataset gen_strokes(StrokeShape shape, int n_demos, Scalar noise, std::uint64_t seed,
                    int length) {
  if (n_demos < 1) throw ConfigError("task.n_demos must be >= 1");
  if (length < 8) throw ConfigError("task.length must be >= 8");
  Dataset dataset;
  dataset.action_manifold = ManifoldSpec::euclidean(2);
  Rng rng(seed);
  for (int d = 0; d < n_demos; ++d) {
    const auto trace = base_trace(shape, length, shape == StrokeShape::TwoMode && d % 2 == 1);
    Demonstration demo;
    demo.obs.reserve(length);
    demo.actions.reserve(length);
    for (const auto& p : trace) {
      Vector q = p;
      if (noise > 0) q += noise * rng.normal_vector(2);
      q = clamp_box(q, kBound);
      demo.obs.push_back(q);
      demo.actions.push_back(q);
    }
    dataset.demos.push_back(std::move(demo));
  }
  return dataset;
}

Vector stereographic_to_sphere(const Vector& p, Scalar /*bound*/) {
  if (p.size() != 2) throw ConfigError("stereographic input must be planar");
  const Scalar r2 = p.squaredNorm();
  Vector q(3);
  q << 2.0 * p[0], 2.0 * p[1], 1.0 - r2;
  q /= 1.0 + r2;
  return q / q.norm();
}

Vector sphere_to_stereographic(const Vector& q) {
  if (q.size() != 3) throw ConfigError("stereographic inverse input must be on S2");
  if (q[2] <= -1.0 + 1e-12)
    throw ManifoldError("south pole has no stereographic preimage");
  Vector p(2);
  p << q[0] / (1.0 + q[2]), q[1] / (1.0 + q[2]);
  return p;
}

Dataset project_dataset_to_sphere(const Dataset& planar) {
  Dataset out;
  out.action_manifold = ManifoldSpec::sphere(3);
  for (const auto& demo : planar.demos) {
    Demonstration mapped;
    for (const auto& o : demo.obs) mapped.obs.push_back(stereographic_to_sphere(o));
    for (const auto& a : demo.actions) mapped.actions.push_back(stereographic_to_sphere(a));
    out.demos.push_back(std::move(mapped));
  }
  return out;
}

namespace {

Vector spd_curve_point(Scalar u) {
  const Scalar theta = 0.8 * u;
  const Scalar a = std::exp(0.8 * std::sin(M_PI * u));
  const Scalar b = std::exp(0.4 * std::cos(M_PI * u) - 0.2);
  Matrix rot(2, 2);
  rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  Matrix sigma = rot * Eigen::Vector2d(a, b).asDiagonal() * rot.transpose();
  Vector flat(4);
  flat << sigma(0, 0), 0.5 * (sigma(0, 1) + sigma(1, 0)), 0.5 * (sigma(0, 1) + sigma(1, 0)),
      sigma(1, 1);
  return flat;
}

}  // namespace

std::vector<Vector> gen_spd_dataset(int n, std::uint64_t seed, Scalar jitter) {
  if (n < 1) throw ConfigError("task.n must be >= 1");
  const ManifoldSpec spd2 = ManifoldSpec::spd(2);
  Rng rng(seed);
  std::vector<Vector> points;
  points.reserve(n);
  for (int k = 0; k < n; ++k) {
    const Scalar u = n == 1 ? 0.0 : Scalar(k) / (n - 1);
    Vector p = spd_curve_point(u);
    if (jitter > 0) {
      const Vector tangent = jitter * random_tangent(spd2, p, rng);
      p = exp_map(spd2, p, tangent);
    }
    points.push_back(std::move(p));
  }
  return points;
}

Dataset gen_spd_demos(int n_demos, int length, Scalar jitter, std::uint64_t seed) {
  if (n_demos < 1) throw ConfigError("task.n_demos must be >= 1");
  Dataset dataset;
  dataset.action_manifold = ManifoldSpec::spd(2);
  Rng seeder(seed);
  for (int d = 0; d < n_demos; ++d) {
    const auto points = gen_spd_dataset(length, seeder.next_u64(), jitter);
    Demonstration demo;
    demo.obs = points;
    demo.actions = points;
    dataset.demos.push_back(std::move(demo));
  }
  return dataset;
}

namespace {

Vector concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

Vector reach_random_position(const ManifoldSpec& manifold, Rng& rng) {
  if (manifold.kind() == ManifoldSpec::Kind::Euclidean) {
    Vector p(2);
    p << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
    return p;
  }
  // Sphere cap around the north pole, matching the stereographic working area.
  Vector planar(2);
  planar << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
  return stereographic_to_sphere(planar);
}

// One geodesic step toward the goal, capped at `speed`.
Vector reach_step_toward(const ManifoldSpec& manifold, const Vector& from, const Vector& goal,
                         Scalar speed) {
  const Vector direction = log_map(manifold, from, goal);
  const Scalar dist = norm(manifold, from, direction);
  if (dist <= speed || dist < 1e-12) return goal;
  return exp_map(manifold, from, (speed / dist) * direction);
}

}  // namespace

Dataset gen_reach_demos(const ManifoldSpec& manifold, int n_demos, Scalar speed,
                        std::uint64_t seed, int length) {
  if (n_demos < 1) throw ConfigError("task.n_demos must be >= 1");
  if (!(speed > 0)) throw ConfigError("task.speed must be > 0");
  const bool planar = manifold.kind() == ManifoldSpec::Kind::Euclidean;
  if (!planar &&
      !(manifold.kind() == ManifoldSpec::Kind::Sphere && manifold.ambient_dim() == 3))
    throw ConfigError("reach task supports R2 or S2");
  Dataset dataset;
  dataset.action_manifold = manifold;
  Rng rng(seed);
  for (int d = 0; d < n_demos; ++d) {
    const Vector start = reach_random_position(manifold, rng);
    const Vector goal = reach_random_position(manifold, rng);
    Demonstration demo;
    Vector agent = start;
    // Hold for one step so stationary-history windows appear in training,
    // mirroring the padded history of the first closed-loop policy call.
    demo.obs.push_back(concat(agent, goal));
    demo.actions.push_back(agent);
    for (int s = 1; s < length; ++s) {
      demo.obs.push_back(concat(agent, goal));
      agent = reach_step_toward(manifold, agent, goal, speed);
      demo.actions.push_back(agent);
    }
    dataset.demos.push_back(std::move(demo));
  }
  return dataset;
}

ReachEnv::ReachEnv(const ManifoldSpec& manifold, Scalar tolerance, int max_steps,
                   std::uint64_t seed)
    : manifold_(manifold), tolerance_(tolerance), max_steps_(max_steps), rng_(seed) {
  if (!(tolerance > 0)) throw ConfigError("task.tolerance must be > 0");
  if (max_steps < 1) throw ConfigError("task.max_steps must be >= 1");
}

Vector ReachEnv::observation() const { return concat(agent_, goal_); }

Vector ReachEnv::random_position() { return reach_random_position(manifold_, rng_); }

Vector ReachEnv::reset() {
  agent_ = random_position();
  goal_ = random_position();
  initial_distance_ = distance(manifold_, agent_, goal_);
  steps_ = 0;
  done_ = false;
  success_ = false;
  return observation();
}

Scalar ReachEnv::score() const {
  if (initial_distance_ < 1e-12) return 1.0;
  const Scalar ratio = distance(manifold_, agent_, goal_) / initial_distance_;
  return 1.0 - std::clamp(ratio, Scalar(0), Scalar(1));
}

ReachEnv::StepResult ReachEnv::step(const Vector& action) {
  if (done_) throw std::logic_error("reach environment stepped after episode end");
  if (action.size() != manifold_.ambient_dim())
    throw ConfigError("reach action has wrong dimension");
  if (manifold_.kind() == ManifoldSpec::Kind::Euclidean) {
    agent_ = clamp_box(action, kBound);
  } else {
    agent_ = project_to_manifold(manifold_, action);
  }
  steps_ += 1;
  const Scalar dist = distance(manifold_, agent_, goal_);
  if (dist <= tolerance_) {
    done_ = true;
    success_ = true;
  } else if (steps_ >= max_steps_) {
    done_ = true;
  }
  return {observation(), done_, score()};
}

// ---------------------------------------------------------------------------
// Dataset container
// ---------------------------------------------------------------------------

void save_dataset(const std::string& path, const Dataset& dataset,
                  const nlohmann::json& header_extras) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open dataset for writing: " + path);
  nlohmann::json header = header_extras;
  header["manifold"] = dataset.action_manifold.to_string();
  header["n_demos"] = dataset.demos.size();
  header["obs_dim"] = dataset.obs_dim();
  header["action_dim"] = dataset.action_dim();
  os << header.dump() << "\n";
  os << "demo_id,step";
  for (int i = 0; i < dataset.obs_dim(); ++i) os << ",obs_" << i;
  for (int i = 0; i < dataset.action_dim(); ++i) os << ",act_" << i;
  os << "\n";
  for (std::size_t d = 0; d < dataset.demos.size(); ++d) {
    const auto& demo = dataset.demos[d];
    for (std::size_t s = 0; s < demo.actions.size(); ++s) {
      os << d << "," << s;
      for (int i = 0; i < demo.obs[s].size(); ++i) os << "," << format_scalar(demo.obs[s][i]);
      for (int i = 0; i < demo.actions[s].size(); ++i)
        os << "," << format_scalar(demo.actions[s][i]);
      os << "\n";
    }
  }
  if (!os) throw IoError("failed writing dataset: " + path);
}

LoadedDataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(is, line)) throw IoError("dataset is empty: " + path);
  LoadedDataset out;
  try {
    out.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("dataset header is not valid JSON: " + std::string(e.what()));
  }
  if (!out.header.contains("manifold"))
    throw IoError("dataset header lacks a manifold field");
  out.dataset.action_manifold = ManifoldSpec::parse(out.header["manifold"].get<std::string>());
  const int od = out.header.value("obs_dim", 0);
  const int ad = out.dataset.action_manifold.ambient_dim();
  if (!std::getline(is, line)) throw IoError("dataset lacks a CSV header: " + path);
  long expected_cols = 2 + od + ad;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<Scalar> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
    if (static_cast<long>(cells.size()) != expected_cols)
      throw IoError("dataset row has " + std::to_string(cells.size()) + " columns, expected " +
                    std::to_string(expected_cols));
    const auto demo_id = static_cast<std::size_t>(cells[0]);
    while (out.dataset.demos.size() <= demo_id) out.dataset.demos.emplace_back();
    Vector obs(od), act(ad);
    for (int i = 0; i < od; ++i) obs[i] = cells[2 + i];
    for (int i = 0; i < ad; ++i) act[i] = cells[2 + od + i];
    out.dataset.demos[demo_id].obs.push_back(std::move(obs));
    out.dataset.demos[demo_id].actions.push_back(std::move(act));
  }
  return out;
}

}  // namespace rfmp
