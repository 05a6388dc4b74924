#pragma once

#include <string>
#include <vector>

#include "rfmp/manifold.hpp"
#include "rfmp/rng.hpp"
#include "rfmp/training.hpp"

#include "json.hpp"

namespace rfmp {

enum class StrokeShape { L, S, TwoMode };
StrokeShape stroke_shape_from_string(const std::string& name);
std::string to_string(StrokeShape shape);

/// Planar stroke demonstrations: noisy traces of a letter path, coordinates
/// kept inside [-1.5, 1.5]. Observations equal the trace positions, so a
/// policy conditioned on the two most recent points continues the stroke.
/// TwoMode yields two distinct path families between fixed endpoints.
Dataset gen_strokes(StrokeShape shape, int n_demos, Scalar noise, std::uint64_t seed,
                    int length = 60);

/// Inverse stereographic projection centred on the north pole:
/// (u, v) -> (2u, 2v, 1 - r^2) / (1 + r^2). `bound` documents the intended
/// planar working range; the map itself is global.
Vector stereographic_to_sphere(const Vector& p, Scalar bound = 1.5);
Vector sphere_to_stereographic(const Vector& q);

/// Pushes every observation and action of a planar dataset through the
/// stereographic map, yielding demonstrations on the 2-sphere.
Dataset project_dataset_to_sphere(const Dataset& planar);

/// Points along a smooth one-parameter curve on the 2x2 SPD cone with
/// tangent-space (wrapped Gaussian) jitter. jitter = 0 returns the curve
/// samples exactly.
std::vector<Vector> gen_spd_dataset(int n, std::uint64_t seed, Scalar jitter = 0.0);

/// SPD toy demonstrations: n_demos traversals of the generating curve, each
/// with its own jitter stream; observations equal the trace points.
Dataset gen_spd_demos(int n_demos, int length, Scalar jitter, std::uint64_t seed);

/// Scripted point-reach demonstrations on R2 or S2: the expert holds still
/// for one step, then moves toward the goal by at most `speed` per step and
/// stays there. Observations are [agent, goal].
Dataset gen_reach_demos(const ManifoldSpec& manifold, int n_demos, Scalar speed,
                        std::uint64_t seed, int length = 40);

/// Closed-loop point-reach environment (planar box or sphere cap). The agent
/// teleports to the commanded position after clipping / manifold projection;
/// an episode ends on reaching the goal tolerance or the step limit.
class ReachEnv {
 public:
  ReachEnv(const ManifoldSpec& manifold, Scalar tolerance, int max_steps, std::uint64_t seed);

  struct StepResult {
    Vector observation;
    bool done = false;
    Scalar score = 0.0;  // 1 - clamp(distance / initial distance, 0, 1)
  };

  /// Resets to seeded random start/goal and returns the first observation.
  Vector reset();
  StepResult step(const Vector& action);

  bool done() const { return done_; }
  bool success() const { return success_; }
  Scalar score() const;
  const ManifoldSpec& manifold() const { return manifold_; }
  const Vector& agent() const { return agent_; }
  const Vector& goal() const { return goal_; }

 private:
  Vector observation() const;
  Vector random_position();

  ManifoldSpec manifold_;
  Scalar tolerance_;
  int max_steps_;
  Rng rng_;
  Vector agent_, goal_;
  Scalar initial_distance_ = 0.0;
  int steps_ = 0;
  bool done_ = true;
  bool success_ = false;
};

/// Dataset container format: one JSON header line (manifold, task metadata,
/// seed, counts) followed by a CSV body `demo_id, step, obs..., action...`.
void save_dataset(const std::string& path, const Dataset& dataset,
                  const nlohmann::json& header_extras);
struct LoadedDataset {
  Dataset dataset;
  nlohmann::json header;
};
LoadedDataset load_dataset(const std::string& path);

}  // namespace rfmp
