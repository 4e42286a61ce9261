#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nwos/geometry.hpp"
#include "nwos/network.hpp"
#include "nwos/rng.hpp"
#include "nwos/stochastic.hpp"

namespace nwos {

inline constexpr long kUnlimitedSteps = -1;
// Hard cap for unlimited walks; exceeding it means the geometry or epsilon is
// degenerate, not that more steps would help.
inline constexpr long kDivergenceCap = 100000;
// Trajectories per RNG shard.  Fixed (not derived from the thread count) so a
// run is bit-identical no matter how many threads execute the shards.
inline constexpr long kWalkShardSize = 2048;

struct WoSConfig {
  double epsilon = 1e-4;  // stop once dist(x) drops below this shell width
  long max_steps = kUnlimitedSteps;  // K >= 0 truncates onto the model; -1 walks to the shell
  long n_traj = 1;                   // trajectories averaged per start
  bool use_control_variate = false;
  int interior_draws_per_step = 1;  // source draws averaged per sphere step
};

// The walker's view of a PDE problem: where to walk, the source term f and
// the boundary data g.  ctx carries optional per-start extra inputs (e.g.
// equation parameters); it is passed to the callbacks and appended to the
// model input at terminal evaluations.
struct WalkProblem {
  const Domain* domain = nullptr;
  std::function<double(Eigen::Ref<const Point>, Eigen::Ref<const Point>)> source;
  std::function<double(Eigen::Ref<const Point>, Eigen::Ref<const Point>)> boundary;
  // Declares f identically zero: walks skip the interior draw and Green's
  // function evaluation each step (roughly halves the cost of a step).  The
  // RNG stream changes, not the estimator: the skipped term is exactly 0.
  bool zero_source = false;
};

struct WoSResult {
  Eigen::VectorXd targets;                 // m: mean target per start
  Eigen::VectorXd per_trajectory_targets;  // m * n_traj, grouped by start
  // Mean over trajectories of (xi_1 - start), the quantity a first-order
  // control variate multiplies; rows are zero for walks that started inside
  // the shell.  Empty unless the request asked for offsets.
  PointBatch first_step_offsets;
  std::vector<char> truncated;           // m: any trajectory hit the step cap
  Eigen::VectorXd mean_steps_per_start;  // m
  double mean_steps = 0.0;               // over all m * n_traj trajectories
};

struct WalkRequest {
  const WalkProblem* problem = nullptr;
  const PointBatch* starts = nullptr;
  const PointBatch* ctx = nullptr;  // optional; same row count as starts
  WoSConfig cfg;
  const Network* terminal_model = nullptr;  // required when cfg.max_steps >= 0
  // m x d model gradients at the starts; when present (and the config flag is
  // set) each trajectory target is adjusted by -grad(start) . (xi_1 - start).
  const PointBatch* variate_gradients = nullptr;
  std::uint64_t seed = 0;
  int threads = 1;
  bool record_offsets = false;
};

// Batched Walk-on-Spheres.  All trajectories advance in lockstep within
// fixed-size shards; finished walks are masked, and every shard draws from
// its own (seed, shard index) stream, so results do not depend on threading.
WoSResult walk(const WalkRequest& req);

WoSResult walk(const WalkProblem& problem, const PointBatch& starts, const WoSConfig& cfg,
               std::uint64_t seed);
WoSResult walk(const WalkProblem& problem, const PointBatch& starts, const WoSConfig& cfg,
               const Network& terminal_model, std::uint64_t seed);

// First-order control variate: per start x the target becomes
//   mean_n [ WoS_n(x) - grad_v(x) . (xi_1^n - x) ],
// where xi_1^n is trajectory n's first sphere draw.  The gradient is
// evaluated once per start and treated as a constant, and E[delta] = 0 keeps
// the estimator unbiased for any model.
WoSResult walk_with_control_variate(const WalkProblem& problem, const PointBatch& starts,
                                    const WoSConfig& cfg, const Network& model,
                                    std::uint64_t seed);

struct PointwiseEstimate {
  Eigen::VectorXd values;
  Eigen::VectorXd stderrs;         // standard error of each mean
  Eigen::VectorXd steps_per_point; // mean walk length per evaluation point
  double mean_steps = 0.0;
};

// Plain Monte-Carlo solution estimates: n_walks to-the-shell trajectories
// per evaluation point, no model involved.
PointwiseEstimate wos_pointwise(const WalkProblem& problem, const PointBatch& eval_points,
                                long n_walks, double epsilon, std::uint64_t seed,
                                int threads = 1);

}  // namespace nwos
