#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "nwos/network.hpp"
#include "nwos/problem.hpp"
#include "nwos/walker.hpp"

namespace nwos {

struct TrainConfig {
  long iterations = 1000;          // T: gradient steps
  long domain_batch = 512;         // m_d: interior points per buffer update / minibatch size
  long boundary_batch = -1;        // m_b: boundary points per step; -1 -> 10% of the total batch
  double boundary_penalty = 1.0;   // beta: weight of the boundary loss term
  long buffer_size = -1;           // B: replay buffer capacity; -1 -> 10 * m_d
  long buffer_update_interval = 10;  // L: iterations between buffer refresh cycles
  long traj_per_update = 5;        // N: trajectories averaged per walked point
  double refine_fraction = 0.5;    // share of m_d re-walked from the buffer per update
  WoSConfig wos;                   // epsilon / max_steps / variate flag (n_traj comes from N)
  // adam.total_steps <= 1 is treated as "span the whole run" so the learning
  // rate decays to lr0 * total_decay exactly at the final iteration.
  AdamConfig adam;
  std::uint64_t seed = 0;
  double wall_clock_budget = std::numeric_limits<double>::infinity();  // seconds
  long eval_points = 0;   // rel-L2 sample size per log entry; 0 skips evaluation
  long log_every = 10;    // convergence-log cadence in iterations
  int threads = 1;

  long effective_boundary_batch() const {
    if (boundary_batch >= 0) return boundary_batch;
    return std::max<long>(1, (domain_batch + 8) / 9);  // m_b = 10% of (m_d + m_b)
  }
  long effective_buffer_size() const {
    return buffer_size >= 0 ? buffer_size : 10 * domain_batch;
  }
};

struct LogEntry {
  long iteration = 0;   // 1-based count of completed gradient steps
  double seconds = 0.0; // wall-clock time since training started
  double loss = 0.0;    // training loss at this step (interior + weighted boundary)
  double rel_l2 = std::numeric_limits<double>::quiet_NaN();  // NaN when not evaluated
};

struct ConvergenceLog {
  std::vector<LogEntry> entries;
};

struct TrainResult {
  ConvergenceLog log;
  long iterations_run = 0;
  double wall_seconds = 0.0;
  double mean_wos_steps = 0.0;  // over every trajectory walked during training
};

// Replay buffer of walk estimates.  Always at full capacity once seeded; the
// eviction cursor makes replacement strictly FIFO.  Estimates are running
// means: an entry with traj_count n holds the mean of exactly n trajectory
// targets (boundary seeds count as one exact pseudo-trajectory).
class ReplayBuffer {
 public:
  ReplayBuffer(long capacity, int dim, int ctx_dim = 0);

  long capacity() const { return x_.rows(); }
  int dim() const { return static_cast<int>(x_.cols()); }
  int ctx_dim() const { return static_cast<int>(ctx_.cols()); }

  // Seeds every slot (used once, with boundary points and their exact data).
  void fill(const PointBatch& xs, const PointBatch& ctxs, const Eigen::VectorXd& estimates,
            long traj_count);

  // Rows that the next replacement cycle will evict, oldest first.
  std::vector<long> eviction_rows(long count) const;
  // Uniform sample of `count` distinct rows outside the next eviction window
  // (refining a row about to be evicted would waste the walks).
  std::vector<long> refinement_rows(Rng& rng, long count, long evict_count) const;

  // Pooled running mean: merge an n-trajectory mean into an existing entry.
  void refine(long row, double mean_estimate, long n);
  // FIFO replacement of the oldest `xs.rows()` entries by fresh estimates.
  void replace_oldest(const PointBatch& xs, const PointBatch& ctxs,
                      const Eigen::VectorXd& estimates, long traj_count);

  // With-replacement uniform minibatch; gathers model inputs [x | ctx].
  void sample_minibatch(Rng& rng, long count, PointBatch& inputs, Eigen::VectorXd& targets) const;

  Eigen::Ref<const PointBatch> points() const { return x_; }
  Eigen::Ref<const PointBatch> contexts() const { return ctx_; }
  const Eigen::VectorXd& estimates() const { return est_; }
  const std::vector<long>& traj_counts() const { return n_; }

 private:
  PointBatch x_;
  PointBatch ctx_;
  Eigen::VectorXd est_;
  std::vector<long> n_;
  long cursor_ = 0;  // oldest entry; advances by the replacement count
};

// Plain NWoS training: every iteration walks a fresh interior batch to the
// boundary (no truncation, no buffer, no boundary loss, no variates) and
// regresses the model on the targets with one Adam step.
TrainResult train_vanilla(const Problem& problem, Network& net, const TrainConfig& cfg);

// Buffered NWoS training: a replay buffer seeded with exact boundary data is
// refreshed every L iterations (fresh walks + refined running means, FIFO
// eviction), walks truncate onto the frozen model after K steps and may use
// first-order control variates; every iteration takes one Adam step on
// MSE(buffer minibatch) + beta * MSE(fresh boundary batch).
TrainResult train_buffered(const Problem& problem, Network& net, const TrainConfig& cfg);

// Monte-Carlo relative L2 error sqrt(sum (v-u)^2 / sum u^2) over n_eval
// uniform interior points (with context rows drawn for parametric problems).
// Throws when the problem has no analytic solution.
double relative_l2_error(const Network& net, const Problem& problem, long n_eval,
                         std::uint64_t seed);

}  // namespace nwos
