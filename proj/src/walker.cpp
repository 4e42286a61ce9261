#include "nwos/walker.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <utility>

namespace nwos {

namespace {

struct KernelState {
  const WalkRequest* req = nullptr;
  const PointBatch* ctx = nullptr;  // always valid; m x 0 when no context given
  int d = 0;
  long m = 0;
  long total = 0;   // m * n_traj
  long shards = 0;
  bool want_offsets = false;  // needed for recording or for the variate

  // Per-trajectory outputs, written by disjoint shard slices.
  Eigen::VectorXd traj_targets;
  Eigen::VectorXd traj_steps;
  std::vector<char> traj_truncated;
  PointBatch traj_offsets;
};

// Advances one shard of trajectories in lockstep until all finish.  Each
// round scans the shard in row order, so the draw sequence depends only on
// the seed and the shard index.
void run_shard(KernelState& st, long shard) {
  const long lo = shard * kWalkShardSize;
  const long hi = std::min(lo + kWalkShardSize, st.total);
  const long count = hi - lo;
  const WoSConfig& cfg = st.req->cfg;
  const WalkProblem& problem = *st.req->problem;
  const Domain& dom = *problem.domain;
  const PointBatch& starts = *st.req->starts;
  const long n_traj = cfg.n_traj;
  const int d = st.d;
  const int ctx_cols = static_cast<int>(st.ctx->cols());

  auto rng = make_stream(st.req->seed, StreamKind::WalkShard, static_cast<std::uint64_t>(shard));

  PointBatch pos(count, d);
  for (long i = 0; i < count; ++i) pos.row(i) = starts.row((lo + i) / n_traj);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(count);
  Eigen::VectorXd target(count);
  std::vector<long> steps(count, 0);
  std::vector<char> active(count, 1);
  std::vector<char> truncated(count, 0);
  PointBatch offsets;
  if (st.want_offsets) offsets = PointBatch::Zero(count, d);
  std::vector<long> pending;  // rows waiting on a terminal model evaluation

  Point gamma(d);
  Point next(d);
  Point proj(d);
  long remaining = count;
  while (remaining > 0) {
    for (long i = 0; i < count; ++i) {
      if (!active[i]) continue;
      const long start_row = (lo + i) / n_traj;
      const auto ctx_row = st.ctx->row(start_row);
      const double r = dom.distance(pos.row(i));
      if (r < cfg.epsilon) {
        dom.project(pos.row(i), proj);
        target[i] = problem.boundary(proj, ctx_row) + acc[i];
        active[i] = 0;
        --remaining;
        continue;
      }
      if (cfg.max_steps >= 0 && steps[i] == cfg.max_steps) {
        pending.push_back(i);
        truncated[i] = 1;
        active[i] = 0;
        --remaining;
        continue;
      }
      // Source draw(s) on the current sphere, then the jump to its surface.
      if (!problem.zero_source) {
        double contrib = 0.0;
        for (int j = 0; j < cfg.interior_draws_per_step; ++j) {
          double rho;
          do {
            rho = sample_ball_interior(rng, pos.row(i), r, gamma);
          } while (rho < 1e-12 * r);  // skip draws inside the Green singularity
          contrib += problem.source(gamma, ctx_row) * green_tilde(r, rho, d);
        }
        acc[i] -= contrib / cfg.interior_draws_per_step;
        if (!std::isfinite(acc[i]))
          throw std::runtime_error("walk: source accumulator became non-finite");
      }
      sample_sphere_surface(rng, pos.row(i), r, next);
      if (steps[i] == 0 && st.want_offsets) offsets.row(i) = next - pos.row(i);
      pos.row(i) = next;
      ++steps[i];
      if (cfg.max_steps < 0 && steps[i] > kDivergenceCap)
        throw std::runtime_error(
            "walk: a trajectory exceeded 100000 steps without reaching the boundary shell; "
            "the domain or epsilon is degenerate");
    }
  }

  if (!pending.empty()) {
    PointBatch inputs(static_cast<long>(pending.size()), d + ctx_cols);
    for (std::size_t k = 0; k < pending.size(); ++k) {
      const long i = pending[k];
      inputs.row(static_cast<long>(k)).head(d) = pos.row(i);
      if (ctx_cols > 0)
        inputs.row(static_cast<long>(k)).tail(ctx_cols) = st.ctx->row((lo + i) / n_traj);
    }
    Eigen::VectorXd values;
    st.req->terminal_model->forward(inputs, values);
    for (std::size_t k = 0; k < pending.size(); ++k) {
      const long i = pending[k];
      target[i] = values[static_cast<long>(k)] + acc[i];
      if (!std::isfinite(target[i]))
        throw std::runtime_error("walk: terminal model produced a non-finite value");
    }
  }

  if (st.req->variate_gradients != nullptr) {
    const PointBatch& grads = *st.req->variate_gradients;
    for (long i = 0; i < count; ++i)
      target[i] -= grads.row((lo + i) / n_traj).dot(offsets.row(i));
  }

  st.traj_targets.segment(lo, count) = target;
  for (long i = 0; i < count; ++i) {
    st.traj_steps[lo + i] = static_cast<double>(steps[i]);
    st.traj_truncated[lo + i] = truncated[i];
  }
  if (st.req->record_offsets) st.traj_offsets.middleRows(lo, count) = offsets;
}

}  // namespace

WoSResult walk(const WalkRequest& req) {
  if (req.problem == nullptr || req.problem->domain == nullptr)
    throw std::invalid_argument("walk: problem with a domain is required");
  if (!req.problem->source || !req.problem->boundary)
    throw std::invalid_argument("walk: source and boundary callbacks are required");
  if (req.starts == nullptr) throw std::invalid_argument("walk: starts are required");
  const Domain& dom = *req.problem->domain;
  const int d = dom.dim();
  const long m = req.starts->rows();
  if (req.starts->cols() != d)
    throw std::invalid_argument("walk: starts do not match the domain dimension");
  const WoSConfig& cfg = req.cfg;
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("walk: epsilon must be positive");
  if (cfg.max_steps < kUnlimitedSteps)
    throw std::invalid_argument("walk: max_steps must be -1 (unlimited) or >= 0");
  if (cfg.n_traj < 1) throw std::invalid_argument("walk: n_traj must be at least 1");
  if (cfg.interior_draws_per_step < 1)
    throw std::invalid_argument("walk: interior_draws_per_step must be at least 1");
  if (req.ctx != nullptr && req.ctx->rows() != m)
    throw std::invalid_argument("walk: ctx must have one row per start");
  const int ctx_cols = req.ctx == nullptr ? 0 : static_cast<int>(req.ctx->cols());
  if (cfg.max_steps >= 0) {
    if (req.terminal_model == nullptr)
      throw std::invalid_argument("walk: a terminal model is required when max_steps >= 0");
    if (req.terminal_model->input_dim() != d + ctx_cols)
      throw std::invalid_argument("walk: terminal model input dimension mismatch");
  }
  if (cfg.use_control_variate != (req.variate_gradients != nullptr))
    throw std::invalid_argument(
        "walk: use_control_variate requires variate gradients (and vice versa)");
  if (req.variate_gradients != nullptr &&
      (req.variate_gradients->rows() != m || req.variate_gradients->cols() != d))
    throw std::invalid_argument("walk: variate gradients must be m x dim");
  if (req.threads < 1) throw std::invalid_argument("walk: threads must be at least 1");

  KernelState st;
  st.req = &req;
  PointBatch empty_ctx;
  if (req.ctx == nullptr) {
    empty_ctx.resize(m, 0);
    st.ctx = &empty_ctx;
  } else {
    st.ctx = req.ctx;
  }
  st.d = d;
  st.m = m;
  st.total = m * cfg.n_traj;
  st.shards = (st.total + kWalkShardSize - 1) / kWalkShardSize;
  st.want_offsets = req.record_offsets || req.variate_gradients != nullptr;
  st.traj_targets.resize(st.total);
  st.traj_steps.resize(st.total);
  st.traj_truncated.assign(static_cast<std::size_t>(st.total), 0);
  if (req.record_offsets) st.traj_offsets.resize(st.total, d);

  const int workers = static_cast<int>(std::min<long>(req.threads, std::max<long>(st.shards, 1)));
  if (workers <= 1) {
    for (long s = 0; s < st.shards; ++s) run_shard(st, s);
  } else {
    std::atomic<long> next_shard{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(st.shards));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&st, &next_shard, &errors] {
        for (;;) {
          const long s = next_shard.fetch_add(1);
          if (s >= st.shards) return;
          try {
            run_shard(st, s);
          } catch (...) {
            errors[static_cast<std::size_t>(s)] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);  // lowest shard index wins
  }

  WoSResult res;
  res.per_trajectory_targets = std::move(st.traj_targets);
  res.targets.resize(m);
  res.truncated.assign(static_cast<std::size_t>(m), 0);
  res.mean_steps_per_start.resize(m);
  if (req.record_offsets) res.first_step_offsets = PointBatch::Zero(m, d);
  const long n = cfg.n_traj;
  double total_steps = 0.0;
  for (long i = 0; i < m; ++i) {
    res.targets[i] = res.per_trajectory_targets.segment(i * n, n).mean();
    double s = 0.0;
    for (long t = 0; t < n; ++t) {
      s += st.traj_steps[i * n + t];
      if (st.traj_truncated[static_cast<std::size_t>(i * n + t)]) res.truncated[i] = 1;
    }
    res.mean_steps_per_start[i] = s / static_cast<double>(n);
    total_steps += s;
    if (req.record_offsets)
      res.first_step_offsets.row(i) =
          st.traj_offsets.middleRows(i * n, n).colwise().mean();
  }
  res.mean_steps = st.total > 0 ? total_steps / static_cast<double>(st.total) : 0.0;
  return res;
}

WoSResult walk(const WalkProblem& problem, const PointBatch& starts, const WoSConfig& cfg,
               std::uint64_t seed) {
  WalkRequest req;
  req.problem = &problem;
  req.starts = &starts;
  req.cfg = cfg;
  req.seed = seed;
  return walk(req);
}

WoSResult walk(const WalkProblem& problem, const PointBatch& starts, const WoSConfig& cfg,
               const Network& terminal_model, std::uint64_t seed) {
  WalkRequest req;
  req.problem = &problem;
  req.starts = &starts;
  req.cfg = cfg;
  req.terminal_model = &terminal_model;
  req.seed = seed;
  return walk(req);
}

WoSResult walk_with_control_variate(const WalkProblem& problem, const PointBatch& starts,
                                    const WoSConfig& cfg, const Network& model,
                                    std::uint64_t seed) {
  if (problem.domain == nullptr)
    throw std::invalid_argument("walk_with_control_variate: problem with a domain is required");
  const int d = problem.domain->dim();
  if (model.input_dim() != d) {
    // A parametric model needs its context columns to evaluate the gradient;
    // callers with context must precompute gradients and use WalkRequest.
    throw std::invalid_argument(
        "walk_with_control_variate: model input dimension must match the domain; pass explicit "
        "variate gradients through a WalkRequest otherwise");
  }
  PointBatch grads;
  model.input_gradient(starts, grads);
  WalkRequest req;
  req.problem = &problem;
  req.starts = &starts;
  req.cfg = cfg;
  req.cfg.use_control_variate = true;
  if (cfg.max_steps >= 0) req.terminal_model = &model;
  req.variate_gradients = &grads;
  req.seed = seed;
  return walk(req);
}

PointwiseEstimate wos_pointwise(const WalkProblem& problem, const PointBatch& eval_points,
                                long n_walks, double epsilon, std::uint64_t seed, int threads) {
  if (n_walks < 1) throw std::invalid_argument("wos_pointwise: n_walks must be at least 1");
  WoSConfig cfg;
  cfg.epsilon = epsilon;
  cfg.max_steps = kUnlimitedSteps;
  cfg.n_traj = n_walks;
  WalkRequest req;
  req.problem = &problem;
  req.starts = &eval_points;
  req.cfg = cfg;
  req.seed = seed;
  req.threads = threads;
  WoSResult res = walk(req);

  PointwiseEstimate est;
  est.values = res.targets;
  est.steps_per_point = res.mean_steps_per_start;
  est.mean_steps = res.mean_steps;
  const long m = eval_points.rows();
  est.stderrs = Eigen::VectorXd::Zero(m);
  if (n_walks > 1) {
    for (long i = 0; i < m; ++i) {
      const auto slice = res.per_trajectory_targets.segment(i * n_walks, n_walks);
      const double var =
          (slice.array() - est.values[i]).square().sum() / static_cast<double>(n_walks - 1);
      est.stderrs[i] = std::sqrt(var / static_cast<double>(n_walks));
    }
  }
  return est;
}

}  // namespace nwos
