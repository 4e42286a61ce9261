#include "nwos/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace nwos {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

PointBatch draw_ctx(const Problem& p, Rng& rng, long n) {
  PointBatch ctx(n, p.ctx_dim);
  if (p.ctx_dim > 0) {
    if (!p.sample_ctx)
      throw std::invalid_argument("train: parametric problem without a context sampler");
    p.sample_ctx(rng, ctx);
  }
  return ctx;
}

PointBatch join_inputs(const PointBatch& x, const PointBatch& ctx) {
  if (ctx.cols() == 0) return x;
  PointBatch out(x.rows(), x.cols() + ctx.cols());
  out.leftCols(x.cols()) = x;
  out.rightCols(ctx.cols()) = ctx;
  return out;
}

void validate_common(const Problem& p, const Network& net, const TrainConfig& cfg) {
  if (p.domain == nullptr) throw std::invalid_argument("train: problem has no domain");
  if (!p.source || !p.boundary)
    throw std::invalid_argument("train: source and boundary data are required");
  if (cfg.iterations < 0) throw std::invalid_argument("train: iterations must be >= 0");
  if (cfg.domain_batch < 1) throw std::invalid_argument("train: domain batch must be >= 1");
  if (cfg.boundary_penalty < 0.0)
    throw std::invalid_argument("train: boundary penalty must be >= 0");
  if (cfg.traj_per_update < 1)
    throw std::invalid_argument("train: trajectories per update must be >= 1");
  if (cfg.log_every < 1) throw std::invalid_argument("train: log cadence must be >= 1");
  if (p.ctx_dim > 0 && !p.sample_ctx)
    throw std::invalid_argument("train: parametric problem without a context sampler");
  if (net.input_dim() != p.model_input_dim())
    throw std::invalid_argument("train: model input dimension must be problem dim + ctx dim");
}

AdamConfig schedule_for(const TrainConfig& cfg) {
  AdamConfig a = cfg.adam;
  if (a.total_steps <= 1) a.total_steps = std::max<long>(cfg.iterations, 1);
  return a;
}

struct StepStats {
  double total_steps = 0.0;
  double total_traj = 0.0;
  void add(const WoSResult& res, long traj) {
    total_steps += res.mean_steps * static_cast<double>(traj);
    total_traj += static_cast<double>(traj);
  }
  double mean() const { return total_traj > 0.0 ? total_steps / total_traj : 0.0; }
};

// Records the entry for step `iteration` if the cadence (or the final step)
// asks for one; evaluation reuses the same seed so every entry scores the
// model on the same unseen points.
void maybe_log(TrainResult& out, const Problem& problem, const Network& net,
               const TrainConfig& cfg, long iteration, double seconds, double loss, bool force) {
  if (!force && iteration % cfg.log_every != 0 && iteration != cfg.iterations) return;
  LogEntry e;
  e.iteration = iteration;
  e.seconds = seconds;
  e.loss = loss;
  if (cfg.eval_points > 0 && problem.has_solution())
    e.rel_l2 = relative_l2_error(net, problem, cfg.eval_points, cfg.seed);
  out.log.entries.push_back(e);
}

}  // namespace

ReplayBuffer::ReplayBuffer(long capacity, int dim, int ctx_dim) {
  if (capacity < 1) throw std::invalid_argument("replay buffer: capacity must be >= 1");
  if (dim < 1) throw std::invalid_argument("replay buffer: dim must be >= 1");
  if (ctx_dim < 0) throw std::invalid_argument("replay buffer: ctx dim must be >= 0");
  x_.setZero(capacity, dim);
  ctx_.setZero(capacity, ctx_dim);
  est_.setZero(capacity);
  n_.assign(static_cast<std::size_t>(capacity), 0);
}

void ReplayBuffer::fill(const PointBatch& xs, const PointBatch& ctxs,
                        const Eigen::VectorXd& estimates, long traj_count) {
  if (xs.rows() != capacity() || ctxs.rows() != capacity() || estimates.size() != capacity())
    throw std::invalid_argument("replay buffer: fill must cover every slot");
  if (xs.cols() != dim() || ctxs.cols() != ctx_dim())
    throw std::invalid_argument("replay buffer: fill shape mismatch");
  if (traj_count < 1) throw std::invalid_argument("replay buffer: traj count must be >= 1");
  if (!estimates.allFinite())
    throw std::runtime_error("replay buffer: refusing a non-finite estimate");
  x_ = xs;
  ctx_ = ctxs;
  est_ = estimates;
  n_.assign(static_cast<std::size_t>(capacity()), traj_count);
  cursor_ = 0;
}

std::vector<long> ReplayBuffer::eviction_rows(long count) const {
  if (count < 0 || count > capacity())
    throw std::invalid_argument("replay buffer: bad eviction count");
  std::vector<long> rows(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) rows[static_cast<std::size_t>(i)] = (cursor_ + i) % capacity();
  return rows;
}

std::vector<long> ReplayBuffer::refinement_rows(Rng& rng, long count, long evict_count) const {
  if (evict_count < 0 || evict_count > capacity())
    throw std::invalid_argument("replay buffer: bad eviction count");
  const long avail = capacity() - evict_count;
  const long take = std::max<long>(0, std::min(count, avail));
  std::vector<long> pool;
  pool.reserve(static_cast<std::size_t>(avail));
  for (long i = evict_count; i < capacity(); ++i) pool.push_back((cursor_ + i) % capacity());
  std::vector<long> out;
  out.reserve(static_cast<std::size_t>(take));
  std::sample(pool.begin(), pool.end(), std::back_inserter(out), take, rng);
  return out;
}

void ReplayBuffer::refine(long row, double mean_estimate, long n) {
  if (row < 0 || row >= capacity()) throw std::invalid_argument("replay buffer: row out of range");
  if (n < 1) throw std::invalid_argument("replay buffer: traj count must be >= 1");
  if (!std::isfinite(mean_estimate))
    throw std::runtime_error("replay buffer: refusing a non-finite estimate");
  auto& count = n_[static_cast<std::size_t>(row)];
  const double total = static_cast<double>(count + n);
  est_[row] = (est_[row] * static_cast<double>(count) + mean_estimate * static_cast<double>(n)) /
              total;
  count += n;
}

void ReplayBuffer::replace_oldest(const PointBatch& xs, const PointBatch& ctxs,
                                  const Eigen::VectorXd& estimates, long traj_count) {
  const long m = xs.rows();
  if (m > capacity()) throw std::invalid_argument("replay buffer: replacement exceeds capacity");
  if (ctxs.rows() != m || estimates.size() != m || xs.cols() != dim() || ctxs.cols() != ctx_dim())
    throw std::invalid_argument("replay buffer: replacement shape mismatch");
  if (traj_count < 1) throw std::invalid_argument("replay buffer: traj count must be >= 1");
  if (!estimates.allFinite())
    throw std::runtime_error("replay buffer: refusing a non-finite estimate");
  for (long j = 0; j < m; ++j) {
    const long row = (cursor_ + j) % capacity();
    x_.row(row) = xs.row(j);
    ctx_.row(row) = ctxs.row(j);
    est_[row] = estimates[j];
    n_[static_cast<std::size_t>(row)] = traj_count;
  }
  cursor_ = (cursor_ + m) % capacity();
}

void ReplayBuffer::sample_minibatch(Rng& rng, long count, PointBatch& inputs,
                                    Eigen::VectorXd& targets) const {
  if (count < 1) throw std::invalid_argument("replay buffer: minibatch must be >= 1");
  std::uniform_int_distribution<long> pick(0, capacity() - 1);
  inputs.resize(count, dim() + ctx_dim());
  targets.resize(count);
  for (long i = 0; i < count; ++i) {
    const long row = pick(rng);
    inputs.row(i).head(dim()) = x_.row(row);
    if (ctx_dim() > 0) inputs.row(i).tail(ctx_dim()) = ctx_.row(row);
    targets[i] = est_[row];
  }
}

TrainResult train_vanilla(const Problem& problem, Network& net, const TrainConfig& cfg) {
  validate_common(problem, net, cfg);
  const auto t0 = Clock::now();
  Adam adam(net.param_count(), schedule_for(cfg));
  TrainResult out;
  StepStats steps;
  const WalkProblem wview = problem.walk_view();

  WoSConfig wos = cfg.wos;
  wos.max_steps = kUnlimitedSteps;  // full walks, targets independent of the model
  wos.n_traj = cfg.traj_per_update;
  wos.use_control_variate = false;

  Eigen::VectorXd grads;
  double last_loss = 0.0;
  for (long t = 0; t < cfg.iterations; ++t) {
    if (seconds_since(t0) >= cfg.wall_clock_budget) break;
    auto loop_rng = make_stream(cfg.seed, StreamKind::TrainLoop, static_cast<std::uint64_t>(t));
    const std::uint64_t walk_seed = loop_rng();
    auto interior_rng =
        make_stream(cfg.seed, StreamKind::InteriorSampler, static_cast<std::uint64_t>(t));
    PointBatch starts = problem.domain->sample_interior(interior_rng, cfg.domain_batch);
    PointBatch ctx = draw_ctx(problem, interior_rng, cfg.domain_batch);

    WalkRequest req;
    req.problem = &wview;
    req.starts = &starts;
    if (problem.ctx_dim > 0) req.ctx = &ctx;
    req.cfg = wos;
    req.seed = walk_seed;
    req.threads = cfg.threads;
    const WoSResult res = walk(req);
    steps.add(res, starts.rows() * wos.n_traj);

    last_loss = net.mse_and_param_grads(join_inputs(starts, ctx), res.targets, grads);
    if (!std::isfinite(last_loss)) throw std::runtime_error("train: loss became non-finite");
    adam.step(net.params(), grads);
    out.iterations_run = t + 1;
    maybe_log(out, problem, net, cfg, t + 1, seconds_since(t0), last_loss, false);
  }
  if (out.iterations_run > 0 &&
      (out.log.entries.empty() || out.log.entries.back().iteration != out.iterations_run))
    maybe_log(out, problem, net, cfg, out.iterations_run, seconds_since(t0), last_loss, true);
  out.wall_seconds = seconds_since(t0);
  out.mean_wos_steps = steps.mean();
  return out;
}

TrainResult train_buffered(const Problem& problem, Network& net, const TrainConfig& cfg) {
  validate_common(problem, net, cfg);
  if (cfg.buffer_update_interval < 1)
    throw std::invalid_argument("train: buffer update interval must be >= 1");
  if (!(cfg.refine_fraction >= 0.0 && cfg.refine_fraction <= 1.0))
    throw std::invalid_argument("train: refine fraction must lie in [0, 1]");
  const long B = cfg.effective_buffer_size();
  if (B < cfg.domain_batch)
    throw std::invalid_argument("train: buffer must hold at least one domain batch");
  const long m_b = cfg.effective_boundary_batch();

  const auto t0 = Clock::now();
  Adam adam(net.param_count(), schedule_for(cfg));
  TrainResult out;
  StepStats steps;
  const WalkProblem wview = problem.walk_view();

  ReplayBuffer buffer(B, problem.dim, problem.ctx_dim);
  {
    auto init_rng = make_stream(cfg.seed, StreamKind::BufferInit, 0);
    PointBatch zeta = problem.domain->sample_boundary(init_rng, B);
    PointBatch zctx = draw_ctx(problem, init_rng, B);
    Eigen::VectorXd g0(B);
    for (long i = 0; i < B; ++i) g0[i] = problem.boundary(zeta.row(i), zctx.row(i));
    buffer.fill(zeta, zctx, g0, 1);  // exact values enter as one pseudo-trajectory
  }

  WoSConfig wos = cfg.wos;
  wos.n_traj = cfg.traj_per_update;

  Eigen::VectorXd grads;
  Eigen::VectorXd bnd_grads;
  PointBatch batch_inputs;
  Eigen::VectorXd batch_targets;
  double last_loss = 0.0;
  for (long t = 0; t < cfg.iterations; ++t) {
    if (seconds_since(t0) >= cfg.wall_clock_budget) break;
    auto loop_rng = make_stream(cfg.seed, StreamKind::TrainLoop, static_cast<std::uint64_t>(t));

    if (t % cfg.buffer_update_interval == 0) {
      const std::uint64_t walk_seed = loop_rng();
      auto interior_rng =
          make_stream(cfg.seed, StreamKind::InteriorSampler, static_cast<std::uint64_t>(t));
      PointBatch fresh = problem.domain->sample_interior(interior_rng, cfg.domain_batch);
      PointBatch fresh_ctx = draw_ctx(problem, interior_rng, cfg.domain_batch);
      const long refine_want =
          std::lround(cfg.refine_fraction * static_cast<double>(cfg.domain_batch));
      const std::vector<long> refine_rows =
          buffer.refinement_rows(loop_rng, refine_want, cfg.domain_batch);
      const long r = static_cast<long>(refine_rows.size());

      PointBatch starts(cfg.domain_batch + r, problem.dim);
      starts.topRows(cfg.domain_batch) = fresh;
      PointBatch ctx(cfg.domain_batch + r, problem.ctx_dim);
      ctx.topRows(cfg.domain_batch) = fresh_ctx;
      for (long j = 0; j < r; ++j) {
        starts.row(cfg.domain_batch + j) = buffer.points().row(refine_rows[static_cast<std::size_t>(j)]);
        ctx.row(cfg.domain_batch + j) = buffer.contexts().row(refine_rows[static_cast<std::size_t>(j)]);
      }

      WalkRequest req;
      req.problem = &wview;
      req.starts = &starts;
      if (problem.ctx_dim > 0) req.ctx = &ctx;
      req.cfg = wos;
      // The model is frozen for the whole update: walks may read it for
      // truncation targets and variate gradients, gradient steps come later.
      if (wos.max_steps >= 0) req.terminal_model = &net;
      PointBatch vgrads;
      if (wos.use_control_variate) {
        PointBatch ig;
        net.input_gradient(join_inputs(starts, ctx), ig);
        vgrads = ig.leftCols(problem.dim);
        req.variate_gradients = &vgrads;
      }
      req.seed = walk_seed;
      req.threads = cfg.threads;
      const WoSResult res = walk(req);
      steps.add(res, starts.rows() * wos.n_traj);

      for (long j = 0; j < r; ++j)
        buffer.refine(refine_rows[static_cast<std::size_t>(j)],
                      res.targets[cfg.domain_batch + j], wos.n_traj);
      buffer.replace_oldest(fresh, fresh_ctx, res.targets.head(cfg.domain_batch), wos.n_traj);
    }

    buffer.sample_minibatch(loop_rng, cfg.domain_batch, batch_inputs, batch_targets);
    const double interior_loss = net.mse_and_param_grads(batch_inputs, batch_targets, grads);

    double boundary_loss = 0.0;
    if (m_b > 0 && cfg.boundary_penalty > 0.0) {
      auto bnd_rng =
          make_stream(cfg.seed, StreamKind::BoundarySampler, static_cast<std::uint64_t>(t));
      PointBatch zeta = problem.domain->sample_boundary(bnd_rng, m_b);
      PointBatch zctx = draw_ctx(problem, bnd_rng, m_b);
      Eigen::VectorXd gb(m_b);
      for (long i = 0; i < m_b; ++i) gb[i] = problem.boundary(zeta.row(i), zctx.row(i));
      boundary_loss = net.mse_and_param_grads(join_inputs(zeta, zctx), gb, bnd_grads);
      grads += cfg.boundary_penalty * bnd_grads;
    }

    last_loss = interior_loss + cfg.boundary_penalty * boundary_loss;
    if (!std::isfinite(last_loss)) throw std::runtime_error("train: loss became non-finite");
    adam.step(net.params(), grads);
    out.iterations_run = t + 1;
    maybe_log(out, problem, net, cfg, t + 1, seconds_since(t0), last_loss, false);
  }
  if (out.iterations_run > 0 &&
      (out.log.entries.empty() || out.log.entries.back().iteration != out.iterations_run))
    maybe_log(out, problem, net, cfg, out.iterations_run, seconds_since(t0), last_loss, true);
  out.wall_seconds = seconds_since(t0);
  out.mean_wos_steps = steps.mean();
  return out;
}

double relative_l2_error(const Network& net, const Problem& problem, long n_eval,
                         std::uint64_t seed) {
  if (problem.domain == nullptr)
    throw std::invalid_argument("relative_l2_error: problem has no domain");
  if (!problem.has_solution())
    throw std::invalid_argument("relative_l2_error: problem has no analytic solution");
  if (n_eval < 1) throw std::invalid_argument("relative_l2_error: need at least one point");
  if (net.input_dim() != problem.model_input_dim())
    throw std::invalid_argument("relative_l2_error: model input dimension mismatch");

  auto rng = make_stream(seed, StreamKind::Eval, 0);
  const long chunk = 4096;
  double num = 0.0;
  double den = 0.0;
  Eigen::VectorXd v;
  for (long done = 0; done < n_eval; done += chunk) {
    const long n = std::min(chunk, n_eval - done);
    PointBatch xs = problem.domain->sample_interior(rng, n);
    PointBatch ctx = draw_ctx(problem, rng, n);
    net.forward(join_inputs(xs, ctx), v);
    for (long i = 0; i < n; ++i) {
      const double u = problem.solution(xs.row(i), ctx.row(i));
      num += (v[i] - u) * (v[i] - u);
      den += u * u;
    }
  }
  if (den == 0.0)
    throw std::runtime_error("relative_l2_error: solution vanishes on the whole sample");
  return std::sqrt(num / den);
}

}  // namespace nwos
