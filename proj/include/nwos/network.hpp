#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "nwos/geometry.hpp"
#include "nwos/rng.hpp"

namespace nwos {

// Residual feedforward scalar model with GELU activations.
//
// depth counts dense layers.  depth == 1 is a single affine map input -> 1.
// For depth >= 2 the input is lifted to `width` by an affine layer, passed
// through depth-2 residual blocks h -> h + gelu(h W^T + b), and read out by
// an affine head to a scalar.  All parameters live in one flat vector so the
// optimizer and checkpoints treat the model as a single array.
class Network {
 public:
  Network(int input_dim, int width, int depth);  // zero-initialized parameters

  // He-style fan-in uniform weights (U(+-sqrt(6/fan_in))), zero biases, head
  // weights scaled by 0.1 to keep early regression targets in range.
  static Network he_initialized(int input_dim, int width, int depth, std::uint64_t seed);

  int input_dim() const { return input_dim_; }
  int width() const { return width_; }
  int depth() const { return depth_; }
  long param_count() const { return params_.size(); }
  static long param_count(int input_dim, int width, int depth);

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  // Batched evaluation, one scalar per input row.  Scratch space is exactly
  // two m x width buffers regardless of depth (blocks update in place).
  void forward(Eigen::Ref<const PointBatch> x, Eigen::VectorXd& out) const;
  Eigen::VectorXd forward(Eigen::Ref<const PointBatch> x) const;
  double forward_one(Eigen::Ref<const Point> x) const;

  // Mean squared error against targets plus its parameter gradient (resized
  // to param_count).  Returns the loss.
  double mse_and_param_grads(Eigen::Ref<const PointBatch> x, const Eigen::VectorXd& targets,
                             Eigen::VectorXd& grads) const;

  // Loss only (used by finite-difference checks and evaluation).
  double mse(Eigen::Ref<const PointBatch> x, const Eigen::VectorXd& targets) const;

  // Per-row gradient of the output with respect to the input coordinates.
  void input_gradient(Eigen::Ref<const PointBatch> x, PointBatch& grads) const;

 private:
  int input_dim_, width_, depth_;
  Eigen::VectorXd params_;
};

// Adam with bias correction and an exponential learning-rate schedule: the
// step taken after k completed steps uses lr0 * total_decay^(k/total_steps),
// so the first step runs at lr0 and step total_steps ends two orders of
// magnitude lower with the default decay.
struct AdamConfig {
  double lr0 = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long total_steps = 1;
  double total_decay = 1e-2;
};

class Adam {
 public:
  Adam(long param_count, AdamConfig cfg);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grads);
  long steps_done() const { return steps_done_; }
  double next_lr() const;  // learning rate the next step will use

 private:
  AdamConfig cfg_;
  long steps_done_ = 0;
  Eigen::VectorXd m_, v_;
};

// Checkpoints are a one-line JSON header (architecture, seed, step, count)
// followed by the raw little-endian parameter doubles; round-trips bit-exact.
void save_checkpoint(std::ostream& os, const Network& net, std::uint64_t seed, long step);
void save_checkpoint(const std::string& path, const Network& net, std::uint64_t seed, long step);

struct LoadedCheckpoint {
  Network net;
  std::uint64_t seed;
  long step;
};
LoadedCheckpoint load_checkpoint(std::istream& is);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace nwos
