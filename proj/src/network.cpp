#include "nwos/network.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace nwos {

namespace {

// Exact GELU (Gaussian CDF form); the tanh approximation would perturb
// finite-difference gradient checks.
inline double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z * (1.0 / std::sqrt(2.0)))); }

inline double gelu_prime(double z) {
  const double phi = std::exp(-0.5 * z * z) * 0.3989422804014327;  // N(0,1) density
  const double cdf = 0.5 * (1.0 + std::erf(z * (1.0 / std::sqrt(2.0))));
  return cdf + z * phi;
}

using WeightView = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                  Eigen::RowMajor>>;
using WeightGradView =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using VecView = Eigen::Map<const Eigen::VectorXd>;
using VecGradView = Eigen::Map<Eigen::VectorXd>;

// Flat layout: lift (W x d weights, W bias), depth-2 blocks (W x W + W each),
// head (W weights, 1 bias).  depth == 1 stores just the head (d weights, 1).
struct Layout {
  int d, w, depth;
  long lift_w() const { return 0; }
  long lift_b() const { return static_cast<long>(w) * d; }
  long block_w(int k) const { return lift_b() + w + static_cast<long>(k) * (static_cast<long>(w) * w + w); }
  long block_b(int k) const { return block_w(k) + static_cast<long>(w) * w; }
  long head_w() const {
    return depth == 1 ? 0 : block_w(depth - 2);
  }
  long head_b() const { return head_w() + (depth == 1 ? d : w); }
};

}  // namespace

long Network::param_count(int input_dim, int width, int depth) {
  if (depth == 1) return input_dim + 1L;
  return static_cast<long>(width) * (input_dim + 1) +
         static_cast<long>(depth - 2) * width * (width + 1) + width + 1;
}

Network::Network(int input_dim, int width, int depth)
    : input_dim_(input_dim), width_(width), depth_(depth) {
  if (input_dim < 1) throw std::invalid_argument("Network: input_dim must be >= 1");
  if (depth < 1) throw std::invalid_argument("Network: depth must be >= 1");
  if (depth >= 2 && width < 1) throw std::invalid_argument("Network: width must be >= 1");
  params_ = Eigen::VectorXd::Zero(param_count(input_dim, width, depth));
}

Network Network::he_initialized(int input_dim, int width, int depth, std::uint64_t seed) {
  Network net(input_dim, width, depth);
  auto rng = make_stream(seed, StreamKind::NetInit, 0);
  const Layout lay{input_dim, width, depth};
  auto fill = [&](long offset, long rows, long cols, double scale) {
    const double bound = scale * std::sqrt(6.0 / static_cast<double>(cols));
    std::uniform_real_distribution<double> unif(-bound, bound);
    for (long i = 0; i < rows * cols; ++i) net.params_[offset + i] = unif(rng);
  };
  if (depth == 1) {
    fill(lay.head_w(), 1, input_dim, 0.1);
    return net;
  }
  fill(lay.lift_w(), width, input_dim, 1.0);
  for (int k = 0; k < depth - 2; ++k) fill(lay.block_w(k), width, width, 1.0);
  fill(lay.head_w(), 1, width, 0.1);
  return net;
}

void Network::forward(Eigen::Ref<const PointBatch> x, Eigen::VectorXd& out) const {
  if (x.cols() != input_dim_) throw std::invalid_argument("Network::forward: input dim mismatch");
  const long m = x.rows();
  const Layout lay{input_dim_, width_, depth_};
  out.resize(m);
  if (depth_ == 1) {
    VecView w(params_.data() + lay.head_w(), input_dim_);
    out.noalias() = x * w;
    out.array() += params_[lay.head_b()];
    return;
  }
  WeightView lift(params_.data() + lay.lift_w(), width_, input_dim_);
  VecView lift_b(params_.data() + lay.lift_b(), width_);
  PointBatch h(m, width_), z(m, width_);
  h.noalias() = x * lift.transpose();
  h.rowwise() += lift_b.transpose();
  for (int k = 0; k < depth_ - 2; ++k) {
    WeightView wk(params_.data() + lay.block_w(k), width_, width_);
    VecView bk(params_.data() + lay.block_b(k), width_);
    z.noalias() = h * wk.transpose();
    z.rowwise() += bk.transpose();
    h.array() += z.array().unaryExpr([](double v) { return gelu(v); });
  }
  VecView head(params_.data() + lay.head_w(), width_);
  out.noalias() = h * head;
  out.array() += params_[lay.head_b()];
}

Eigen::VectorXd Network::forward(Eigen::Ref<const PointBatch> x) const {
  Eigen::VectorXd out;
  forward(x, out);
  return out;
}

double Network::forward_one(Eigen::Ref<const Point> x) const {
  PointBatch batch(1, x.size());
  batch.row(0) = x;
  return forward(batch)[0];
}

double Network::mse(Eigen::Ref<const PointBatch> x, const Eigen::VectorXd& targets) const {
  const Eigen::VectorXd out = forward(x);
  return (out - targets).squaredNorm() / static_cast<double>(x.rows());
}

double Network::mse_and_param_grads(Eigen::Ref<const PointBatch> x,
                                    const Eigen::VectorXd& targets,
                                    Eigen::VectorXd& grads) const {
  if (x.rows() != targets.size())
    throw std::invalid_argument("Network::mse_and_param_grads: target count mismatch");
  const long m = x.rows();
  const Layout lay{input_dim_, width_, depth_};
  grads.setZero(params_.size());

  if (depth_ == 1) {
    VecView w(params_.data() + lay.head_w(), input_dim_);
    Eigen::VectorXd out = x * w;
    out.array() += params_[lay.head_b()];
    const Eigen::VectorXd err = (2.0 / static_cast<double>(m)) * (out - targets);
    VecGradView gw(grads.data() + lay.head_w(), input_dim_);
    gw.noalias() = x.transpose() * err;
    grads[lay.head_b()] = err.sum();
    return (out - targets).squaredNorm() / static_cast<double>(m);
  }

  // Forward pass caching each block's input (hs) and pre-activation (zs).
  WeightView lift(params_.data() + lay.lift_w(), width_, input_dim_);
  VecView lift_b(params_.data() + lay.lift_b(), width_);
  std::vector<PointBatch> hs(depth_ - 2), zs(depth_ - 2);
  PointBatch h(m, width_);
  h.noalias() = x * lift.transpose();
  h.rowwise() += lift_b.transpose();
  for (int k = 0; k < depth_ - 2; ++k) {
    WeightView wk(params_.data() + lay.block_w(k), width_, width_);
    VecView bk(params_.data() + lay.block_b(k), width_);
    hs[k] = h;
    zs[k].noalias() = h * wk.transpose();
    zs[k].rowwise() += bk.transpose();
    h.array() += zs[k].array().unaryExpr([](double v) { return gelu(v); });
  }
  VecView head(params_.data() + lay.head_w(), width_);
  Eigen::VectorXd out = h * head;
  out.array() += params_[lay.head_b()];
  const double loss = (out - targets).squaredNorm() / static_cast<double>(m);

  // Reverse pass.
  const Eigen::VectorXd err = (2.0 / static_cast<double>(m)) * (out - targets);
  VecGradView ghead(grads.data() + lay.head_w(), width_);
  ghead.noalias() = h.transpose() * err;
  grads[lay.head_b()] = err.sum();
  PointBatch g = err * head.transpose();  // m x W
  for (int k = depth_ - 3; k >= 0; --k) {
    WeightView wk(params_.data() + lay.block_w(k), width_, width_);
    const PointBatch a =
        (g.array() * zs[k].array().unaryExpr([](double v) { return gelu_prime(v); })).matrix();
    WeightGradView gw(grads.data() + lay.block_w(k), width_, width_);
    gw.noalias() = a.transpose() * hs[k];
    VecGradView gb(grads.data() + lay.block_b(k), width_);
    gb = a.colwise().sum().transpose();
    g.noalias() += a * wk;
  }
  WeightGradView glift(grads.data() + lay.lift_w(), width_, input_dim_);
  glift.noalias() = g.transpose() * x;
  VecGradView glift_b(grads.data() + lay.lift_b(), width_);
  glift_b = g.colwise().sum().transpose();
  return loss;
}

void Network::input_gradient(Eigen::Ref<const PointBatch> x, PointBatch& grads) const {
  const long m = x.rows();
  const Layout lay{input_dim_, width_, depth_};
  grads.resize(m, input_dim_);
  if (depth_ == 1) {
    VecView w(params_.data() + lay.head_w(), input_dim_);
    grads = w.transpose().replicate(m, 1);
    return;
  }
  WeightView lift(params_.data() + lay.lift_w(), width_, input_dim_);
  VecView lift_b(params_.data() + lay.lift_b(), width_);
  std::vector<PointBatch> zs(depth_ - 2);
  PointBatch h(m, width_);
  h.noalias() = x * lift.transpose();
  h.rowwise() += lift_b.transpose();
  for (int k = 0; k < depth_ - 2; ++k) {
    WeightView wk(params_.data() + lay.block_w(k), width_, width_);
    VecView bk(params_.data() + lay.block_b(k), width_);
    zs[k].noalias() = h * wk.transpose();
    zs[k].rowwise() += bk.transpose();
    h.array() += zs[k].array().unaryExpr([](double v) { return gelu(v); });
  }
  VecView head(params_.data() + lay.head_w(), width_);
  PointBatch g = head.transpose().replicate(m, 1);  // dout/dh per row
  for (int k = depth_ - 3; k >= 0; --k) {
    WeightView wk(params_.data() + lay.block_w(k), width_, width_);
    const PointBatch a =
        (g.array() * zs[k].array().unaryExpr([](double v) { return gelu_prime(v); })).matrix();
    g.noalias() += a * wk;
  }
  grads.noalias() = g * lift;
}

Adam::Adam(long param_count, AdamConfig cfg) : cfg_(cfg) {
  if (param_count < 1) throw std::invalid_argument("Adam: empty parameter vector");
  if (cfg_.total_steps < 1) throw std::invalid_argument("Adam: total_steps must be >= 1");
  m_ = Eigen::VectorXd::Zero(param_count);
  v_ = Eigen::VectorXd::Zero(param_count);
}

double Adam::next_lr() const {
  return cfg_.lr0 * std::pow(cfg_.total_decay,
                             static_cast<double>(steps_done_) /
                                 static_cast<double>(cfg_.total_steps));
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("Adam::step: size mismatch");
  const double lr = next_lr();
  ++steps_done_;
  const double t = static_cast<double>(steps_done_);
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grads;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grads.cwiseProduct(grads);
  const double mc = 1.0 - std::pow(cfg_.beta1, t);
  const double vc = 1.0 - std::pow(cfg_.beta2, t);
  params.array() -=
      lr * (m_.array() / mc) / ((v_.array() / vc).sqrt() + cfg_.eps);
}

void save_checkpoint(std::ostream& os, const Network& net, std::uint64_t seed, long step) {
  nlohmann::json header;
  header["format"] = "nwos-model";
  header["version"] = 1;
  header["input_dim"] = net.input_dim();
  header["width"] = net.width();
  header["depth"] = net.depth();
  header["seed"] = seed;
  header["step"] = step;
  header["param_count"] = net.param_count();
  os << header.dump() << '\n';
  os.write(reinterpret_cast<const char*>(net.params().data()),
           static_cast<std::streamsize>(net.param_count() * sizeof(double)));
  if (!os) throw std::runtime_error("save_checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const Network& net, std::uint64_t seed,
                     long step) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  save_checkpoint(os, net, seed, step);
}

LoadedCheckpoint load_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("load_checkpoint: missing header");
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("format", "") != "nwos-model" ||
      header.value("version", 0) != 1)
    throw std::runtime_error("load_checkpoint: unrecognized header");
  Network net(header.at("input_dim").get<int>(), header.at("width").get<int>(),
              header.at("depth").get<int>());
  const long count = header.at("param_count").get<long>();
  if (count != net.param_count())
    throw std::runtime_error("load_checkpoint: parameter count does not match architecture");
  is.read(reinterpret_cast<char*>(net.params().data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (is.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
    throw std::runtime_error("load_checkpoint: truncated parameter block");
  return {std::move(net), header.at("seed").get<std::uint64_t>(), header.at("step").get<long>()};
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  return load_checkpoint(is);
}

}  // namespace nwos
