#include "nwos/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "nwos/stochastic.hpp"

namespace nwos {

namespace {

[[noreturn]] void throw_escaped(const char* domain_name) {
  throw std::domain_error(std::string(domain_name) +
                          ": point lies outside the domain closure (walk escaped?)");
}

double uniform_in(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> unif(lo, hi);
  return unif(rng);
}

}  // namespace

Domain::Domain(int dim) : dim_(dim) {
  if (dim < 2) throw std::invalid_argument("Domain: dimension must be >= 2");
}

Point Domain::projected(Eigen::Ref<const Point> x) const {
  Point out(dim_);
  project(x, out);
  return out;
}

PointBatch Domain::sample_interior(Rng& rng, long n, long* attempts) const {
  PointBatch out(n, dim_);
  sample_interior(rng, out, attempts);
  return out;
}

PointBatch Domain::sample_boundary(Rng& rng, long n) const {
  PointBatch out(n, dim_);
  sample_boundary(rng, out);
  return out;
}

// ---------------------------------------------------------------- HyperRectangle

HyperRectangle::HyperRectangle(Point lo, Point hi)
    : Domain(static_cast<int>(lo.size())), lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size())
    throw std::invalid_argument("HyperRectangle: lo/hi dimension mismatch");
  for (Eigen::Index i = 0; i < lo_.size(); ++i)
    if (!(lo_[i] < hi_[i]))
      throw std::invalid_argument("HyperRectangle: requires lo < hi on every axis");
}

HyperRectangle::HyperRectangle(int dim, double lo, double hi)
    : HyperRectangle(Point::Constant(dim, lo), Point::Constant(dim, hi)) {}

double HyperRectangle::distance(Eigen::Ref<const Point> x) const {
  double dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i)
    dist = std::min(dist, std::min(x[i] - lo_[i], hi_[i] - x[i]));
  if (dist < -kBoundaryTol) throw_escaped("HyperRectangle");
  return std::max(dist, 0.0);
}

void HyperRectangle::project(Eigen::Ref<const Point> x, Eigen::Ref<Point> out) const {
  out = x;
  Eigen::Index best_axis = 0;
  double best_value = lo_[0];
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    // Lower face first so ties resolve to the lower face of the lowest axis.
    if (x[i] - lo_[i] < best_dist) {
      best_dist = x[i] - lo_[i];
      best_axis = i;
      best_value = lo_[i];
    }
    if (hi_[i] - x[i] < best_dist) {
      best_dist = hi_[i] - x[i];
      best_axis = i;
      best_value = hi_[i];
    }
  }
  out[best_axis] = best_value;
}

bool HyperRectangle::contains(Eigen::Ref<const Point> x) const {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(lo_[i] < x[i] && x[i] < hi_[i])) return false;
  return true;
}

void HyperRectangle::sample_interior(Rng& rng, Eigen::Ref<PointBatch> out, long* attempts) const {
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index i = 0; i < out.cols(); ++i) out(r, i) = uniform_in(rng, lo_[i], hi_[i]);
  if (attempts) *attempts += out.rows();
}

void HyperRectangle::sample_boundary(Rng& rng, Eigen::Ref<PointBatch> out) const {
  // Face weights: both faces on axis i have area prod_{j != i} len_j.
  Point len = hi_ - lo_;
  Eigen::VectorXd cdf(2 * dim_);
  double total = 0.0;
  for (int i = 0; i < dim_; ++i) {
    double area = 1.0;
    for (int j = 0; j < dim_; ++j)
      if (j != i) area *= len[j];
    total += area;
    cdf[2 * i] = total;  // lower face
    total += area;
    cdf[2 * i + 1] = total;  // upper face
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double u = unif(rng) * total;
    int face = 0;
    while (face < 2 * dim_ - 1 && u > cdf[face]) ++face;
    const int axis = face / 2;
    for (int i = 0; i < dim_; ++i)
      out(r, i) = (i == axis) ? (face % 2 == 0 ? lo_[i] : hi_[i])
                              : uniform_in(rng, lo_[i], hi_[i]);
  }
}

void HyperRectangle::bounding_box(Point& lo, Point& hi) const {
  lo = lo_;
  hi = hi_;
}

// -------------------------------------------------------------------------- Ball

Ball::Ball(double radius, int dim) : Domain(dim), radius_(radius) {
  if (radius <= 0.0) throw std::invalid_argument("Ball: radius must be positive");
}

double Ball::distance(Eigen::Ref<const Point> x) const {
  const double dist = radius_ - x.norm();
  if (dist < -kBoundaryTol) throw_escaped("Ball");
  return std::max(dist, 0.0);
}

void Ball::project(Eigen::Ref<const Point> x, Eigen::Ref<Point> out) const {
  const double norm = x.norm();
  if (norm < 1e-300) {
    // Center: every boundary point is nearest; resolve to the lower face of axis 0.
    out.setZero();
    out[0] = -radius_;
    return;
  }
  out = x * (radius_ / norm);
}

bool Ball::contains(Eigen::Ref<const Point> x) const { return x.norm() < radius_; }

void Ball::sample_interior(Rng& rng, Eigen::Ref<PointBatch> out, long* attempts) const {
  const Point center = Point::Zero(dim_);
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    sample_ball_interior(rng, center, radius_, out.row(r));
  if (attempts) *attempts += out.rows();
}

void Ball::sample_boundary(Rng& rng, Eigen::Ref<PointBatch> out) const {
  const Point center = Point::Zero(dim_);
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    sample_sphere_surface(rng, center, radius_, out.row(r));
}

void Ball::bounding_box(Point& lo, Point& hi) const {
  lo = Point::Constant(dim_, -radius_);
  hi = Point::Constant(dim_, radius_);
}

// --------------------------------------------------------------- SphericalAnnulus

SphericalAnnulus::SphericalAnnulus(double a, double b, int dim) : Domain(dim), a_(a), b_(b) {
  if (!(0.0 < a && a < b))
    throw std::invalid_argument("SphericalAnnulus: requires 0 < a < b");
}

double SphericalAnnulus::distance(Eigen::Ref<const Point> x) const {
  const double norm = x.norm();
  const double dist = std::min(norm - a_, b_ - norm);
  if (dist < -kBoundaryTol) throw_escaped("SphericalAnnulus");
  return std::max(dist, 0.0);
}

void SphericalAnnulus::project(Eigen::Ref<const Point> x, Eigen::Ref<Point> out) const {
  const double norm = x.norm();
  // Ties resolve to the inner shell.
  const double target = (norm - a_ <= b_ - norm) ? a_ : b_;
  out = x * (target / norm);
}

bool SphericalAnnulus::contains(Eigen::Ref<const Point> x) const {
  const double norm = x.norm();
  return a_ < norm && norm < b_;
}

void SphericalAnnulus::sample_interior(Rng& rng, Eigen::Ref<PointBatch> out,
                                       long* attempts) const {
  std::uniform_real_distribution<double> unif(-b_, b_);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    long tries = 0;
    while (true) {
      if (++tries > kMaxRejectionAttempts)
        throw std::runtime_error(
            "SphericalAnnulus::sample_interior: rejection cap exceeded (degenerate config)");
      for (int i = 0; i < dim_; ++i) out(r, i) = unif(rng);
      const double norm = out.row(r).norm();
      if (a_ < norm && norm < b_) break;
    }
    if (attempts) *attempts += tries;
  }
}

void SphericalAnnulus::sample_boundary(Rng& rng, Eigen::Ref<PointBatch> out) const {
  // Shell pick weighted by surface area, i.e. by radius^(d-1).
  const double w_inner = std::pow(a_, dim_ - 1);
  const double w_outer = std::pow(b_, dim_ - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Point center = Point::Zero(dim_);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double radius = (unif(rng) * (w_inner + w_outer) < w_inner) ? a_ : b_;
    sample_sphere_surface(rng, center, radius, out.row(r));
  }
}

void SphericalAnnulus::bounding_box(Point& lo, Point& hi) const {
  lo = Point::Constant(dim_, -b_);
  hi = Point::Constant(dim_, b_);
}

// ------------------------------------------------------------- RectangularAnnulus

RectangularAnnulus::RectangularAnnulus(double c, int dim) : Domain(dim), c_(c) {
  if (!(0.0 < c && c < 1.0))
    throw std::invalid_argument("RectangularAnnulus: requires 0 < c < 1");
}

double RectangularAnnulus::inner_distance(Eigen::Ref<const Point> x) const {
  double sq = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double excess = std::max(std::abs(x[i]) - c_, 0.0);
    sq += excess * excess;
  }
  return std::sqrt(sq);
}

double RectangularAnnulus::outer_distance(Eigen::Ref<const Point> x) const {
  double dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i) dist = std::min(dist, 1.0 - std::abs(x[i]));
  return dist;
}

double RectangularAnnulus::distance(Eigen::Ref<const Point> x) const {
  const double outer = outer_distance(x);
  if (outer < -kBoundaryTol) throw_escaped("RectangularAnnulus");
  if (x.cwiseAbs().maxCoeff() < c_ - kBoundaryTol) throw_escaped("RectangularAnnulus");
  return std::max(std::min(inner_distance(x), outer), 0.0);
}

void RectangularAnnulus::project(Eigen::Ref<const Point> x, Eigen::Ref<Point> out) const {
  // Ties resolve to the inner box.
  if (inner_distance(x) <= outer_distance(x)) {
    out = x.cwiseMax(-c_).cwiseMin(c_);
    if ((out.array().abs() < c_).all()) {
      // Degenerate input inside/on the inner box: snap the largest coordinate,
      // lowest axis first, lower face on a sign tie.
      Eigen::Index axis = 0;
      for (Eigen::Index i = 1; i < out.size(); ++i)
        if (std::abs(out[i]) > std::abs(out[axis])) axis = i;
      out[axis] = out[axis] > 0.0 ? c_ : -c_;
    }
    return;
  }
  out = x;
  Eigen::Index best_axis = 0;
  double best_value = -1.0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] + 1.0 < best_dist) {
      best_dist = x[i] + 1.0;
      best_axis = i;
      best_value = -1.0;
    }
    if (1.0 - x[i] < best_dist) {
      best_dist = 1.0 - x[i];
      best_axis = i;
      best_value = 1.0;
    }
  }
  out[best_axis] = best_value;
}

bool RectangularAnnulus::contains(Eigen::Ref<const Point> x) const {
  const double max_abs = x.cwiseAbs().maxCoeff();
  return max_abs < 1.0 && max_abs > c_;
}

void RectangularAnnulus::sample_interior(Rng& rng, Eigen::Ref<PointBatch> out,
                                         long* attempts) const {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    long tries = 0;
    while (true) {
      if (++tries > kMaxRejectionAttempts)
        throw std::runtime_error(
            "RectangularAnnulus::sample_interior: rejection cap exceeded (degenerate config)");
      for (int i = 0; i < dim_; ++i) out(r, i) = unif(rng);
      if (out.row(r).cwiseAbs().maxCoeff() > c_) break;
    }
    if (attempts) *attempts += tries;
  }
}

void RectangularAnnulus::sample_boundary(Rng& rng, Eigen::Ref<PointBatch> out) const {
  // 2d outer faces of area 2^(d-1) each, then 2d inner faces of area (2c)^(d-1).
  const double w_outer = std::pow(2.0, dim_ - 1);
  const double w_inner = std::pow(2.0 * c_, dim_ - 1);
  const double total = 2.0 * dim_ * (w_outer + w_inner);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    double u = unif(rng) * total;
    const bool outer = u < 2.0 * dim_ * w_outer;
    const double w_face = outer ? w_outer : w_inner;
    if (!outer) u -= 2.0 * dim_ * w_outer;
    const int face = std::min(static_cast<int>(u / w_face), 2 * dim_ - 1);
    const int axis = face / 2;
    const double half = outer ? 1.0 : c_;
    for (int i = 0; i < dim_; ++i)
      out(r, i) = (i == axis) ? (face % 2 == 0 ? -half : half)
                              : uniform_in(rng, -half, half);
  }
}

void RectangularAnnulus::bounding_box(Point& lo, Point& hi) const {
  lo = Point::Constant(dim_, -1.0);
  hi = Point::Constant(dim_, 1.0);
}

}  // namespace nwos
