#pragma once

#include <Eigen/Dense>
#include <memory>

#include "nwos/rng.hpp"

namespace nwos {

// Points are row vectors; batches are row-major with one point per row, so a
// batch row binds to Eigen::Ref<const Point> without a copy.
using Point = Eigen::RowVectorXd;
using PointBatch = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Slack for positions that land on the boundary up to floating-point rounding
// (walk jumps hit the maximal sphere exactly, so |dist| can round below zero).
inline constexpr double kBoundaryTol = 1e-9;

// Rejection samplers give up after this many attempts per point; hitting the
// cap means the domain/bounding-box volume ratio is degenerate (config error).
inline constexpr long kMaxRejectionAttempts = 1000000;

class Domain {
 public:
  explicit Domain(int dim);
  virtual ~Domain() = default;

  int dim() const { return dim_; }

  // Distance from x to the boundary.  x must lie in the closure (up to
  // kBoundaryTol, clamped to 0); anything farther out throws std::domain_error
  // — a walk position outside the closure means the walk escaped.
  virtual double distance(Eigen::Ref<const Point> x) const = 0;

  // Closest boundary point.  Ties break deterministically: lowest axis index
  // first, lower face before upper, inner shell before outer.
  virtual void project(Eigen::Ref<const Point> x, Eigen::Ref<Point> out) const = 0;
  Point projected(Eigen::Ref<const Point> x) const;

  // Open interior test.
  virtual bool contains(Eigen::Ref<const Point> x) const = 0;

  // n independent uniform draws from the interior.  `attempts`, when given,
  // accumulates the total number of proposals (== n for direct samplers).
  virtual void sample_interior(Rng& rng, Eigen::Ref<PointBatch> out,
                               long* attempts = nullptr) const = 0;
  PointBatch sample_interior(Rng& rng, long n, long* attempts = nullptr) const;

  // n independent draws from the boundary under surface (d-1)-measure.
  virtual void sample_boundary(Rng& rng, Eigen::Ref<PointBatch> out) const = 0;
  PointBatch sample_boundary(Rng& rng, long n) const;

  // Axis-aligned bounding box (used by rejection samplers and tests).
  virtual void bounding_box(Point& lo, Point& hi) const = 0;

 protected:
  int dim_;
};

// Open axis-aligned box  prod_i (lo_i, hi_i).
class HyperRectangle : public Domain {
 public:
  using Domain::sample_interior;
  using Domain::sample_boundary;
  HyperRectangle(Point lo, Point hi);
  HyperRectangle(int dim, double lo, double hi);
  static HyperRectangle unit(int dim) { return HyperRectangle(dim, 0.0, 1.0); }

  double distance(Eigen::Ref<const Point> x) const override;
  void project(Eigen::Ref<const Point> x, Eigen::Ref<Point> out) const override;
  bool contains(Eigen::Ref<const Point> x) const override;
  void sample_interior(Rng& rng, Eigen::Ref<PointBatch> out, long* attempts) const override;
  void sample_boundary(Rng& rng, Eigen::Ref<PointBatch> out) const override;
  void bounding_box(Point& lo, Point& hi) const override;

  const Point& lo() const { return lo_; }
  const Point& hi() const { return hi_; }

 private:
  Point lo_, hi_;
};

// Open ball of given radius centered at the origin.
class Ball : public Domain {
 public:
  using Domain::sample_interior;
  using Domain::sample_boundary;
  Ball(double radius, int dim);

  double distance(Eigen::Ref<const Point> x) const override;
  void project(Eigen::Ref<const Point> x, Eigen::Ref<Point> out) const override;
  bool contains(Eigen::Ref<const Point> x) const override;
  void sample_interior(Rng& rng, Eigen::Ref<PointBatch> out, long* attempts) const override;
  void sample_boundary(Rng& rng, Eigen::Ref<PointBatch> out) const override;
  void bounding_box(Point& lo, Point& hi) const override;

  double radius() const { return radius_; }

 private:
  double radius_;
};

// Open shell { a < |x| < b } centered at the origin, 0 < a < b.
class SphericalAnnulus : public Domain {
 public:
  using Domain::sample_interior;
  using Domain::sample_boundary;
  SphericalAnnulus(double a, double b, int dim);

  double distance(Eigen::Ref<const Point> x) const override;
  void project(Eigen::Ref<const Point> x, Eigen::Ref<Point> out) const override;
  bool contains(Eigen::Ref<const Point> x) const override;
  void sample_interior(Rng& rng, Eigen::Ref<PointBatch> out, long* attempts) const override;
  void sample_boundary(Rng& rng, Eigen::Ref<PointBatch> out) const override;
  void bounding_box(Point& lo, Point& hi) const override;

  double inner_radius() const { return a_; }
  double outer_radius() const { return b_; }

 private:
  double a_, b_;
};

// Open box annulus (-1,1)^d \ [-c,c]^d, 0 < c < 1.
class RectangularAnnulus : public Domain {
 public:
  using Domain::sample_interior;
  using Domain::sample_boundary;
  RectangularAnnulus(double c, int dim);

  double distance(Eigen::Ref<const Point> x) const override;
  void project(Eigen::Ref<const Point> x, Eigen::Ref<Point> out) const override;
  bool contains(Eigen::Ref<const Point> x) const override;
  void sample_interior(Rng& rng, Eigen::Ref<PointBatch> out, long* attempts) const override;
  void sample_boundary(Rng& rng, Eigen::Ref<PointBatch> out) const override;
  void bounding_box(Point& lo, Point& hi) const override;

  double inner_half_width() const { return c_; }

  // Distance from x to the inner box [-c,c]^d (0 on its surface).
  double inner_distance(Eigen::Ref<const Point> x) const;
  // Distance from x to the nearest outer face of (-1,1)^d.
  double outer_distance(Eigen::Ref<const Point> x) const;

 private:
  double c_;
};

}  // namespace nwos
