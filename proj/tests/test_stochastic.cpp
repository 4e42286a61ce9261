#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "nwos/rng.hpp"
#include "nwos/stochastic.hpp"

using namespace nwos;

namespace {

constexpr double kChi2Df63 = 103.442;  // chi-square quantile 1 - 1e-3

// Mean of green_tilde over n uniform ball draws, with draws whose radial
// quantile u = (rho/r)^d falls below u0 zeroed out and replaced by their
// exact contribution.  u0 = 0 is the plain sample mean.
struct MeanWithError {
  double estimate;
  double stderr_of_mc_part;
};

MeanWithError capped_green_mean(double r, int d, long n, double u0, std::uint64_t seed) {
  auto rng = make_stream(seed, StreamKind::Test, static_cast<std::uint64_t>(d));
  const Point center = Point::Zero(d);
  Point z(d);
  const double rho_cut = r * std::pow(u0, 1.0 / static_cast<double>(d));
  double sum = 0.0, sumsq = 0.0;
  for (long i = 0; i < n; ++i) {
    const double rho = sample_ball_interior(rng, center, r, z);
    const double g = rho >= rho_cut ? green_tilde(r, rho, d) : 0.0;
    sum += g;
    sumsq += g * g;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(sumsq / static_cast<double>(n) - mean * mean, 0.0);
  return {mean + green_tilde_partial_mean(r, d, u0), std::sqrt(var / static_cast<double>(n))};
}

}  // namespace

TEST_CASE("sphere surface draws are isotropic with exact radius") {
  const int d = 3;
  Point center(d);
  center << 0.3, -0.2, 0.7;
  auto rng = make_stream(31, StreamKind::Test, 0);
  Point x(d);

  Point mean = Point::Zero(d);
  const long n = 1000000;
  for (long i = 0; i < n; ++i) {
    sample_sphere_surface(rng, center, 1.0, x);
    mean += x;
  }
  mean /= static_cast<double>(n);
  for (int i = 0; i < d; ++i) CHECK(std::abs(mean[i] - center[i]) < 4.0 / std::sqrt(n));

  for (long i = 0; i < 100000; ++i) {
    sample_sphere_surface(rng, center, 2.0, x);
    CHECK(std::abs((x - center).norm() - 2.0) <= 2e-12);
  }
  CHECK_THROWS_AS(sample_sphere_surface(rng, center, 0.0, x), std::domain_error);
}

TEST_CASE("planar sphere draws have uniform angles") {
  auto rng = make_stream(37, StreamKind::Test, 0);
  const Point center = Point::Zero(2);
  Point x(2);
  const long n = 1000000;
  std::vector<long> bins(64, 0);
  const double pi = std::acos(-1.0);
  for (long i = 0; i < n; ++i) {
    sample_sphere_surface(rng, center, 1.0, x);
    const double angle = std::atan2(x[1], x[0]);  // [-pi, pi]
    int b = static_cast<int>((angle + pi) / (2.0 * pi) * 64.0);
    ++bins[std::clamp(b, 0, 63)];
  }
  const double expected = n / 64.0;
  double stat = 0.0;
  for (long c : bins) stat += (c - expected) * (c - expected) / expected;
  CHECK(stat < kChi2Df63);
}

TEST_CASE("ball interior draws are uniform in volume") {
  auto rng = make_stream(41, StreamKind::Test, 0);

  {  // d=2: P(|x| <= 0.5) is the area ratio 0.25
    const Point center = Point::Zero(2);
    Point x(2);
    long hits = 0;
    const long n = 1000000;
    for (long i = 0; i < n; ++i) {
      const double rho = sample_ball_interior(rng, center, 1.0, x);
      CHECK_FALSE(rho > 1.0);
      if (rho <= 0.5) ++hits;
    }
    CHECK(std::abs(hits / static_cast<double>(n) - 0.25) < 0.002);
  }

  {  // d=10: E[|x|] = d/(d+1)
    const Point center = Point::Zero(10);
    Point x(10);
    double sum = 0.0;
    const long n = 1000000;
    for (long i = 0; i < n; ++i) sum += sample_ball_interior(rng, center, 1.0, x);
    CHECK(std::abs(sum / static_cast<double>(n) - 10.0 / 11.0) < 5e-4);
  }

  {  // returned rho is the exact distance from the center
    Point center(5);
    center << 1.0, -2.0, 0.5, 0.0, 3.0;
    Point x(5);
    for (long i = 0; i < 10000; ++i) {
      const double rho = sample_ball_interior(rng, center, 3.0, x);
      CHECK(std::abs((x - center).norm() - rho) <= 3e-12);
      CHECK(rho <= 3.0);
    }
  }
}

TEST_CASE("green function closed-form values") {
  for (int d : {2, 3, 10, 50, 500})
    for (double r : {0.1, 1.0, 3.0}) CHECK(green_tilde(r, r, d) == 0.0);

  CHECK(green_tilde(1.0, 0.5, 3) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(green_tilde(1.0, 0.5, 2) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-14));

  // Quadratic scaling in length units, both branches.
  auto rng = make_stream(43, StreamKind::Test, 0);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  for (int d : {2, 3, 7, 50}) {
    for (double s : {1e-3, 7.0, 1e3}) {
      const double r = unif(rng) + 0.5;
      const double rho = r * unif(rng);
      const double base = green_tilde(r, rho, d);
      CHECK(green_tilde(s * r, s * rho, d) == doctest::Approx(s * s * base).epsilon(1e-12));
    }
  }

  // Strictly decreasing in rho, continuous (and 0) at rho = r.
  double prev = green_tilde(1.0, 0.05, 10);
  for (double rho = 0.10; rho <= 1.0; rho += 0.05) {
    const double g = green_tilde(1.0, rho, 10);
    CHECK(g < prev);
    prev = g;
  }
  const double near_edge = green_tilde(1.0, 1.0 - 1e-13, 10);
  CHECK(near_edge > 0.0);
  CHECK(near_edge < 1e-12);

  // No overflow at d = 500, and no cancellation loss near rho = r.
  const double big = green_tilde(1.0, 0.5, 500);
  CHECK(std::isfinite(big));
  CHECK(big > 1e100);
  const double rho9 = 1.0 - 1e-9;
  CHECK(green_tilde(1.0, rho9, 3) ==
        doctest::Approx((1.0 / 3.0) * (1.0 / rho9 - 1.0)).epsilon(1e-6));

  CHECK_THROWS_AS(green_tilde(1.0, 0.0, 3), std::domain_error);
  CHECK_THROWS_AS(green_tilde(1.0, -0.1, 3), std::domain_error);
  CHECK_THROWS_AS(green_tilde(1.0, 1.0 + 1e-7, 3), std::domain_error);
  CHECK_THROWS_AS(green_tilde(0.0, 0.5, 3), std::domain_error);
  CHECK_THROWS_AS(green_tilde(1.0, 0.5, 1), std::domain_error);
}

TEST_CASE("partial mean quadrature matches closed forms") {
  // Full mean: E[green_tilde] = r^2/(2d) for any d.
  for (int d : {2, 3, 10, 50, 500})
    for (double r : {0.1, 1.0, 3.0}) {
      const double want = r * r / (2.0 * d);
      CHECK(green_tilde_partial_mean(r, d, 1.0) == doctest::Approx(want).epsilon(1e-10));
    }

  // d=3 closed form: r^2 (u^(2/3)/2 - u/3);  d=2: (r^2/4) u (1 - log u).
  for (double u0 : {1e-6, 1e-3, 0.1, 0.5, 1.0}) {
    CHECK(green_tilde_partial_mean(2.0, 3, u0) ==
          doctest::Approx(4.0 * (0.5 * std::pow(u0, 2.0 / 3.0) - u0 / 3.0)).epsilon(1e-10));
    CHECK(green_tilde_partial_mean(2.0, 2, u0) ==
          doctest::Approx(1.0 * u0 * (1.0 - std::log(u0))).epsilon(1e-10));
  }

  CHECK(green_tilde_partial_mean(1.0, 50, 0.0) == 0.0);
  CHECK(green_tilde_partial_mean(1.0, 50, 1e-6) > 0.0);
  CHECK(green_tilde_partial_mean(1.0, 50, 1e-6) < green_tilde_partial_mean(1.0, 50, 1e-3));

  CHECK_THROWS_AS(green_tilde_partial_mean(1.0, 50, -0.1), std::domain_error);
  CHECK_THROWS_AS(green_tilde_partial_mean(1.0, 50, 1.1), std::domain_error);
  CHECK_THROWS_AS(green_tilde_partial_mean(0.0, 50, 0.5), std::domain_error);
  CHECK_THROWS_AS(green_tilde_partial_mean(1.0, 1, 0.5), std::domain_error);
}

TEST_CASE("mean of green over ball draws equals r^2/(2d)") {
  // Low d: the single-draw estimator has finite variance, plain mean works.
  for (int d : {2, 3}) {
    const auto [est, se] = capped_green_mean(1.0, d, 1000000, 0.0, 47);
    CHECK(std::abs(est - 1.0 / (2.0 * d)) <= 3.0 * se);
  }
  // High d: tail index d/(d-2) makes the plain variance infinite; average the
  // bounded part (u >= 1e-5) and add the small-quantile slice exactly.
  for (int d : {10, 50}) {
    const auto [est, se] = capped_green_mean(1.0, d, 1000000, 1e-5, 47);
    CHECK(se > 0.0);
    CHECK(std::abs(est - 1.0 / (2.0 * d)) <= 3.0 * se);
  }
}

TEST_CASE("seeded streams are reproducible and distinct") {
  auto a1 = make_stream(123, StreamKind::WalkShard, 5);
  auto a2 = make_stream(123, StreamKind::WalkShard, 5);
  CHECK(a1() == a2());
  CHECK(a1() == a2());

  auto base = make_stream(123, StreamKind::WalkShard, 6);
  auto kind = make_stream(123, StreamKind::Eval, 5);
  auto seed = make_stream(124, StreamKind::WalkShard, 5);
  const auto first = make_stream(123, StreamKind::WalkShard, 5)();
  CHECK(base() != first);
  CHECK(kind() != first);
  CHECK(seed() != first);
}
