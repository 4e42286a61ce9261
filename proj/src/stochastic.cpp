#include "nwos/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nwos {

namespace {

// Fills out with a unit direction; redraws the Gaussian vector if its norm is
// degenerate (never in practice, but keeps the map well defined).
void draw_unit_direction(Rng& rng, Eigen::Ref<Point> out) {
  std::normal_distribution<double> normal;
  while (true) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal(rng);
    const double norm = out.norm();
    if (norm >= 1e-30) {
      out /= norm;
      return;
    }
  }
}

// 16-point Gauss-Legendre rule on [-1, 1], positive half (nodes are symmetric).
constexpr int kGlHalf = 8;
constexpr double kGlNode[kGlHalf] = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
    0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
constexpr double kGlWeight[kGlHalf] = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};

}  // namespace

void sample_sphere_surface(Rng& rng, Eigen::Ref<const Point> center, double r,
                           Eigen::Ref<Point> out) {
  if (r <= 0.0) throw std::domain_error("sample_sphere_surface: radius must be positive");
  draw_unit_direction(rng, out);
  out = center + r * out;
}

double sample_ball_interior(Rng& rng, Eigen::Ref<const Point> center, double r,
                            Eigen::Ref<Point> out) {
  if (r <= 0.0) throw std::domain_error("sample_ball_interior: radius must be positive");
  draw_unit_direction(rng, out);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double d = static_cast<double>(out.size());
  const double rho = r * std::pow(unif(rng), 1.0 / d);
  out = center + rho * out;
  return rho;
}

double green_tilde(double r, double rho, int d) {
  if (d < 2) throw std::domain_error("green_tilde: dimension must be >= 2");
  if (r <= 0.0) throw std::domain_error("green_tilde: radius must be positive");
  if (rho <= 0.0) throw std::domain_error("green_tilde: singular draw (rho <= 0)");
  if (rho > r) throw std::domain_error("green_tilde: rho exceeds the ball radius");
  if (d == 2) return 0.5 * r * r * std::log(r / rho);
  // r^d * rho^(2-d) / (d(d-2)) * (1 - (rho/r)^(d-2)), assembled in log space.
  const double dd = static_cast<double>(d);
  const double amplitude =
      std::exp(dd * std::log(r) + (2.0 - dd) * std::log(rho) - std::log(dd * (dd - 2.0)));
  return amplitude * (-std::expm1((dd - 2.0) * std::log(rho / r)));
}

double green_tilde_partial_mean(double r, int d, double u0) {
  if (d < 2) throw std::domain_error("green_tilde_partial_mean: dimension must be >= 2");
  if (r <= 0.0) throw std::domain_error("green_tilde_partial_mean: radius must be positive");
  if (!(u0 >= 0.0 && u0 <= 1.0))
    throw std::domain_error("green_tilde_partial_mean: quantile cut must lie in [0, 1]");
  if (u0 == 0.0) return 0.0;
  const double dd = static_cast<double>(d);
  // Integrand of the substitution t = log u:  green_tilde(r, r e^(t/d), d) e^t.
  // It decays like e^(2t/d), so truncating max(300, 16 d) below log u0 drops
  // an e^-32 fraction of the value.  The d > 2 branch stays in log space
  // because green_tilde alone overflows double long before the product does.
  const auto integrand = [&](double t) {
    if (d == 2) return 0.25 * r * r * (-t) * std::exp(t);
    return std::exp(2.0 * std::log(r) + 2.0 / dd * t - std::log(dd * (dd - 2.0)) +
                    std::log1p(-std::exp((dd - 2.0) / dd * t)));
  };
  const double t_hi = std::log(u0);
  const double span = std::max(300.0, 16.0 * dd);
  const long panels = static_cast<long>(std::ceil(span));
  const double width = span / static_cast<double>(panels);
  const double half = 0.5 * width;
  double total = 0.0;
  for (long p = 0; p < panels; ++p) {
    const double mid = t_hi - (static_cast<double>(p) + 0.5) * width;
    double panel = 0.0;
    for (int i = 0; i < kGlHalf; ++i)
      panel += kGlWeight[i] *
               (integrand(mid - half * kGlNode[i]) + integrand(mid + half * kGlNode[i]));
    total += panel;
  }
  return half * total;
}

}  // namespace nwos
