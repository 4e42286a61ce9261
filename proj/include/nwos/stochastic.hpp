#pragma once

#include "nwos/geometry.hpp"
#include "nwos/rng.hpp"

namespace nwos {

// Uniform draw from the sphere of radius r around center (normalized Gaussian
// direction; degenerate draws with norm < 1e-30 are redrawn).
void sample_sphere_surface(Rng& rng, Eigen::Ref<const Point> center, double r,
                           Eigen::Ref<Point> out);

// Uniform draw from the open ball of radius r around center.  Returns the
// distance of the draw from the center (radius r * U^(1/d), known exactly —
// callers evaluating the Green's function need it).
double sample_ball_interior(Rng& rng, Eigen::Ref<const Point> center, double r,
                            Eigen::Ref<Point> out);

// Green's function of the ball of radius r scaled by the ball volume,
//   |B_r| * G_r(center, z)   with  rho = |z - center|,  0 < rho <= r:
//   d == 2:  (r^2/2) * log(r/rho)
//   d  > 2:  r^d/(d(d-2)) * (rho^(2-d) - r^(2-d))
// Evaluated in log space so large d neither overflows rho^(2-d) nor loses the
// cancellation near rho == r.  E_{z~U(B_r)}[green_tilde] = r^2/(2d).
// Throws std::domain_error for rho <= 0 (singular draw — redraw upstream),
// rho > r, r <= 0, or d < 2.
double green_tilde(double r, double rho, int d);

// Partial mean of green_tilde under z ~ U(B_r), cut by the radial quantile
// u = (rho/r)^d (uniform on (0,1) for a uniform ball draw):
//   integral_0^u0  green_tilde(r, r u^(1/d), d)  du.
// u0 = 1 recovers the full mean r^2/(2d).  Evaluated by composite
// Gauss-Legendre quadrature in log u, accurate to ~1e-12 relative; the
// integrand is assembled in log space, so quantiles far below the double
// range of rho^(2-d) still contribute correctly.
//
// Why it exists: the single-draw green_tilde estimator is heavy-tailed with
// tail index d/(d-2) (infinite variance for d >= 4), so "sample mean within
// k standard errors" checks are unsound for large d.  A sound check averages
// only draws with u >= u0 (bounded variable, CLT applies) and adds the
// u < u0 contribution exactly from here.
// Throws std::domain_error for r <= 0, d < 2, or u0 outside [0, 1].
double green_tilde_partial_mean(double r, int d, double u0);

}  // namespace nwos
