#pragma once

#include <array>
#include <string>
#include <vector>

#include "nwos/network.hpp"
#include "nwos/problem.hpp"

namespace nwos {

// Named benchmark instances. Fixed names: laplace10, poisson50, poisson100,
// poisson500, rect-annulus10, committor10, poisson-ball3, parametric. The box
// families accept any trailing dimension (laplace{d}, poisson{d},
// rect-annulus{d}, committor{d}).
Problem make_problem(const std::string& name);
std::vector<std::string> problem_names();

// Sum-of-terms expressions for user-defined box problems. Grammar:
//   expr   := term (('+'|'-') term)*
//   term   := number | [number '*'] factor
//   factor := ('sin'|'cos') '(' scale '*' var ')' | var ['^' integer]
//   var    := 'x' index          (1-based coordinate)
//   scale  := number | [number '*'] 'pi'
// e.g. "x1^2 + x2^2", "0.1*sin(2*pi*x3) - 4.0".
std::function<double(Eigen::Ref<const Point>)> parse_expression(const std::string& text,
                                                                int dim);
Problem make_box_problem(const std::string& name, int dim, double lo, double hi,
                         const std::string& f_expr, const std::string& g_expr,
                         const std::string& u_expr = "");

// Consistency checks for problems with a known solution.
double max_boundary_mismatch(const Problem& p, long n_samples, std::uint64_t seed);
double max_laplacian_mismatch(const Problem& p, long n_points, double h, std::uint64_t seed);

// Nearest-boundary-value baseline: rel-L2 of x -> g(project(x)) over uniform
// interior points.
double projection_baseline_error(const Problem& p, long n_points, std::uint64_t seed);

// Parametric Poisson family on the unit square: context c in
// D = [0.5,1.0] x [2.5,3.5]^2, forcing m_c(x) = c1 sin(c2 x1) sin(c3 x2),
// PDE laplacian(u) = -m_c with zero boundary values, model input (x, c).
Problem make_parametric_problem();
Point control_box_lo();
Point control_box_hi();
double control_forcing(Eigen::Ref<const Point> x, Eigen::Ref<const Point> c);
// Closed-form solution on the c2 = c3 = pi slice.
double parametric_slice_solution(Eigen::Ref<const Point> x, double c1);
// Restriction of the parametric problem to that slice (fixed context, known
// solution) for slice evaluation.
Problem make_parametric_slice(double c1);

// Reduced control optimization: minimize
//   1/2 int (u_c - u_target)^2 + alpha/2 int m_c^2   over c in D,
// with u_c supplied by a model and the integrals taken on a midpoint grid.
struct ControlModel {
  virtual ~ControlModel() = default;
  // u(x_i, c) for rows x_i.
  virtual Eigen::VectorXd values(const PointBatch& xs, const Point& c) const = 0;
  // du/dc at each row, shape n x 3.
  virtual PointBatch c_gradients(const PointBatch& xs, const Point& c) const = 0;
};

// Wraps a trained network over concatenated (x, c) inputs.
class NetworkControlModel final : public ControlModel {
 public:
  explicit NetworkControlModel(const Network& net);
  Eigen::VectorXd values(const PointBatch& xs, const Point& c) const override;
  PointBatch c_gradients(const PointBatch& xs, const Point& c) const override;

 private:
  const Network* net_;
};

// The analytic slice map c -> u_c, constant in (c2, c3); used as the oracle
// for the one-dimensional reduced objective.
class SliceOracleModel final : public ControlModel {
 public:
  Eigen::VectorXd values(const PointBatch& xs, const Point& c) const override;
  PointBatch c_gradients(const PointBatch& xs, const Point& c) const override;
};

struct ControlOptConfig {
  double alpha = 1e-3;
  int grid = 64;                            // grid x grid midpoint rule
  Point c0;                                 // empty -> center of D
  std::array<bool, 3> free = {true, true, true};  // coordinates allowed to move
  long max_iters = 1000;
  double step0 = 1e4;  // backtracking shrinks it; the objective's curvature is ~1e-4
  double tol = 1e-12;                       // stop when the step shrinks below
};

struct ControlOptResult {
  Point c;
  double objective = 0.0;
  long iterations = 0;
};

ControlOptResult optimize_control(const ControlModel& model, const ControlOptConfig& cfg);
// Ground truth (1/(1+4*alpha*pi^4), pi, pi).
Point control_optimum(double alpha);

}  // namespace nwos
