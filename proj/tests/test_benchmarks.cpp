#include <cmath>
#include <numbers>
#include <stdexcept>

#include "doctest.h"
#include "nwos/benchmarks.hpp"
#include "nwos/stochastic.hpp"
#include "nwos/walker.hpp"

using namespace nwos;

namespace {
constexpr double kPi = std::numbers::pi;

Point make_point(std::initializer_list<double> v) {
  Point p((long)v.size());
  long i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

const Point kNoCtx = Point(0);
}  // namespace

TEST_CASE("named problems carry their closed-form solutions") {
  SUBCASE("pair-product harmonic on the 10d cube") {
    Problem p = make_problem("laplace10");
    CHECK(p.dim == 10);
    CHECK(p.zero_source);
    Point x = Point::Constant(10, 0.5);
    CHECK(p.solution(x, kNoCtx) == doctest::Approx(1.25).epsilon(1e-15));
    CHECK(p.boundary(x, kNoCtx) == p.solution(x, kNoCtx));
  }
  SUBCASE("quadratic source problem at a corner") {
    Problem p = make_problem("poisson50");
    CHECK(p.dim == 50);
    Point corner = Point::Constant(50, 1.0);
    CHECK(p.solution(corner, kNoCtx) == 50.0);
    CHECK(p.boundary(corner, kNoCtx) == 50.0);
    CHECK(p.source(corner, kNoCtx) == 100.0);
    CHECK(make_problem("poisson100").source(Point::Zero(100), kNoCtx) == 200.0);
    CHECK(make_problem("poisson500").dim == 500);
  }
  SUBCASE("hitting probability between two spheres") {
    Problem p = make_problem("committor10");
    Point inner = Point::Zero(10), outer = Point::Zero(10), mid = Point::Zero(10);
    inner[0] = 1.0;
    outer[0] = 2.0;
    mid[0] = 1.5;
    CHECK(p.solution(inner, kNoCtx) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(p.solution(outer, kNoCtx) == doctest::Approx(1.0).epsilon(1e-14));
    // (1 - 1.5^-8) / (1 - 2^-8), evaluated by hand
    CHECK(p.solution(mid, kNoCtx) == doctest::Approx(0.9647501128).epsilon(1e-9));
    CHECK(p.boundary(inner, kNoCtx) == 0.0);
    CHECK(p.boundary(outer, kNoCtx) == 1.0);
  }
  SUBCASE("unit source in the unit ball") {
    Problem p = make_problem("poisson-ball3");
    CHECK(p.solution(Point::Zero(3), kNoCtx) == doctest::Approx(-1.0 / 6.0).epsilon(1e-15));
    CHECK(p.source(Point::Zero(3), kNoCtx) == 1.0);
  }
  SUBCASE("sine wave on the box annulus") {
    Problem p = make_problem("rect-annulus10");
    auto rng = make_stream(31, StreamKind::Test, 0);
    PointBatch xs = p.domain->sample_interior(rng, 10);
    for (long i = 0; i < xs.rows(); ++i) {
      const double u = p.solution(xs.row(i), kNoCtx);
      const double f = p.source(xs.row(i), kNoCtx);
      CHECK(std::abs(f + 4.0 * kPi * kPi * u) < 1e-12);
    }
  }
  SUBCASE("names can carry a custom dimension") {
    CHECK(make_problem("laplace4").dim == 4);
    CHECK(make_problem("committor7").dim == 7);
    CHECK(make_problem("poisson-ball").dim == 3);
  }
  SUBCASE("unknown or invalid names are rejected") {
    CHECK_THROWS_AS(make_problem("helmholtz3"), std::invalid_argument);
    CHECK_THROWS_AS(make_problem("committor2"), std::invalid_argument);
    CHECK_THROWS_AS(make_problem("laplace1"), std::invalid_argument);
    CHECK_THROWS_AS(make_problem("parametric5"), std::invalid_argument);
  }
  SUBCASE("every advertised name constructs") {
    for (const auto& name : problem_names()) CHECK(make_problem(name).dim >= 2);
  }
}

TEST_CASE("shipped solutions satisfy their own boundary data and PDE") {
  for (const auto& name : problem_names()) {
    Problem p = make_problem(name);
    if (!p.has_solution()) continue;
    CAPTURE(name);
    CHECK(max_boundary_mismatch(p, 1000, 7) <= 1e-8);
    const double h = (p.name.rfind("committor", 0) == 0) ? 5e-5 : 1e-4;
    CHECK(max_laplacian_mismatch(p, 100, h, 7) <= 1e-4);
  }
  // The fixed-context slice of the parametric family has a solution too.
  Problem slice = make_parametric_slice(0.8);
  {
    auto rng = make_stream(9, StreamKind::Test, 0);
    PointBatch cs(4, 3);
    slice.sample_ctx(rng, cs);
    for (long i = 0; i < 4; ++i) {
      CHECK(cs(i, 0) == 0.8);
      CHECK(cs(i, 1) == doctest::Approx(3.14159265).epsilon(1e-8));
    }
  }
  CHECK(max_boundary_mismatch(slice, 1000, 7) <= 1e-8);
  CHECK(max_laplacian_mismatch(slice, 100, 1e-4, 7) <= 1e-4);
}

TEST_CASE("nearest-boundary-value baseline lands in its measured band") {
  Problem p = make_problem("poisson100");
  const double rel = projection_baseline_error(p, 1000000, 5);
  CHECK(rel > 2.92e-4 * 0.8);
  CHECK(rel < 2.92e-4 * 1.2);
}

TEST_CASE("expression parser evaluates sums of simple terms") {
  SUBCASE("powers") {
    auto f = parse_expression("x1^2 + x2^2", 2);
    CHECK(f(make_point({0.3, 0.4})) == doctest::Approx(0.25).epsilon(1e-15));
    auto g = parse_expression("x1^3", 1);
    CHECK(g(make_point({0.5})) == 0.125);
    auto lin = parse_expression("-x1 + 1", 2);
    CHECK(lin(make_point({0.25, 0.9})) == 0.75);
  }
  SUBCASE("trig with pi scales") {
    auto f = parse_expression("0.1*sin(2*pi*x3) - 4.0", 3);
    CHECK(f(make_point({0.0, 0.0, 0.25})) == doctest::Approx(-3.9).epsilon(1e-15));
    auto g = parse_expression("sin(pi*x1)", 1);
    CHECK(std::abs(g(make_point({1.0}))) < 1e-14);
    auto h = parse_expression("2*cos(3.0*x2)", 2);
    CHECK(h(make_point({0.0, 0.0})) == 2.0);
  }
  SUBCASE("constants alone") {
    CHECK(parse_expression("3", 1)(make_point({0.9})) == 3.0);
    CHECK(parse_expression("1.5 - 0.5", 1)(make_point({0.0})) == 1.0);
  }
  SUBCASE("malformed input names the offset") {
    CHECK_THROWS_AS(parse_expression("x1 * x2", 2), std::invalid_argument);
    CHECK_THROWS_AS(parse_expression("x0 + 1", 2), std::invalid_argument);
    CHECK_THROWS_AS(parse_expression("x3", 2), std::invalid_argument);
    CHECK_THROWS_AS(parse_expression("sin(x1)", 1), std::invalid_argument);
    CHECK_THROWS_AS(parse_expression("", 1), std::invalid_argument);
    CHECK_THROWS_AS(parse_expression("2 +", 1), std::invalid_argument);
    try {
      parse_expression("x1 + @", 1);
      CHECK(false);
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
  }
}

TEST_CASE("expression-defined box problems pass the consistency checks") {
  SUBCASE("quadratic") {
    Problem p = make_box_problem("custom-quadratic", 2, 0.0, 1.0, "4", "x1^2 + x2^2",
                                 "x1^2 + x2^2");
    CHECK_FALSE(p.zero_source);
    CHECK(max_boundary_mismatch(p, 1000, 7) <= 1e-8);
    CHECK(max_laplacian_mismatch(p, 100, 1e-4, 7) <= 1e-4);
  }
  SUBCASE("sine wave") {
    // laplacian of 0.5 sin(2 pi x1) is -2 pi^2 sin(2 pi x1)
    Problem p = make_box_problem("custom-wave", 2, 0.0, 1.0,
                                 "-19.739208802178716*sin(2*pi*x1)", "0.5*sin(2*pi*x1)",
                                 "0.5*sin(2*pi*x1)");
    CHECK(max_boundary_mismatch(p, 1000, 7) <= 1e-8);
    CHECK(max_laplacian_mismatch(p, 100, 1e-4, 7) <= 1e-4);
  }
  SUBCASE("a zero source expression enables the source-free fast path") {
    Problem p = make_box_problem("custom-harmonic", 2, 0.0, 1.0, "0", "x1", "x1");
    CHECK(p.zero_source);
    CHECK(max_laplacian_mismatch(p, 100, 1e-4, 7) <= 1e-4);
  }
}

TEST_CASE("the parametric family wires contexts through walks") {
  Problem p = make_parametric_problem();
  CHECK(p.dim == 2);
  CHECK(p.ctx_dim == 3);
  CHECK(p.model_input_dim() == 5);
  CHECK_FALSE(p.has_solution());

  Point x = make_point({0.5, 0.5});
  Point c = make_point({1.0, kPi, kPi});
  CHECK(p.source(x, c) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(p.boundary(x, c) == 0.0);

  SUBCASE("sampled controls stay inside their box") {
    auto rng = make_stream(8, StreamKind::Test, 0);
    PointBatch cs(1000, 3);
    p.sample_ctx(rng, cs);
    const Point lo = control_box_lo(), hi = control_box_hi();
    for (long i = 0; i < cs.rows(); ++i)
      for (int j = 0; j < 3; ++j) {
        CHECK(cs(i, j) >= lo[j]);
        CHECK(cs(i, j) <= hi[j]);
      }
  }

  SUBCASE("walks on a fixed slice reproduce its closed form") {
    PointBatch starts(3, 2);
    starts << 0.5, 0.5, 0.25, 0.5, 0.7, 0.3;
    PointBatch ctx = make_point({0.8, kPi, kPi}).replicate(3, 1);
    WalkProblem wp = p.walk_view();
    WalkRequest req;
    req.problem = &wp;
    req.starts = &starts;
    req.ctx = &ctx;
    req.cfg.epsilon = 1e-4;
    req.cfg.n_traj = 20000;
    req.seed = 17;
    WoSResult res = walk(req);
    for (long i = 0; i < 3; ++i) {
      auto vals = res.per_trajectory_targets.segment(i * 20000, 20000);
      const double mean = vals.mean();
      const double sd = std::sqrt((vals.array() - mean).square().sum() / (20000 - 1));
      const double se = sd / std::sqrt(20000.0);
      const double truth = parametric_slice_solution(starts.row(i), 0.8);
      CHECK(std::abs(mean - truth) <= 3.0 * se + 5.0 * req.cfg.epsilon);
    }
  }
}

TEST_CASE("control optimization recovers the closed-form optimum from the oracle") {
  // 1/(1 + 4e-3 * pi^4) evaluated by hand
  CHECK(control_optimum(1e-3)[0] == doctest::Approx(0.7196128).epsilon(1e-6));
  CHECK(control_optimum(1e-3)[1] == kPi);

  SliceOracleModel oracle;
  SUBCASE("one-dimensional descent from the center") {
    ControlOptConfig cfg;
    cfg.c0 = make_point({0.75, kPi, kPi});
    cfg.free = {true, false, false};
    ControlOptResult res = optimize_control(oracle, cfg);
    CHECK(std::abs(res.c[0] - control_optimum(cfg.alpha)[0]) < 1e-3);
    CHECK(res.c[1] == kPi);
    CHECK(res.c[2] == kPi);
    CHECK(res.objective >= 0.0);
  }
  SUBCASE("descent from the box corner reaches the same point") {
    ControlOptConfig cfg;
    cfg.c0 = make_point({0.5, kPi, kPi});
    cfg.free = {true, false, false};
    ControlOptResult res = optimize_control(oracle, cfg);
    CHECK(std::abs(res.c[0] - control_optimum(cfg.alpha)[0]) < 1e-3);
  }
  SUBCASE("zero penalty pushes the control to its upper bound") {
    ControlOptConfig cfg;
    cfg.alpha = 0.0;
    cfg.c0 = make_point({0.75, kPi, kPi});
    cfg.free = {true, false, false};
    ControlOptResult res = optimize_control(oracle, cfg);
    CHECK(std::abs(res.c[0] - 1.0) < 1e-6);
  }
  SUBCASE("a model with no signal is driven to the penalty minimizer") {
    // Zero response: the data term is constant, so only the penalty moves c —
    // downhill to c1 = 0.5 and the mean of sin^2 falling toward 3.5.
    Network net(5, 4, 2);  // zero-initialized parameters
    NetworkControlModel model(net);
    ControlOptConfig cfg;
    ControlOptResult res = optimize_control(model, cfg);
    CHECK(res.c[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(res.c[1] == doctest::Approx(3.5).epsilon(1e-9));
    CHECK(res.c[2] == doctest::Approx(3.5).epsilon(1e-9));
  }
  SUBCASE("invalid configurations are rejected") {
    ControlOptConfig cfg;
    cfg.grid = 1;
    CHECK_THROWS_AS(optimize_control(oracle, cfg), std::invalid_argument);
    cfg = ControlOptConfig{};
    cfg.alpha = -1.0;
    CHECK_THROWS_AS(optimize_control(oracle, cfg), std::invalid_argument);
    cfg = ControlOptConfig{};
    cfg.step0 = 0.0;
    CHECK_THROWS_AS(optimize_control(oracle, cfg), std::invalid_argument);
    cfg = ControlOptConfig{};
    cfg.c0 = make_point({0.5, 0.5});
    CHECK_THROWS_AS(optimize_control(oracle, cfg), std::invalid_argument);
    Network tiny(3, 4, 2);
    CHECK_THROWS_AS(NetworkControlModel{tiny}, std::invalid_argument);
  }
}
