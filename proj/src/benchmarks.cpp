#include "nwos/benchmarks.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <numbers>
#include <stdexcept>

#include "nwos/stochastic.hpp"

namespace nwos {
namespace {

constexpr double kPi = std::numbers::pi;

using PFn = std::function<double(Eigen::Ref<const Point>, Eigen::Ref<const Point>)>;

PFn lift(std::function<double(Eigen::Ref<const Point>)> f) {
  return [f = std::move(f)](Eigen::Ref<const Point> x, Eigen::Ref<const Point>) {
    return f(x);
  };
}

double pair_product_sum(Eigen::Ref<const Point> x) {
  double s = 0.0;
  for (int i = 0; i + 1 < x.size(); i += 2) s += x[i] * x[i + 1];
  return s;
}

Problem laplace_problem(int d) {
  Problem p;
  p.name = "laplace" + std::to_string(d);
  p.dim = d;
  p.domain = std::make_shared<HyperRectangle>(HyperRectangle::unit(d));
  p.zero_source = true;
  p.source = lift([](Eigen::Ref<const Point>) { return 0.0; });
  p.boundary = lift(pair_product_sum);
  p.solution = lift(pair_product_sum);
  return p;
}

Problem poisson_problem(int d) {
  Problem p;
  p.name = "poisson" + std::to_string(d);
  p.dim = d;
  p.domain = std::make_shared<HyperRectangle>(HyperRectangle::unit(d));
  p.source = lift([d](Eigen::Ref<const Point>) { return 2.0 * d; });
  p.boundary = lift([](Eigen::Ref<const Point> x) { return x.squaredNorm(); });
  p.solution = lift([](Eigen::Ref<const Point> x) { return x.squaredNorm(); });
  return p;
}

Problem rect_annulus_problem(int d) {
  Problem p;
  p.name = "rect-annulus" + std::to_string(d);
  p.dim = d;
  const double inner = std::pow(0.25, 1.0 / d);
  p.domain = std::make_shared<RectangularAnnulus>(inner, d);
  const double inv_d = 1.0 / d;
  auto wave = [inv_d](Eigen::Ref<const Point> x) {
    double s = 0.0;
    for (int i = 0; i < x.size(); ++i) s += std::sin(2.0 * kPi * x[i]);
    return inv_d * s;
  };
  p.source = lift([wave](Eigen::Ref<const Point> x) {
    return -4.0 * kPi * kPi * wave(x);
  });
  p.boundary = lift(wave);
  p.solution = lift(wave);
  return p;
}

Problem committor_problem(int d) {
  if (d < 3) throw std::invalid_argument("committor needs dimension >= 3");
  Problem p;
  p.name = "committor" + std::to_string(d);
  p.dim = d;
  const double a = 1.0, b = 2.0;
  p.domain = std::make_shared<SphericalAnnulus>(a, b, d);
  p.zero_source = true;
  p.source = lift([](Eigen::Ref<const Point>) { return 0.0; });
  const double mid = 0.5 * (a + b);
  p.boundary = lift([mid](Eigen::Ref<const Point> x) {
    return x.norm() > mid ? 1.0 : 0.0;
  });
  const double pa = std::pow(a, 2.0 - d), pb = std::pow(b, 2.0 - d);
  p.solution = lift([pa, pb, d](Eigen::Ref<const Point> x) {
    return (pa - std::pow(x.norm(), 2.0 - d)) / (pa - pb);
  });
  return p;
}

Problem poisson_ball_problem(int d) {
  Problem p;
  p.name = "poisson-ball" + std::to_string(d);
  p.dim = d;
  p.domain = std::make_shared<Ball>(1.0, d);
  p.source = lift([](Eigen::Ref<const Point>) { return 1.0; });
  p.boundary = lift([](Eigen::Ref<const Point>) { return 0.0; });
  p.solution = lift([d](Eigen::Ref<const Point> x) {
    return (x.squaredNorm() - 1.0) / (2.0 * d);
  });
  return p;
}

// --- expression parsing ---

struct Term {
  enum Kind { kConst, kSin, kCos, kPow } kind = kConst;
  double coeff = 0.0;
  double scale = 0.0;  // argument factor for sin/cos
  int var = 0;         // 0-based coordinate for sin/cos/pow
  int power = 1;
};

class ExprParser {
 public:
  ExprParser(const std::string& text, int dim) : s_(text), dim_(dim) {}

  std::vector<Term> parse() {
    std::vector<Term> terms;
    skip_ws();
    double sign = 1.0;
    if (peek() == '+' || peek() == '-') sign = (take() == '-') ? -1.0 : 1.0;
    terms.push_back(parse_term(sign));
    skip_ws();
    while (pos_ < s_.size()) {
      char op = take();
      if (op != '+' && op != '-') fail("expected '+' or '-'");
      terms.push_back(parse_term(op == '-' ? -1.0 : 1.0));
      skip_ws();
    }
    return terms;
  }

 private:
  Term parse_term(double sign) {
    skip_ws();
    Term t;
    double coeff = sign;
    bool saw_number = false;
    if (std::isdigit(peek()) || peek() == '.') {
      coeff *= parse_number();
      saw_number = true;
      skip_ws();
      if (peek() != '*') {
        t.kind = Term::kConst;
        t.coeff = coeff;
        return t;
      }
      take();  // '*'
      skip_ws();
    }
    if (match_word("sin") || match_word("cos")) {
      t.kind = (s_[word_start_] == 's') ? Term::kSin : Term::kCos;
      expect('(');
      t.scale = parse_scale();
      expect('*');
      t.var = parse_var();
      expect(')');
    } else if (peek() == 'x') {
      t.var = parse_var();
      skip_ws();
      if (peek() == '^') {
        take();
        t.power = (int)parse_number();
        if (t.power < 0) fail("power must be non-negative");
      }
      t.kind = Term::kPow;
    } else if (saw_number) {
      fail("expected sin, cos or a coordinate after '*'");
    } else {
      fail("expected a number, sin, cos or a coordinate");
    }
    t.coeff = coeff;
    return t;
  }

  double parse_scale() {
    skip_ws();
    double v = 1.0;
    bool saw_number = false;
    if (std::isdigit(peek()) || peek() == '.') {
      v = parse_number();
      saw_number = true;
      skip_ws();
      if (peek() == '*') {
        std::size_t save = pos_;
        take();
        skip_ws();
        if (match_word("pi")) return v * kPi;
        pos_ = save;  // the '*' belongs to "scale * x"
      }
      return v;
    }
    if (match_word("pi")) return kPi;
    if (!saw_number) fail("expected a number or pi");
    return v;
  }

  int parse_var() {
    skip_ws();
    if (peek() != 'x') fail("expected a coordinate like x1");
    take();
    if (!std::isdigit(peek())) fail("expected a coordinate index");
    long idx = 0;
    while (std::isdigit(peek())) idx = idx * 10 + (take() - '0');
    if (idx < 1 || idx > dim_) fail("coordinate index out of range");
    return (int)(idx - 1);
  }

  double parse_number() {
    skip_ws();
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) fail("expected a number");
    pos_ += (std::size_t)(end - begin);
    return v;
  }

  bool match_word(const char* w) {
    skip_ws();
    std::size_t n = std::strlen(w);
    if (s_.compare(pos_, n, w) != 0) return false;
    word_start_ = pos_;
    pos_ += n;
    return true;
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    take();
  }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  char take() { return s_[pos_++]; }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace((unsigned char)s_[pos_])) ++pos_;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("expression error at offset " + std::to_string(pos_) +
                                ": " + what + " in \"" + s_ + "\"");
  }

  const std::string& s_;
  int dim_;
  std::size_t pos_ = 0;
  std::size_t word_start_ = 0;
};

double eval_terms(const std::vector<Term>& terms, Eigen::Ref<const Point> x) {
  double s = 0.0;
  for (const Term& t : terms) {
    switch (t.kind) {
      case Term::kConst: s += t.coeff; break;
      case Term::kSin: s += t.coeff * std::sin(t.scale * x[t.var]); break;
      case Term::kCos: s += t.coeff * std::cos(t.scale * x[t.var]); break;
      case Term::kPow: {
        double p = 1.0;
        for (int k = 0; k < t.power; ++k) p *= x[t.var];
        s += t.coeff * p;
        break;
      }
    }
  }
  return s;
}

}  // namespace

std::function<double(Eigen::Ref<const Point>)> parse_expression(const std::string& text,
                                                                int dim) {
  if (dim < 1) throw std::invalid_argument("expression dimension must be positive");
  auto terms = ExprParser(text, dim).parse();
  return [terms](Eigen::Ref<const Point> x) { return eval_terms(terms, x); };
}

Problem make_box_problem(const std::string& name, int dim, double lo, double hi,
                         const std::string& f_expr, const std::string& g_expr,
                         const std::string& u_expr) {
  if (hi <= lo) throw std::invalid_argument("box bounds must satisfy lo < hi");
  auto f_terms = ExprParser(f_expr, dim).parse();
  auto g_terms = ExprParser(g_expr, dim).parse();
  Problem p;
  p.name = name;
  p.dim = dim;
  p.domain = std::make_shared<HyperRectangle>(HyperRectangle(dim, lo, hi));
  bool all_zero = true;
  for (const Term& t : f_terms) all_zero = all_zero && t.coeff == 0.0;
  p.zero_source = all_zero;
  p.source = lift([f_terms](Eigen::Ref<const Point> x) { return eval_terms(f_terms, x); });
  p.boundary = lift([g_terms](Eigen::Ref<const Point> x) { return eval_terms(g_terms, x); });
  if (!u_expr.empty()) {
    auto u_terms = ExprParser(u_expr, dim).parse();
    p.solution = lift([u_terms](Eigen::Ref<const Point> x) { return eval_terms(u_terms, x); });
  }
  return p;
}

Problem make_problem(const std::string& name) {
  std::size_t digits = name.size();
  while (digits > 0 && std::isdigit((unsigned char)name[digits - 1])) --digits;
  const std::string base = name.substr(0, digits);
  const bool has_dim = digits < name.size();
  const int d = has_dim ? std::atoi(name.c_str() + digits) : 0;
  if (has_dim && d < 2) throw std::invalid_argument("problem dimension must be >= 2: " + name);

  if (base == "laplace") return laplace_problem(has_dim ? d : 10);
  if (base == "poisson") return poisson_problem(has_dim ? d : 50);
  if (base == "rect-annulus") return rect_annulus_problem(has_dim ? d : 10);
  if (base == "committor") return committor_problem(has_dim ? d : 10);
  if (base == "poisson-ball") return poisson_ball_problem(has_dim ? d : 3);
  if (base == "parametric" && !has_dim) return make_parametric_problem();
  throw std::invalid_argument("unknown problem: " + name);
}

std::vector<std::string> problem_names() {
  return {"laplace10",      "poisson50",  "poisson100",    "poisson500",
          "rect-annulus10", "committor10", "poisson-ball3", "parametric"};
}

double max_boundary_mismatch(const Problem& p, long n_samples, std::uint64_t seed) {
  if (!p.has_solution()) throw std::invalid_argument("problem has no solution to check");
  auto rng = make_stream(seed, StreamKind::BoundarySampler, 0);
  PointBatch xs = p.domain->sample_boundary(rng, n_samples);
  PointBatch ctx(n_samples, p.ctx_dim);
  if (p.ctx_dim > 0) p.sample_ctx(rng, ctx);
  double worst = 0.0;
  for (long i = 0; i < n_samples; ++i)
    worst = std::max(worst,
                     std::abs(p.solution(xs.row(i), ctx.row(i)) - p.boundary(xs.row(i), ctx.row(i))));
  return worst;
}

double max_laplacian_mismatch(const Problem& p, long n_points, double h, std::uint64_t seed) {
  if (!p.has_solution()) throw std::invalid_argument("problem has no solution to check");
  auto rng = make_stream(seed, StreamKind::InteriorSampler, 0);
  PointBatch ctx(1, p.ctx_dim);
  PointBatch xb(1, p.dim);
  double worst = 0.0;
  for (long i = 0; i < n_points; ++i) {
    // Keep the finite-difference stencil strictly inside the domain.
    do {
      p.domain->sample_interior(rng, xb);
    } while (p.domain->distance(xb.row(0)) <= 4.0 * h);
    if (p.ctx_dim > 0) p.sample_ctx(rng, ctx);
    const double center = p.solution(xb.row(0), ctx.row(0));
    double lap = 0.0;
    for (int k = 0; k < p.dim; ++k) {
      const double orig = xb(0, k);
      xb(0, k) = orig + h;
      const double up = p.solution(xb.row(0), ctx.row(0));
      xb(0, k) = orig - h;
      const double down = p.solution(xb.row(0), ctx.row(0));
      xb(0, k) = orig;
      lap += (up + down - 2.0 * center) / (h * h);
    }
    const double f = p.source(xb.row(0), ctx.row(0));
    worst = std::max(worst, std::abs(lap - f) / std::max(1.0, std::abs(f)));
  }
  return worst;
}

double projection_baseline_error(const Problem& p, long n_points, std::uint64_t seed) {
  if (!p.has_solution()) throw std::invalid_argument("problem has no solution to compare");
  auto rng = make_stream(seed, StreamKind::Eval, 0);
  const long chunk = 4096;
  double num = 0.0, den = 0.0;
  Point proj(p.dim);
  PointBatch ctx(1, p.ctx_dim);
  long left = n_points;
  while (left > 0) {
    const long n = std::min(chunk, left);
    PointBatch xs = p.domain->sample_interior(rng, n);
    for (long i = 0; i < n; ++i) {
      if (p.ctx_dim > 0) p.sample_ctx(rng, ctx);
      p.domain->project(xs.row(i), proj);
      const double v = p.boundary(proj, ctx.row(0));
      const double u = p.solution(xs.row(i), ctx.row(0));
      num += (v - u) * (v - u);
      den += u * u;
    }
    left -= n;
  }
  if (den == 0.0) throw std::runtime_error("solution is identically zero on the sample");
  return std::sqrt(num / den);
}

// --- parametric family and control optimization ---

Point control_box_lo() {
  Point c(3);
  c << 0.5, 2.5, 2.5;
  return c;
}

Point control_box_hi() {
  Point c(3);
  c << 1.0, 3.5, 3.5;
  return c;
}

double control_forcing(Eigen::Ref<const Point> x, Eigen::Ref<const Point> c) {
  return c[0] * std::sin(c[1] * x[0]) * std::sin(c[2] * x[1]);
}

double parametric_slice_solution(Eigen::Ref<const Point> x, double c1) {
  return c1 / (2.0 * kPi * kPi) * std::sin(kPi * x[0]) * std::sin(kPi * x[1]);
}

Problem make_parametric_problem() {
  Problem p;
  p.name = "parametric";
  p.dim = 2;
  p.ctx_dim = 3;
  p.domain = std::make_shared<HyperRectangle>(HyperRectangle::unit(2));
  p.source = [](Eigen::Ref<const Point> x, Eigen::Ref<const Point> c) {
    return -control_forcing(x, c);
  };
  p.boundary = [](Eigen::Ref<const Point>, Eigen::Ref<const Point>) { return 0.0; };
  const Point lo = control_box_lo(), hi = control_box_hi();
  p.sample_ctx = [lo, hi](Rng& rng, Eigen::Ref<PointBatch> out) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (long i = 0; i < out.rows(); ++i)
      for (long j = 0; j < out.cols(); ++j)
        out(i, j) = lo[j] + (hi[j] - lo[j]) * unit(rng);
  };
  return p;
}

Problem make_parametric_slice(double c1) {
  Problem p = make_parametric_problem();
  p.name = "parametric-slice";
  Point c(3);
  c << c1, kPi, kPi;
  p.sample_ctx = [c](Rng&, Eigen::Ref<PointBatch> out) {
    out = c.replicate(out.rows(), 1);
  };
  p.solution = [](Eigen::Ref<const Point> x, Eigen::Ref<const Point> ctx) {
    return parametric_slice_solution(x, ctx[0]);
  };
  return p;
}

NetworkControlModel::NetworkControlModel(const Network& net) : net_(&net) {
  if (net.input_dim() != 5)
    throw std::invalid_argument("control model expects a network over (x, c) inputs");
}

namespace {
PointBatch join_xc(const PointBatch& xs, const Point& c) {
  PointBatch in(xs.rows(), xs.cols() + c.size());
  in.leftCols(xs.cols()) = xs;
  in.rightCols(c.size()) = c.replicate(xs.rows(), 1);
  return in;
}
}  // namespace

Eigen::VectorXd NetworkControlModel::values(const PointBatch& xs, const Point& c) const {
  return net_->forward(join_xc(xs, c));
}

PointBatch NetworkControlModel::c_gradients(const PointBatch& xs, const Point& c) const {
  PointBatch grads;
  net_->input_gradient(join_xc(xs, c), grads);
  return grads.rightCols(c.size());
}

Eigen::VectorXd SliceOracleModel::values(const PointBatch& xs, const Point& c) const {
  Eigen::VectorXd v(xs.rows());
  for (long i = 0; i < xs.rows(); ++i) v[i] = parametric_slice_solution(xs.row(i), c[0]);
  return v;
}

PointBatch SliceOracleModel::c_gradients(const PointBatch& xs, const Point& c) const {
  PointBatch g = PointBatch::Zero(xs.rows(), c.size());
  for (long i = 0; i < xs.rows(); ++i)
    g(i, 0) = parametric_slice_solution(xs.row(i), 1.0);
  return g;
}

Point control_optimum(double alpha) {
  Point c(3);
  c << 1.0 / (1.0 + 4.0 * alpha * kPi * kPi * kPi * kPi), kPi, kPi;
  return c;
}

ControlOptResult optimize_control(const ControlModel& model, const ControlOptConfig& cfg) {
  if (cfg.grid < 2) throw std::invalid_argument("quadrature grid must be at least 2x2");
  if (cfg.alpha < 0.0) throw std::invalid_argument("penalty weight must be non-negative");
  if (cfg.step0 <= 0.0) throw std::invalid_argument("initial step must be positive");

  const Point lo = control_box_lo(), hi = control_box_hi();
  Point c = cfg.c0;
  if (c.size() == 0) {
    c = 0.5 * (lo + hi);
  } else if (c.size() != 3) {
    throw std::invalid_argument("control point must have 3 coordinates");
  }
  c = c.cwiseMax(lo).cwiseMin(hi);

  const long g = cfg.grid;
  const long n = g * g;
  const double w = 1.0 / double(n);  // midpoint weight on the unit square
  PointBatch xs(n, 2);
  Eigen::VectorXd target(n);
  for (long i = 0; i < g; ++i)
    for (long j = 0; j < g; ++j) {
      const long r = i * g + j;
      xs(r, 0) = (i + 0.5) / double(g);
      xs(r, 1) = (j + 0.5) / double(g);
      target[r] = parametric_slice_solution(xs.row(r), 1.0);
    }

  auto forcing = [&](const Point& cc) {
    Eigen::VectorXd m(n);
    for (long r = 0; r < n; ++r) m[r] = control_forcing(xs.row(r), cc);
    return m;
  };
  auto objective = [&](const Point& cc) {
    const Eigen::VectorXd u = model.values(xs, cc);
    const Eigen::VectorXd m = forcing(cc);
    const double j = 0.5 * w * (u - target).squaredNorm() +
                     0.5 * cfg.alpha * w * m.squaredNorm();
    if (!std::isfinite(j)) throw std::runtime_error("control objective became non-finite");
    return j;
  };
  auto gradient = [&](const Point& cc) {
    const Eigen::VectorXd u = model.values(xs, cc);
    const Eigen::VectorXd res = u - target;
    const PointBatch du = model.c_gradients(xs, cc);
    Point grad = w * (res.transpose() * du);
    const Eigen::VectorXd m = forcing(cc);
    for (long r = 0; r < n; ++r) {
      const double s2 = std::sin(cc[1] * xs(r, 0)), s3 = std::sin(cc[2] * xs(r, 1));
      grad[0] += cfg.alpha * w * m[r] * (s2 * s3);
      grad[1] += cfg.alpha * w * m[r] * (cc[0] * xs(r, 0) * std::cos(cc[1] * xs(r, 0)) * s3);
      grad[2] += cfg.alpha * w * m[r] * (cc[0] * s2 * xs(r, 1) * std::cos(cc[2] * xs(r, 1)));
    }
    for (int k = 0; k < 3; ++k)
      if (!cfg.free[k]) grad[k] = 0.0;
    return grad;
  };

  double fc = objective(c);
  double step = cfg.step0;
  long it = 0;
  for (; it < cfg.max_iters; ++it) {
    const Point grad = gradient(c);
    Point cand = (c - step * grad).cwiseMax(lo).cwiseMin(hi);
    double move = (cand - c).cwiseAbs().maxCoeff();
    // Backtrack until a sufficient decrease along the projected step.
    bool accepted = false;
    double fcand = fc;
    while (move > 0.0) {
      fcand = objective(cand);
      if (fcand <= fc - 1e-4 * grad.dot(c - cand)) {
        accepted = true;
        break;
      }
      step *= 0.5;
      if (step < cfg.tol) break;
      cand = (c - step * grad).cwiseMax(lo).cwiseMin(hi);
      move = (cand - c).cwiseAbs().maxCoeff();
    }
    if (!accepted || move <= cfg.tol) break;
    c = cand;
    fc = fcand;
    step = std::min(step * 2.0, cfg.step0);
  }
  return {c, fc, it};
}

}  // namespace nwos
