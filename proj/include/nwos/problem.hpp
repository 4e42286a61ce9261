#pragma once

#include <functional>
#include <memory>
#include <string>

#include "nwos/geometry.hpp"
#include "nwos/rng.hpp"
#include "nwos/walker.hpp"

namespace nwos {

// A Poisson problem  -laplace(u) = -f  on a domain with Dirichlet data g,
// optionally with a known solution (used for evaluation only, never by the
// solvers).  ctx_dim > 0 marks a parametric family: every start carries a
// context row c drawn by sample_ctx, the callbacks see it as their second
// argument, and models take [x | c] as input.
struct Problem {
  std::string name;
  int dim = 0;
  int ctx_dim = 0;
  std::shared_ptr<const Domain> domain;
  std::function<double(Eigen::Ref<const Point>, Eigen::Ref<const Point>)> source;
  std::function<double(Eigen::Ref<const Point>, Eigen::Ref<const Point>)> boundary;
  // Analytic solution; empty when none is known.
  std::function<double(Eigen::Ref<const Point>, Eigen::Ref<const Point>)> solution;
  // Uniform draw of context rows (one per output row); empty for fixed PDEs.
  std::function<void(Rng&, Eigen::Ref<PointBatch>)> sample_ctx;
  // Set when f is identically zero so walks skip the source estimation.
  bool zero_source = false;

  bool has_solution() const { return static_cast<bool>(solution); }

  // The walker-facing slice (borrows the domain; keep the Problem alive).
  WalkProblem walk_view() const {
    WalkProblem w;
    w.domain = domain.get();
    w.source = source;
    w.boundary = boundary;
    w.zero_source = zero_source;
    return w;
  }

  int model_input_dim() const { return dim + ctx_dim; }
};

}  // namespace nwos
