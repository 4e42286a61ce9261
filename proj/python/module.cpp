#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nwos/benchmarks.hpp"
#include "nwos/network.hpp"
#include "nwos/problem.hpp"
#include "nwos/runner.hpp"
#include "nwos/trainer.hpp"
#include "nwos/walker.hpp"

namespace py = pybind11;

namespace {

py::dict result_to_dict(const nwos::TrainResult& res) {
  py::list log;
  for (const auto& e : res.log.entries)
    log.append(py::dict(py::arg("iteration") = e.iteration, py::arg("seconds") = e.seconds,
                        py::arg("loss") = e.loss, py::arg("rel_l2") = e.rel_l2));
  return py::dict(py::arg("iterations_run") = res.iterations_run,
                  py::arg("wall_seconds") = res.wall_seconds,
                  py::arg("mean_wos_steps") = res.mean_wos_steps, py::arg("log") = log);
}

}  // namespace

PYBIND11_MODULE(nwos, m) {
  m.doc() = "walk-on-spheres Poisson solver: Monte-Carlo estimation and neural-solver training";

  py::class_<nwos::Problem>(m, "Problem")
      .def_readonly("name", &nwos::Problem::name)
      .def_readonly("dim", &nwos::Problem::dim)
      .def_readonly("ctx_dim", &nwos::Problem::ctx_dim)
      .def_property_readonly("has_solution", &nwos::Problem::has_solution)
      .def_property_readonly("model_input_dim", &nwos::Problem::model_input_dim)
      .def(
          "solution",
          [](const nwos::Problem& p, const nwos::PointBatch& xs) {
            if (!p.has_solution()) throw std::runtime_error("problem has no reference solution");
            if (p.ctx_dim > 0) throw std::runtime_error("parametric family: use the slice problem");
            Eigen::VectorXd out(xs.rows());
            nwos::Point none;
            for (Eigen::Index i = 0; i < xs.rows(); ++i) out[i] = p.solution(xs.row(i), none);
            return out;
          },
          py::arg("points"), "reference solution values at the given points")
      .def("__repr__", [](const nwos::Problem& p) { return "<Problem " + p.name + ">"; });

  m.def("make_problem", &nwos::make_problem, py::arg("name"),
        "named benchmark problem (laplace10, poisson50, rect-annulus10, committor10, ...)");
  m.def("problem_names", &nwos::problem_names, "the fixed benchmark instance names");
  m.def("make_box_problem", &nwos::make_box_problem, py::arg("name"), py::arg("dim"),
        py::arg("lo"), py::arg("hi"), py::arg("f"), py::arg("g"), py::arg("u") = "",
        "problem on (lo,hi)^dim from sum-of-terms expressions like '2*sin(pi*x1) + x2^2'");

  m.def(
      "estimate",
      [](const nwos::Problem& p, const nwos::PointBatch& points, long n_walks, double epsilon,
         std::uint64_t seed, int threads) {
        if (p.ctx_dim > 0) throw std::runtime_error("parametric family: estimate needs a fixed PDE");
        nwos::WalkProblem wp = p.walk_view();
        nwos::PointwiseEstimate est;
        {
          py::gil_scoped_release release;
          est = nwos::wos_pointwise(wp, points, n_walks, epsilon, seed, threads);
        }
        return py::dict(py::arg("values") = est.values, py::arg("stderrs") = est.stderrs,
                        py::arg("steps_per_point") = est.steps_per_point,
                        py::arg("mean_steps") = est.mean_steps);
      },
      py::arg("problem"), py::arg("points"), py::arg("n_walks") = 10000,
      py::arg("epsilon") = 1e-4, py::arg("seed") = 0, py::arg("threads") = 1,
      "Monte-Carlo solution estimates at the given points (values, stderrs, walk lengths)");

  py::class_<nwos::Network>(m, "Network")
      .def_static("he_initialized", &nwos::Network::he_initialized, py::arg("input_dim"),
                  py::arg("width"), py::arg("depth"), py::arg("seed"))
      .def_property_readonly("input_dim", &nwos::Network::input_dim)
      .def(
          "forward",
          [](const nwos::Network& net, const nwos::PointBatch& xs) { return net.forward(xs); },
          py::arg("points"), "model values at the given input rows")
      .def(
          "save",
          [](const nwos::Network& net, const std::string& path, std::uint64_t seed, long step) {
            nwos::save_checkpoint(path, net, seed, step);
          },
          py::arg("path"), py::arg("seed") = 0, py::arg("step") = 0)
      .def_static(
          "load",
          [](const std::string& path) {
            nwos::LoadedCheckpoint ck = nwos::load_checkpoint(path);
            return py::make_tuple(std::move(ck.net), ck.seed, ck.step);
          },
          py::arg("path"), "load a checkpoint, returning (network, seed, step)");

  py::class_<nwos::WoSConfig>(m, "WoSConfig")
      .def(py::init<>())
      .def_readwrite("epsilon", &nwos::WoSConfig::epsilon)
      .def_readwrite("max_steps", &nwos::WoSConfig::max_steps)
      .def_readwrite("n_traj", &nwos::WoSConfig::n_traj)
      .def_readwrite("use_control_variate", &nwos::WoSConfig::use_control_variate)
      .def_readwrite("interior_draws_per_step", &nwos::WoSConfig::interior_draws_per_step);

  py::class_<nwos::AdamConfig>(m, "AdamConfig")
      .def(py::init<>())
      .def_readwrite("lr0", &nwos::AdamConfig::lr0)
      .def_readwrite("beta1", &nwos::AdamConfig::beta1)
      .def_readwrite("beta2", &nwos::AdamConfig::beta2)
      .def_readwrite("eps", &nwos::AdamConfig::eps)
      .def_readwrite("total_steps", &nwos::AdamConfig::total_steps)
      .def_readwrite("total_decay", &nwos::AdamConfig::total_decay);

  py::class_<nwos::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("iterations", &nwos::TrainConfig::iterations)
      .def_readwrite("domain_batch", &nwos::TrainConfig::domain_batch)
      .def_readwrite("boundary_batch", &nwos::TrainConfig::boundary_batch)
      .def_readwrite("boundary_penalty", &nwos::TrainConfig::boundary_penalty)
      .def_readwrite("buffer_size", &nwos::TrainConfig::buffer_size)
      .def_readwrite("buffer_update_interval", &nwos::TrainConfig::buffer_update_interval)
      .def_readwrite("traj_per_update", &nwos::TrainConfig::traj_per_update)
      .def_readwrite("refine_fraction", &nwos::TrainConfig::refine_fraction)
      .def_readwrite("wos", &nwos::TrainConfig::wos)
      .def_readwrite("adam", &nwos::TrainConfig::adam)
      .def_readwrite("seed", &nwos::TrainConfig::seed)
      .def_readwrite("wall_clock_budget", &nwos::TrainConfig::wall_clock_budget)
      .def_readwrite("eval_points", &nwos::TrainConfig::eval_points)
      .def_readwrite("log_every", &nwos::TrainConfig::log_every)
      .def_readwrite("threads", &nwos::TrainConfig::threads);

  m.def(
      "train",
      [](const nwos::Problem& p, nwos::Network& net, const nwos::TrainConfig& cfg,
         const std::string& method) {
        if (method != "vanilla" && method != "buffered")
          throw std::invalid_argument("method must be vanilla or buffered");
        nwos::TrainResult res;
        {
          py::gil_scoped_release release;
          res = method == "vanilla" ? nwos::train_vanilla(p, net, cfg)
                                    : nwos::train_buffered(p, net, cfg);
        }
        return result_to_dict(res);
      },
      py::arg("problem"), py::arg("net"), py::arg("config") = nwos::TrainConfig{},
      py::arg("method") = "buffered", "fit the network to the problem, mutating it in place");

  m.def(
      "relative_l2_error",
      [](const nwos::Network& net, const nwos::Problem& p, long n_eval, std::uint64_t seed) {
        py::gil_scoped_release release;
        return nwos::relative_l2_error(net, p, n_eval, seed);
      },
      py::arg("net"), py::arg("problem"), py::arg("n_eval") = 10000, py::arg("seed") = 0,
      "Monte-Carlo relative L2 error of the model against the reference solution");

  m.def(
      "optimize_control",
      [](double alpha, int grid) {
        nwos::ControlOptConfig cfg;
        cfg.alpha = alpha;
        cfg.grid = grid;
        cfg.free = {true, false, false};
        cfg.c0.resize(3);
        cfg.c0 << 0.75, 3.14159265358979323846, 3.14159265358979323846;
        nwos::SliceOracleModel oracle;
        nwos::ControlOptResult res = nwos::optimize_control(oracle, cfg);
        return py::dict(py::arg("c") = res.c, py::arg("objective") = res.objective,
                        py::arg("iterations") = res.iterations);
      },
      py::arg("alpha") = 1e-3, py::arg("grid") = 64,
      "recover the forcing amplitude from the closed-form slice map");
  m.def("control_optimum", &nwos::control_optimum, py::arg("alpha") = 1e-3,
        "the analytic optimum of the reduced control objective");
}
