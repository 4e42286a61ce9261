#include "nwos/runner.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <thread>

#include "json.hpp"
#include "nwos/io.hpp"
#include "nwos/network.hpp"

namespace nwos {
namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void bad_value(const std::string& where, const std::string& key,
                            const std::string& value, const char* want) {
  throw ConfigError(where + ": " + key + " = '" + value + "' is not " + want);
}

long to_long(const std::string& where, const std::string& key, const std::string& v) {
  long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(where, key, v, "an integer");
  return out;
}

std::uint64_t to_u64(const std::string& where, const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    bad_value(where, key, v, "a non-negative integer");
  return out;
}

double to_double(const std::string& where, const std::string& key, const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  double out = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || v.empty()) bad_value(where, key, v, "a number");
  return out;
}

bool to_bool(const std::string& where, const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(where, key, v, "a boolean (true/false)");
}

// One handler per configuration key, shared by config files and flag
// overrides so both spellings accept exactly the same values.
using Setter = std::function<void(RunConfig&, const std::string& value, const std::string& where,
                                  const std::string& key)>;

const std::map<std::string, Setter>& key_table() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto str = [&](const std::string& k, std::string RunConfig::* field) {
      t[k] = [field](RunConfig& c, const std::string& v, const std::string&, const std::string&) {
        c.*field = v;
      };
    };
    auto num = [&](const std::string& k, long RunConfig::* field) {
      t[k] = [field](RunConfig& c, const std::string& v, const std::string& w,
                     const std::string& key) { c.*field = to_long(w, key, v); };
    };
    auto dbl = [&](const std::string& k, double RunConfig::* field) {
      t[k] = [field](RunConfig& c, const std::string& v, const std::string& w,
                     const std::string& key) { c.*field = to_double(w, key, v); };
    };

    str("problem", &RunConfig::problem);
    str("method", &RunConfig::method);
    str("output_dir", &RunConfig::output_dir);
    t["seed"] = [](RunConfig& c, const std::string& v, const std::string& w,
                   const std::string& k) { c.seed = to_u64(w, k, v); };
    t["threads"] = [](RunConfig& c, const std::string& v, const std::string& w,
                      const std::string& k) { c.threads = static_cast<int>(to_long(w, k, v)); };

    t["problem.dim"] = [](RunConfig& c, const std::string& v, const std::string& w,
                          const std::string& k) { c.dim = static_cast<int>(to_long(w, k, v)); };
    dbl("problem.lo", &RunConfig::lo);
    dbl("problem.hi", &RunConfig::hi);
    str("problem.f", &RunConfig::f_expr);
    str("problem.g", &RunConfig::g_expr);
    str("problem.u", &RunConfig::u_expr);

    num("net.width", &RunConfig::width);
    num("net.depth", &RunConfig::depth);

    auto tnum = [&](const std::string& k, long TrainConfig::* field) {
      t[k] = [field](RunConfig& c, const std::string& v, const std::string& w,
                     const std::string& key) { c.train.*field = to_long(w, key, v); };
    };
    auto tdbl = [&](const std::string& k, double TrainConfig::* field) {
      t[k] = [field](RunConfig& c, const std::string& v, const std::string& w,
                     const std::string& key) { c.train.*field = to_double(w, key, v); };
    };
    tnum("train.iterations", &TrainConfig::iterations);
    tnum("train.domain_batch", &TrainConfig::domain_batch);
    tnum("train.boundary_batch", &TrainConfig::boundary_batch);
    tdbl("train.boundary_penalty", &TrainConfig::boundary_penalty);
    tnum("train.buffer_size", &TrainConfig::buffer_size);
    tnum("train.buffer_update_interval", &TrainConfig::buffer_update_interval);
    tnum("train.traj_per_update", &TrainConfig::traj_per_update);
    tdbl("train.refine_fraction", &TrainConfig::refine_fraction);
    tnum("train.eval_points", &TrainConfig::eval_points);
    tnum("train.log_every", &TrainConfig::log_every);
    tdbl("train.budget_seconds", &TrainConfig::wall_clock_budget);

    t["wos.epsilon"] = [](RunConfig& c, const std::string& v, const std::string& w,
                          const std::string& k) { c.train.wos.epsilon = to_double(w, k, v); };
    t["wos.max_steps"] = [](RunConfig& c, const std::string& v, const std::string& w,
                            const std::string& k) { c.train.wos.max_steps = to_long(w, k, v); };
    t["wos.control_variate"] = [](RunConfig& c, const std::string& v, const std::string& w,
                                  const std::string& k) {
      c.train.wos.use_control_variate = to_bool(w, k, v);
    };
    t["wos.interior_draws"] = [](RunConfig& c, const std::string& v, const std::string& w,
                                 const std::string& k) {
      c.train.wos.interior_draws_per_step = static_cast<int>(to_long(w, k, v));
    };

    auto adbl = [&](const std::string& k, double AdamConfig::* field) {
      t[k] = [field](RunConfig& c, const std::string& v, const std::string& w,
                     const std::string& key) { c.train.adam.*field = to_double(w, key, v); };
    };
    adbl("adam.lr0", &AdamConfig::lr0);
    adbl("adam.beta1", &AdamConfig::beta1);
    adbl("adam.beta2", &AdamConfig::beta2);
    adbl("adam.eps", &AdamConfig::eps);
    adbl("adam.total_decay", &AdamConfig::total_decay);
    t["adam.total_steps"] = [](RunConfig& c, const std::string& v, const std::string& w,
                               const std::string& k) {
      c.train.adam.total_steps = to_long(w, k, v);
    };

    str("estimate.points", &RunConfig::points_file);
    num("estimate.n_walks", &RunConfig::n_walks);

    str("eval.checkpoint", &RunConfig::checkpoint);
    num("eval.n_eval", &RunConfig::n_eval);

    str("control.checkpoint", &RunConfig::checkpoint);
    dbl("control.alpha", &RunConfig::alpha);
    t["control.grid"] = [](RunConfig& c, const std::string& v, const std::string& w,
                           const std::string& k) { c.grid = static_cast<int>(to_long(w, k, v)); };
    t["control.oracle"] = [](RunConfig& c, const std::string& v, const std::string& w,
                             const std::string& k) { c.oracle = to_bool(w, k, v); };
    return t;
  }();
  return table;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int effective_threads(const RunConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

void write_json(const std::string& path, const json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("write failed: " + path);
}

json point_to_json(Eigen::Ref<const Point> p) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) arr.push_back(p[i]);
  return arr;
}

}  // namespace

void apply_key(RunConfig& cfg, const std::string& section, const std::string& key,
               const std::string& value, const std::string& where) {
  std::string canon = (section.empty() || section == "run") ? key : section + "." + key;
  auto it = key_table().find(canon);
  if (it == key_table().end())
    throw ConfigError(where + ": unknown configuration key '" + canon + "'");
  it->second(cfg, value, where, canon);
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  std::string line, section;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string where = path + " line " + std::to_string(lineno);
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      static const char* known[] = {"run",  "problem", "net",  "train",  "wos",
                                    "adam", "estimate", "eval", "control"};
      bool ok = false;
      for (const char* k : known) ok = ok || section == k;
      if (!ok) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    apply_key(cfg, section, key, value, where);
  }
}

std::map<std::string, std::string> RunConfig::semantic() const {
  std::map<std::string, std::string> m;
  m["subcommand"] = subcommand;
  m["problem"] = problem;
  m["method"] = method;
  m["seed"] = std::to_string(seed);
  m["problem.dim"] = std::to_string(dim);
  m["problem.lo"] = format_double(lo);
  m["problem.hi"] = format_double(hi);
  m["problem.f"] = f_expr;
  m["problem.g"] = g_expr;
  m["problem.u"] = u_expr;
  m["net.width"] = std::to_string(width);
  m["net.depth"] = std::to_string(depth);
  m["train.iterations"] = std::to_string(train.iterations);
  m["train.domain_batch"] = std::to_string(train.domain_batch);
  m["train.boundary_batch"] = std::to_string(train.boundary_batch);
  m["train.boundary_penalty"] = format_double(train.boundary_penalty);
  m["train.buffer_size"] = std::to_string(train.buffer_size);
  m["train.buffer_update_interval"] = std::to_string(train.buffer_update_interval);
  m["train.traj_per_update"] = std::to_string(train.traj_per_update);
  m["train.refine_fraction"] = format_double(train.refine_fraction);
  m["train.eval_points"] = std::to_string(train.eval_points);
  m["train.log_every"] = std::to_string(train.log_every);
  m["train.budget_seconds"] = format_double(train.wall_clock_budget);
  m["wos.epsilon"] = format_double(train.wos.epsilon);
  m["wos.max_steps"] = std::to_string(train.wos.max_steps);
  m["wos.control_variate"] = train.wos.use_control_variate ? "true" : "false";
  m["wos.interior_draws"] = std::to_string(train.wos.interior_draws_per_step);
  m["adam.lr0"] = format_double(train.adam.lr0);
  m["adam.beta1"] = format_double(train.adam.beta1);
  m["adam.beta2"] = format_double(train.adam.beta2);
  m["adam.eps"] = format_double(train.adam.eps);
  m["adam.total_steps"] = std::to_string(train.adam.total_steps);
  m["adam.total_decay"] = format_double(train.adam.total_decay);
  m["estimate.points"] = points_file;
  m["estimate.n_walks"] = std::to_string(n_walks);
  m["eval.checkpoint"] = checkpoint;
  m["eval.n_eval"] = std::to_string(n_eval);
  m["control.alpha"] = format_double(alpha);
  m["control.grid"] = std::to_string(grid);
  m["control.oracle"] = oracle ? "true" : "false";
  return m;
}

Problem resolve_problem(const RunConfig& cfg) {
  if (cfg.problem.empty()) throw ConfigError("problem: required (e.g. laplace10 or custom)");
  if (cfg.problem != "custom") {
    try {
      return make_problem(cfg.problem);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("problem: ") + e.what());
    }
  }
  if (cfg.dim < 2) throw ConfigError("problem.dim: custom problems need dim >= 2");
  if (!(cfg.lo < cfg.hi)) throw ConfigError("problem.lo/problem.hi: need lo < hi");
  auto check = [&](const char* field, const std::string& text) {
    if (text.empty()) return;
    try {
      parse_expression(text, cfg.dim);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("problem.") + field + ": " + e.what());
    }
  };
  check("f", cfg.f_expr);
  check("g", cfg.g_expr);
  check("u", cfg.u_expr);
  std::string f = cfg.f_expr.empty() ? "0" : cfg.f_expr;
  std::string g = cfg.g_expr.empty() ? "0" : cfg.g_expr;
  return make_box_problem("custom", cfg.dim, cfg.lo, cfg.hi, f, g, cfg.u_expr);
}

int run_train(const RunConfig& cfg) {
  if (cfg.method != "vanilla" && cfg.method != "buffered")
    throw ConfigError("method: '" + cfg.method + "' (expected vanilla or buffered)");
  if (cfg.width < 1 || cfg.depth < 1) throw ConfigError("net.width/net.depth: must be >= 1");
  Problem problem = resolve_problem(cfg);

  Network net = Network::he_initialized(problem.model_input_dim(), static_cast<int>(cfg.width),
                                        static_cast<int>(cfg.depth), cfg.seed);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.threads = effective_threads(cfg);

  TrainResult res = cfg.method == "vanilla" ? train_vanilla(problem, net, tc)
                                            : train_buffered(problem, net, tc);

  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  fs::path dir(cfg.output_dir);
  write_convergence_csv((dir / "convergence.csv").string(), res.log);
  save_checkpoint((dir / "model.ckpt").string(), net, cfg.seed, res.iterations_run);

  double final_rel = std::numeric_limits<double>::quiet_NaN();
  long eval_n = tc.eval_points > 0 ? tc.eval_points : 10000;
  if (problem.has_solution()) final_rel = relative_l2_error(net, problem, eval_n, cfg.seed);

  json timing = json::array();
  for (const auto& e : res.log.entries)
    timing.push_back({{"iteration", e.iteration}, {"seconds", e.seconds}});
  json summary = {
      {"final_rel_l2", final_rel},
      {"mean_wos_steps", res.mean_wos_steps},
      {"wall_seconds", res.wall_seconds},
      {"seed", cfg.seed},
      {"config_hash", hex64(config_hash(cfg.semantic()))},
      {"iterations_run", res.iterations_run},
      {"eval_points", eval_n},
      {"timing", std::move(timing)},
  };
  write_json((dir / "summary.json").string(), summary);

  std::cout << "trained " << res.iterations_run << " iterations in "
            << format_double(res.wall_seconds) << "s";
  if (problem.has_solution()) std::cout << ", rel_l2 " << format_double(final_rel);
  std::cout << "\n";
  return 0;
}

int run_estimate(const RunConfig& cfg) {
  Problem problem = resolve_problem(cfg);
  if (problem.ctx_dim > 0)
    throw ConfigError("problem: '" + cfg.problem + "' is parametric; estimate needs a fixed PDE");
  if (cfg.points_file.empty()) throw ConfigError("estimate.points: required (CSV of points)");
  if (cfg.n_walks < 1) throw ConfigError("estimate.n_walks: must be >= 1");
  PointBatch points = read_points_csv(cfg.points_file, problem.dim);
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    if (!problem.domain->contains(points.row(i)))
      throw ConfigError(cfg.points_file + ": row " + std::to_string(i + 1) +
                        " is outside the domain");

  WalkProblem wp = problem.walk_view();
  PointwiseEstimate est = wos_pointwise(wp, points, cfg.n_walks, cfg.train.wos.epsilon, cfg.seed,
                                        effective_threads(cfg));

  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  fs::path dir(cfg.output_dir);
  write_estimates_csv((dir / "estimates.csv").string(), points, est);
  std::cout << "estimated " << points.rows() << " points, mean walk length "
            << format_double(est.mean_steps) << "\n";
  return 0;
}

int run_eval(const RunConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ConfigError("eval.checkpoint: required");
  if (cfg.n_eval < 1) throw ConfigError("eval.n_eval: must be >= 1");
  Problem problem = resolve_problem(cfg);
  if (!problem.has_solution())
    throw ConfigError("problem: '" + cfg.problem + "' has no reference solution to evaluate against");
  LoadedCheckpoint ck = load_checkpoint(cfg.checkpoint);
  if (ck.net.input_dim() != problem.model_input_dim())
    throw ConfigError("eval.checkpoint: model takes " + std::to_string(ck.net.input_dim()) +
                      " inputs but problem '" + cfg.problem + "' needs " +
                      std::to_string(problem.model_input_dim()));

  double rel = relative_l2_error(ck.net, problem, cfg.n_eval, cfg.seed);

  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  json out = {
      {"rel_l2", rel},
      {"n_eval", cfg.n_eval},
      {"seed", cfg.seed},
      {"problem", cfg.problem},
      {"checkpoint_step", ck.step},
      {"config_hash", hex64(config_hash(cfg.semantic()))},
  };
  write_json((fs::path(cfg.output_dir) / "eval.json").string(), out);
  std::cout << "rel_l2 " << format_double(rel) << "\n";
  return 0;
}

int run_optimize_control(const RunConfig& cfg) {
  if (cfg.alpha <= 0) throw ConfigError("control.alpha: must be > 0");
  if (cfg.grid < 2) throw ConfigError("control.grid: must be >= 2");

  ControlOptConfig oc;
  oc.alpha = cfg.alpha;
  oc.grid = cfg.grid;

  std::unique_ptr<ControlModel> model;
  std::optional<LoadedCheckpoint> ck;  // owns the network the model points into
  if (cfg.oracle) {
    if (!cfg.checkpoint.empty())
      throw ConfigError("control.oracle: drop control.checkpoint when optimizing the exact map");
    model = std::make_unique<SliceOracleModel>();
    // The exact map only covers the c1 slice; freeze the frequencies at it.
    oc.free = {true, false, false};
    oc.c0.resize(3);
    oc.c0 << 0.75, std::numbers::pi, std::numbers::pi;
  } else {
    if (cfg.checkpoint.empty())
      throw ConfigError("control.checkpoint: required unless control.oracle = true");
    ck.emplace(load_checkpoint(cfg.checkpoint));
    if (ck->net.input_dim() != 5)
      throw ConfigError("control.checkpoint: control needs a parametric model with 5 inputs, got " +
                        std::to_string(ck->net.input_dim()));
    model = std::make_unique<NetworkControlModel>(ck->net);
  }

  ControlOptResult res = optimize_control(*model, oc);
  Point c_star = control_optimum(cfg.alpha);
  double rel = (res.c - c_star).norm() / c_star.norm();

  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  json out = {
      {"c", point_to_json(res.c)},
      {"objective", res.objective},
      {"iterations", res.iterations},
      {"c_star", point_to_json(c_star)},
      {"rel_error", rel},
      {"alpha", cfg.alpha},
      {"grid", cfg.grid},
      {"oracle", cfg.oracle},
      {"config_hash", hex64(config_hash(cfg.semantic()))},
  };
  write_json((fs::path(cfg.output_dir) / "control.json").string(), out);
  std::cout << "c";
  for (Eigen::Index i = 0; i < res.c.size(); ++i) std::cout << " " << format_double(res.c[i]);
  std::cout << "\n";
  return 0;
}

int run(const RunConfig& cfg) {
  if (cfg.subcommand == "train") return run_train(cfg);
  if (cfg.subcommand == "estimate") return run_estimate(cfg);
  if (cfg.subcommand == "eval") return run_eval(cfg);
  if (cfg.subcommand == "optimize-control") return run_optimize_control(cfg);
  throw ConfigError("unknown subcommand '" + cfg.subcommand + "'");
}

}  // namespace nwos
