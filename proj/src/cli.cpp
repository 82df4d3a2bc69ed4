// Copyright 2026 The i2c Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied. See the License for the specific language governing
// permissions and limitations under the License.

#include "i2c/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "i2c/baselines.hpp"
#include "i2c/common.hpp"
#include "i2c/config.hpp"
#include "i2c/environments.hpp"
#include "i2c/estimation.hpp"
#include "i2c/solver.hpp"

namespace i2c {

namespace {

// All numeric cells are written with %.12g so reruns of a deterministic
// configuration produce byte-identical files.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw ConfigError("cannot write '" + path + "'");
    write_row(header);
  }

  void write_row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return (1.0 - frac) * values[lo] + frac * values[hi];
}

double median(std::vector<double> values) { return percentile(values, 0.5); }

std::string out_dir(const ConfigMap& cfg, const std::string& fallback) {
  const std::string dir = cfg.get("run.out", fallback);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw ConfigError("cannot create output directory '" + dir + "': " +
                      ec.message());
  return dir;
}

Environment load_environment(const ConfigMap& cfg,
                             const std::string& default_name) {
  const std::string name = cfg.get("environment.name", default_name);
  if (name.empty())
    throw ConfigError(
        "an environment is required (--env <name> or environment.name)");
  std::map<std::string, std::string> overrides;
  for (const std::string& key : cfg.section_keys("environment"))
    if (key != "name") overrides[key] = cfg.raw("environment." + key);
  return make_environment(name, overrides);
}

// Stage rows plus a final state-only row; control and gain columns of the
// final row are zero-padded so the column count is fixed.
void write_plan_csv(const std::string& path,
                    const std::vector<VectorXd>& states,
                    const std::vector<VectorXd>& controls,
                    const std::vector<VectorXd>& cov_diags,
                    const std::vector<MatrixXd>& gains) {
  const int dx = static_cast<int>(states.front().size());
  const int du = controls.empty() ? 0
                                  : static_cast<int>(controls.front().size());
  std::vector<std::string> header{"t"};
  for (int i = 0; i < dx; ++i) header.push_back("x" + std::to_string(i));
  for (int i = 0; i < du; ++i) header.push_back("u" + std::to_string(i));
  for (int i = 0; i < dx; ++i) header.push_back("sx" + std::to_string(i));
  for (int r = 0; r < du; ++r)
    for (int c = 0; c < dx; ++c)
      header.push_back("k" + std::to_string(r) + std::to_string(c));

  CsvWriter csv(path, header);
  for (size_t t = 0; t < states.size(); ++t) {
    std::vector<std::string> row{fmt(static_cast<double>(t))};
    for (int i = 0; i < dx; ++i) row.push_back(fmt(states[t](i)));
    const bool stage = t < controls.size();
    for (int i = 0; i < du; ++i)
      row.push_back(fmt(stage ? controls[t](i) : 0.0));
    for (int i = 0; i < dx; ++i)
      row.push_back(fmt(t < cov_diags.size() ? cov_diags[t](i) : 0.0));
    for (int r = 0; r < du; ++r)
      for (int c = 0; c < dx; ++c)
        row.push_back(fmt(t < gains.size() ? gains[t](r, c) : 0.0));
    csv.write_row(row);
  }
}

struct DiagRow {
  int iteration = 0;
  double expected_cost = 0.0;
  double alpha = 0.0;
  bool clamped = false;
};

void write_diag_csv(const std::string& path, const std::vector<DiagRow>& rows) {
  CsvWriter csv(path, {"iteration", "expected_cost", "alpha", "clamped"});
  for (const DiagRow& r : rows)
    csv.write_row({fmt(r.iteration), fmt(r.expected_cost), fmt(r.alpha),
                   fmt(r.clamped ? 1.0 : 0.0)});
}

void write_rollouts_csv(const std::string& path,
                        const std::vector<std::uint64_t>& seeds,
                        const std::vector<double>& costs) {
  CsvWriter csv(path, {"seed", "total_cost"});
  for (size_t i = 0; i < seeds.size(); ++i)
    csv.write_row({fmt(static_cast<double>(seeds[i])), fmt(costs[i])});
}

// Minimal JSON emitter: flat object of numbers/strings plus one nested
// percentile object.
class JsonWriter {
 public:
  void add(const std::string& key, const std::string& value) {
    entries_.push_back("\"" + key + "\": \"" + value + "\"");
  }
  void add(const std::string& key, double value) {
    entries_.push_back("\"" + key + "\": " + fmt(value));
  }
  void add(const std::string& key, int value) {
    entries_.push_back("\"" + key + "\": " + std::to_string(value));
  }
  void add(const std::string& key, bool value) {
    entries_.push_back(std::string("\"") + key +
                       "\": " + (value ? "true" : "false"));
  }
  void add_percentiles(const std::string& key,
                       const std::vector<double>& costs) {
    entries_.push_back("\"" + key + "\": {\"p10\": " +
                       fmt(percentile(costs, 0.1)) +
                       ", \"p50\": " + fmt(percentile(costs, 0.5)) +
                       ", \"p90\": " + fmt(percentile(costs, 0.9)) + "}");
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << "{\n";
    for (size_t i = 0; i < entries_.size(); ++i)
      out << "  " << entries_[i] << (i + 1 < entries_.size() ? ",\n" : "\n");
    out << "}\n";
  }

 private:
  std::vector<std::string> entries_;
};

// Seeded closed-loop evaluation of a control law on an environment. The
// initial state is drawn from the environment's init belief with a stream
// decorrelated from the rollout's process-noise stream.
std::vector<double> evaluate_law(const Environment& env, const ControlLaw& law,
                                 int horizon,
                                 const std::vector<std::uint64_t>& seeds,
                                 bool deterministic) {
  std::vector<double> costs;
  costs.reserve(seeds.size());
  for (const std::uint64_t seed : seeds) {
    VectorXd x0 = env.init.mean();
    if (!deterministic)
      x0 = env.init.sample(1, seed ^ 0x9e3779b97f4a7c15ULL).front();
    RolloutOptions opts;
    opts.seed = seed;
    opts.deterministic = deterministic;
    Trajectory traj = rollout(env.sys, x0, law, horizon, opts);
    costs.push_back(env.cost.trajectory_cost(traj));
  }
  return costs;
}

// Flags alpha values sitting on the trust-region boundary of the previous
// iteration; both bounds are exact multiplications in the update.
std::vector<DiagRow> diag_from_traces(const std::vector<double>& cost_trace,
                                      const std::vector<double>& alpha_trace,
                                      double gamma) {
  std::vector<DiagRow> rows;
  for (size_t i = 0; i < cost_trace.size(); ++i) {
    DiagRow row;
    row.iteration = static_cast<int>(i);
    row.expected_cost = cost_trace[i];
    row.alpha = i < alpha_trace.size() ? alpha_trace[i] : 0.0;
    if (i > 0 && i < alpha_trace.size()) {
      const double prev = alpha_trace[i - 1];
      const double up = prev * gamma;
      const double down = prev / gamma;
      row.clamped = std::abs(row.alpha - up) <= 1e-9 * up ||
                    std::abs(row.alpha - down) <= 1e-9 * down;
    }
    rows.push_back(row);
  }
  return rows;
}

PlannerKind parse_planner(const std::string& name) {
  if (name == "i2c") return PlannerKind::I2c;
  if (name == "ilqr") return PlannerKind::Ilqr;
  if (name == "cem") return PlannerKind::Cem;
  throw ConfigError("unknown planner '" + name +
                    "' (expected i2c, ilqr, or cem)");
}

SolverOptions i2c_options_from(const ConfigMap& cfg,
                               const Environment& env) {
  SolverOptions opts;
  opts.propagator = parse_propagator(cfg.get("solver.inference", "cubature"));
  opts.input_prior_cov = env.input_prior_cov;
  opts.max_iterations = cfg.get_int("solver.iterations", 200);
  opts.tolerance = cfg.get_double("solver.tolerance", 1e-6);
  opts.window = cfg.get_int("solver.window", 5);
  opts.gamma = cfg.get_double("solver.gamma", 2.0);
  opts.alpha_init = cfg.get_double("solver.alpha_init", 0.0);
  return opts;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

int cmd_solve(const ConfigMap& cfg) {
  const Environment env = load_environment(cfg, "");
  const int horizon = cfg.get_int("solver.horizon", env.horizon);
  if (horizon < 2) throw ConfigError("solve needs a horizon of at least 2");
  const std::vector<std::uint64_t> seeds =
      parse_seed_spec(cfg.get("run.seeds", "0"));
  const PolicyMode mode = parse_mode(cfg.get("run.mode", "ff"));
  const bool deterministic = cfg.get_bool("run.deterministic", false);
  const std::string solver = cfg.get("solver.name", "i2c");
  const std::string dir = out_dir(cfg, "runs/solve");
  const int iterations = cfg.get_int("solver.iterations", 200);

  ControlLaw law;
  std::vector<VectorXd> plan_states, plan_controls, plan_cov;
  std::vector<MatrixXd> plan_gains;
  std::vector<DiagRow> diag;
  std::vector<double> iter_seconds;
  bool converged = false;
  double alpha = 0.0;

  if (solver == "i2c") {
    SolverOptions opts = i2c_options_from(cfg, env);
    SolveResult res = solve(env.sys, env.cost, env.init, horizon, opts);
    law = select_law(res, mode);
    plan_states = res.mean_states;
    plan_controls = res.mean_controls;
    for (const Gaussian& g : res.beliefs.state_smoothed)
      plan_cov.push_back(g.cov().diagonal());
    plan_gains = res.policy.gains;
    diag = diag_from_traces(res.cost_trace, res.alpha_trace, opts.gamma);
    iter_seconds = res.iter_seconds;
    converged = res.converged;
    alpha = res.alpha;
  } else if (solver == "ilqr") {
    if (mode == PolicyMode::Expert)
      throw ConfigError("expert execution requires the i2c solver");
    IlqrOptions opts;
    opts.max_iterations = iterations;
    opts.tolerance = cfg.get_double("solver.tolerance", 1e-8);
    const std::vector<VectorXd> u0(horizon - 1,
                                   VectorXd::Zero(env.sys.input_dim));
    IlqrResult res = ilqr_solve(env.sys, env.cost, env.init.mean(), u0, opts);
    law = mode == PolicyMode::Feedback
              ? res.policy.law()
              : LinearPolicy::feedforward(res.controls, env.sys.state_dim)
                    .law();
    plan_states = res.states;
    plan_controls = res.controls;
    plan_gains = res.policy.gains;
    for (size_t i = 0; i < res.cost_trace.size(); ++i)
      diag.push_back({static_cast<int>(i), res.cost_trace[i], 0.0, false});
    iter_seconds = res.iter_seconds;
    converged = res.converged;
  } else if (solver == "lqr" || solver.rfind("rs-lqr", 0) == 0) {
    if (mode == PolicyMode::Expert)
      throw ConfigError("expert execution requires the i2c solver");
    double sigma = 0.0;
    if (solver != "lqr") {
      if (solver.rfind("rs-lqr:", 0) != 0)
        throw ConfigError("risk-sensitive solver needs a parameter, e.g. "
                          "rs-lqr:0.1");
      const std::string arg = solver.substr(7);
      size_t used = 0;
      try {
        sigma = std::stod(arg, &used);
      } catch (const std::exception&) {
        used = std::string::npos;
      }
      if (used != arg.size())
        throw ConfigError("malformed rs-lqr parameter '" + arg + "'");
    }
    const std::vector<VectorXd> xs(horizon, env.init.mean());
    const std::vector<VectorXd> us(horizon - 1,
                                   VectorXd::Zero(env.sys.input_dim));
    const LqProblem lq = quadratize_along(env.sys, env.cost, xs, us);
    const RiccatiSolution ric = solver == "lqr"
                                    ? lqr_backward(lq)
                                    : risk_sensitive_backward(lq, sigma);
    RolloutOptions nominal;
    nominal.deterministic = true;
    Trajectory traj =
        rollout(env.sys, env.init.mean(), ric.policy.law(), horizon, nominal);
    law = mode == PolicyMode::Feedback
              ? ric.policy.law()
              : LinearPolicy::feedforward(traj.controls, env.sys.state_dim)
                    .law();
    plan_states = traj.states;
    plan_controls = traj.controls;
    plan_gains = ric.policy.gains;
    diag.push_back({0, env.cost.trajectory_cost(traj), 0.0, false});
    converged = true;
  } else if (solver == "cem") {
    if (mode != PolicyMode::Feedforward)
      throw ConfigError("the cross-entropy solver is feedforward only");
    CemOptions opts;
    opts.population = cfg.get_int("solver.particles", opts.population);
    opts.max_iterations = iterations;
    opts.seed = seeds.front();
    CemResult res = cem_solve(env.sys, env.cost, env.init.mean(), horizon,
                              opts);
    law = LinearPolicy::feedforward(res.controls, env.sys.state_dim).law();
    RolloutOptions nominal;
    nominal.deterministic = true;
    Trajectory traj =
        rollout(env.sys, env.init.mean(), law, horizon, nominal);
    plan_states = traj.states;
    plan_controls = res.controls;
    for (size_t i = 0; i < res.cost_trace.size(); ++i)
      diag.push_back({static_cast<int>(i), res.cost_trace[i], 0.0, false});
    iter_seconds = res.iter_seconds;
    converged = res.iterations < opts.max_iterations;
  } else {
    throw ConfigError("unknown solver '" + solver +
                      "' (expected i2c, ilqr, lqr, rs-lqr:<sigma>, or cem)");
  }

  const std::vector<double> costs =
      evaluate_law(env, law, horizon, seeds, deterministic);

  write_plan_csv(dir + "/plan.csv", plan_states, plan_controls, plan_cov,
                 plan_gains);
  write_diag_csv(dir + "/diag.csv", diag);
  write_rollouts_csv(dir + "/rollouts.csv", seeds, costs);

  JsonWriter json;
  json.add("command", std::string("solve"));
  json.add("environment", env.name);
  json.add("solver", solver);
  json.add("mode", cfg.get("run.mode", "ff"));
  json.add("horizon", horizon);
  json.add("seeds", static_cast<int>(seeds.size()));
  json.add("converged", converged);
  json.add("alpha", alpha);
  json.add("iterations", static_cast<int>(diag.size()));
  json.add_percentiles("cost_percentiles", costs);
  json.add("seconds_per_iteration", median(iter_seconds));
  json.write(dir + "/summary.json");

  std::cout << "solve " << env.name << " [" << solver << "] cost p10/p50/p90: "
            << fmt(percentile(costs, 0.1)) << " / "
            << fmt(percentile(costs, 0.5)) << " / "
            << fmt(percentile(costs, 0.9)) << "\nartifacts in " << dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// mpc
// ---------------------------------------------------------------------------

int cmd_mpc(const ConfigMap& cfg) {
  Environment env = load_environment(cfg, "quadcopter");
  const std::string noise = cfg.get("mpc.noise", "low");
  if (noise == "high") {
    if (env.name != "quadcopter")
      throw ConfigError("the high-noise setting is quadcopter-specific");
    set_quadcopter_high_noise(env);
  } else if (noise != "low") {
    throw ConfigError("unknown noise setting '" + noise +
                      "' (expected low or high)");
  }

  MpcConfig mc;
  mc.horizon = cfg.get_int("mpc.horizon", 20);
  mc.warm_start_iterations = cfg.get_int("mpc.warm_start", 50);
  mc.step_iterations = cfg.get_int("mpc.step_iterations", 1);
  mc.planner = parse_planner(cfg.get("mpc.planner", "i2c"));
  const std::string default_mode =
      mc.planner == PlannerKind::Cem ? "ff" : "fb";
  mc.mode = parse_mode(cfg.get("run.mode", default_mode));
  mc.init = env.init;
  mc.deterministic = cfg.get_bool("run.deterministic", false);
  mc.i2c = i2c_options_from(cfg, env);
  mc.ilqr.max_iterations = cfg.get_int("solver.iterations", 100);
  mc.cem.population = cfg.get_int("solver.particles", mc.cem.population);
  mc.filter_propagator =
      parse_propagator(cfg.get("mpc.filter_inference", "cubature"));

  const std::vector<std::uint64_t> seeds =
      parse_seed_spec(cfg.get("run.seeds", "0"));
  mc.cem.seed = seeds.front();
  const int total_steps = cfg.get_int("mpc.total_steps", env.horizon - 1);
  const std::string dir = out_dir(cfg, "runs/mpc");

  std::vector<double> costs;
  int failures = 0;
  int jitter = 0;
  int aborted = 0;
  bool first = true;
  for (const std::uint64_t seed : seeds) {
    PartiallyObservedRun run =
        run_partially_observed(env.sys, env.cost, mc, total_steps, seed);
    costs.push_back(run.total_cost);
    failures += run.planner_failures;
    jitter += run.jitter_events;
    aborted += run.aborted ? 1 : 0;

    if (first) {
      first = false;
      const int dx = env.sys.state_dim;
      const int du = env.sys.input_dim;
      const int dy = env.sys.meas_dim;
      std::vector<std::string> header{"t"};
      for (int i = 0; i < dx; ++i) header.push_back("x" + std::to_string(i));
      for (int i = 0; i < dx; ++i) header.push_back("xh" + std::to_string(i));
      for (int i = 0; i < dy; ++i) header.push_back("y" + std::to_string(i));
      for (int i = 0; i < du; ++i) header.push_back("u" + std::to_string(i));
      header.push_back("cost");
      CsvWriter csv(dir + "/trace.csv", header);
      const size_t steps = run.trajectory.controls.size();
      for (size_t k = 0; k < steps; ++k) {
        std::vector<std::string> row{fmt(static_cast<double>(k))};
        const VectorXd& x = run.trajectory.states[k + 1];
        const VectorXd xh = run.beliefs[k + 1].mean();
        for (int i = 0; i < dx; ++i) row.push_back(fmt(x(i)));
        for (int i = 0; i < dx; ++i) row.push_back(fmt(xh(i)));
        for (int i = 0; i < dy; ++i)
          row.push_back(fmt(run.measurements[k](i)));
        for (int i = 0; i < du; ++i)
          row.push_back(fmt(run.trajectory.controls[k](i)));
        row.push_back(fmt(k < run.trajectory.step_costs.size()
                              ? run.trajectory.step_costs[k]
                              : 0.0));
        csv.write_row(row);
      }
    }
  }

  write_rollouts_csv(dir + "/rollouts.csv", seeds, costs);

  JsonWriter json;
  json.add("command", std::string("mpc"));
  json.add("environment", env.name);
  json.add("planner", cfg.get("mpc.planner", "i2c"));
  json.add("mode", cfg.get("run.mode", default_mode));
  json.add("noise", noise);
  json.add("horizon", mc.horizon);
  json.add("total_steps", total_steps);
  json.add("seeds", static_cast<int>(seeds.size()));
  json.add("planner_failures", failures);
  json.add("jitter_events", jitter);
  json.add("aborted_runs", aborted);
  json.add_percentiles("cost_percentiles", costs);
  json.write(dir + "/summary.json");

  std::cout << "mpc " << env.name << " [" << cfg.get("mpc.planner", "i2c")
            << " " << cfg.get("run.mode", default_mode) << " " << noise
            << "] cost p10/p50/p90: " << fmt(percentile(costs, 0.1)) << " / "
            << fmt(percentile(costs, 0.5)) << " / "
            << fmt(percentile(costs, 0.9)) << "\nartifacts in " << dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bench-timing
// ---------------------------------------------------------------------------

int cmd_bench_timing(const ConfigMap& cfg) {
  Environment env = load_environment(cfg, "double_cartpole");
  // Equal footing across solvers: everyone differentiates the same black-box
  // dynamics (or avoids derivatives entirely).
  env.sys.jacobian = nullptr;
  const int horizon = cfg.get_int("solver.horizon", env.horizon);
  const int iterations = cfg.get_int("timing.iterations", 22);
  const int warmup = cfg.get_int("timing.warmup", 2);
  if (iterations <= warmup)
    throw ConfigError("timing.iterations must exceed timing.warmup");
  const std::string dir = out_dir(cfg, "runs/bench-timing");

  auto measured = [&](std::vector<double> seconds) {
    if (static_cast<int>(seconds.size()) > warmup)
      seconds.erase(seconds.begin(), seconds.begin() + warmup);
    return median(seconds);
  };

  std::vector<std::pair<std::string, double>> rows;

  {
    IlqrOptions opts;
    opts.max_iterations = iterations;
    opts.tolerance = 0.0;
    const std::vector<VectorXd> u0(horizon - 1,
                                   VectorXd::Zero(env.sys.input_dim));
    IlqrResult res = ilqr_solve(env.sys, env.cost, env.init.mean(), u0, opts);
    rows.emplace_back("ilqr", measured(res.iter_seconds));
  }
  for (const std::string backend : {"linearize", "cubature", "gh:4"}) {
    SolverOptions opts;
    opts.propagator = parse_propagator(backend);
    opts.input_prior_cov = env.input_prior_cov;
    opts.max_iterations = iterations;
    opts.tolerance = 0.0;
    SolveResult res = solve(env.sys, env.cost, env.init, horizon, opts);
    rows.emplace_back("i2c-" + backend, measured(res.iter_seconds));
  }

  const double reference = rows.front().second;
  if (!(reference > 0.0))
    throw NonFiniteState("timing reference collapsed to zero");

  CsvWriter csv(dir + "/timing.csv",
                {"solver", "seconds_per_iteration", "normalized"});
  for (const auto& [name, seconds] : rows)
    csv.write_row({name, fmt(seconds), fmt(seconds / reference)});

  JsonWriter json;
  json.add("command", std::string("bench-timing"));
  json.add("environment", env.name);
  json.add("horizon", horizon);
  json.add("iterations", iterations);
  json.add("warmup", warmup);
  for (const auto& [name, seconds] : rows)
    json.add(name + "_normalized", seconds / reference);
  json.write(dir + "/summary.json");

  for (const auto& [name, seconds] : rows)
    std::cout << name << ": " << fmt(seconds) << " s/iter (x"
              << fmt(seconds / reference) << ")\n";
  std::cout << "artifacts in " << dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// demo-inverse
// ---------------------------------------------------------------------------

int cmd_demo_inverse(const ConfigMap& cfg) {
  const ReferenceInverseProblem ref = reference_inverse_problem();
  InverseOptions opts;
  const std::string mode = cfg.get("inverse.mode", "em");
  if (mode == "em")
    opts.mode = InverseMode::Em;
  else if (mode == "iterated")
    opts.mode = InverseMode::Iterated;
  else
    throw ConfigError("unknown inverse mode '" + mode +
                      "' (expected em or iterated)");
  opts.alpha = cfg.get_double("inverse.alpha", 1.0);
  opts.theta = cfg.get_double("inverse.theta", 0.0);
  opts.max_iterations = cfg.get_int("inverse.iterations", 50);
  opts.propagator = ref.em_propagator;
  const std::string dir = out_dir(cfg, "runs/demo-inverse");

  const InverseResult res =
      gauss_newton_inference(ref.f, ref.jacobian, ref.y_star, ref.prior, opts);

  CsvWriter csv(dir + "/inverse.csv", {"iteration", "residual", "alpha"});
  for (const InverseIterate& it : res.trace)
    csv.write_row({fmt(it.iteration), fmt(it.residual), fmt(it.alpha)});

  JsonWriter json;
  json.add("command", std::string("demo-inverse"));
  json.add("mode", mode);
  json.add("alpha", opts.alpha);
  json.add("theta", opts.theta);
  json.add("regime", res.regime);
  json.add("final_residual", res.trace.back().residual);
  json.add("iterations", static_cast<int>(res.trace.size()) - 1);
  json.write(dir + "/summary.json");

  std::cout << "demo-inverse [" << mode << "] regime: " << res.regime
            << ", final residual " << fmt(res.trace.back().residual)
            << "\nartifacts in " << dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// covariance-control
// ---------------------------------------------------------------------------

int cmd_covariance_control(const ConfigMap& cfg) {
  const Environment env = load_environment(cfg, "linear2d");
  if (!cfg.has("covariance.target_mean") || !cfg.has("covariance.target_cov"))
    throw ConfigError(
        "covariance-control requires covariance.target_mean and "
        "covariance.target_cov");
  const VectorXd target_mean = parse_vector(cfg.raw("covariance.target_mean"));
  const MatrixXd target_cov =
      parse_square_matrix(cfg.raw("covariance.target_cov"));
  if (target_mean.size() != env.sys.state_dim ||
      target_cov.rows() != env.sys.state_dim)
    throw ConfigError("covariance target does not match the state dimension");
  const Gaussian target(target_mean, target_cov);

  const int horizon = cfg.get_int("covariance.horizon", env.horizon);
  CovarianceControlOptions opts;
  opts.propagator = parse_propagator(cfg.get("solver.inference", "cubature"));
  opts.input_prior_cov = env.input_prior_cov;
  opts.max_iterations = cfg.get_int("covariance.iterations", 60);
  opts.alpha_init = cfg.get_double("solver.alpha_init", 0.0);
  opts.anneal_fraction = cfg.get_double("covariance.anneal_fraction", 0.8);

  const MatrixXd input_weight =
      cfg.has("covariance.input_weight")
          ? parse_square_matrix(cfg.raw("covariance.input_weight"))
          : MatrixXd(MatrixXd::Identity(env.sys.input_dim,
                                        env.sys.input_dim));
  const QuadraticFeatureCost cost =
      effort_cost(env.sys.state_dim, input_weight);

  const std::string dir = out_dir(cfg, "runs/covariance-control");
  const CovarianceControlResult res = covariance_control_solve(
      env.sys, cost, env.init, target, horizon, opts);

  CsvWriter csv(dir + "/kl.csv", {"iteration", "kl"});
  for (size_t i = 0; i < res.kl_trace.size(); ++i)
    csv.write_row({fmt(static_cast<double>(i)), fmt(res.kl_trace[i])});

  JsonWriter json;
  json.add("command", std::string("covariance-control"));
  json.add("environment", env.name);
  json.add("horizon", horizon);
  json.add("iterations", res.iterations);
  json.add("alpha", res.alpha);
  json.add("final_kl", res.final_kl());
  json.write(dir + "/summary.json");

  std::cout << "covariance-control " << env.name
            << " final KL: " << fmt(res.final_kl()) << "\nartifacts in "
            << dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

const std::map<std::string, std::string> kFlagKeys = {
    {"--out", "run.out"},
    {"--seeds", "run.seeds"},
    {"--mode", "run.mode"},
    {"--inference", "solver.inference"},
    {"--solver", "solver.name"},
    {"--iterations", "solver.iterations"},
    {"--horizon", "solver.horizon"},
    {"--particles", "solver.particles"},
    {"--env", "environment.name"},
    {"--noise", "mpc.noise"},
    {"--planner", "mpc.planner"},
    {"--total-steps", "mpc.total_steps"},
    {"--warm-start", "mpc.warm_start"},
    {"--step-iterations", "mpc.step_iterations"},
    {"--alpha", "inverse.alpha"},
    {"--theta", "inverse.theta"},
    {"--inverse-mode", "inverse.mode"},
};

ConfigMap collect_config(const std::vector<std::string>& args) {
  ConfigMap cfg;
  // The config file loads first so every flag can override it.
  for (size_t i = 1; i + 1 < args.size(); ++i)
    if (args[i] == "--config") cfg = parse_config_file(args[i + 1]);

  for (size_t i = 1; i < args.size(); ++i) {
    const std::string& flag = args[i];
    if (flag == "--config") {
      ++i;
      continue;
    }
    if (flag == "--deterministic") {
      cfg.set("run.deterministic", "true");
      continue;
    }
    auto it = kFlagKeys.find(flag);
    if (it == kFlagKeys.end())
      throw ConfigError("unknown flag '" + flag + "'");
    if (i + 1 >= args.size())
      throw ConfigError("flag '" + flag + "' needs a value");
    cfg.set(it->second, args[++i]);
  }
  return cfg;
}

void usage(std::ostream& out) {
  out << "usage: i2c <command> [flags]\n"
         "commands: solve, mpc, bench-timing, demo-inverse, "
         "covariance-control\n"
         "flags: --config <path> --out <dir> --seeds <spec> "
         "--inference <backend> --solver <name> --mode {ff|fb|expert}\n"
         "       --env <name> --noise {low|high} --planner {i2c|ilqr|cem} "
         "--particles <n> --deterministic\n"
         "see FORMATS.md for the config schema and artifact layouts\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  try {
    if (args.empty()) {
      usage(std::cerr);
      return 2;
    }
    const std::string& command = args.front();
    if (command == "--help" || command == "help") {
      usage(std::cout);
      return 0;
    }
    const ConfigMap cfg = collect_config(args);
    if (command == "solve") return cmd_solve(cfg);
    if (command == "mpc") return cmd_mpc(cfg);
    if (command == "bench-timing") return cmd_bench_timing(cfg);
    if (command == "demo-inverse") return cmd_demo_inverse(cfg);
    if (command == "covariance-control") return cmd_covariance_control(cfg);
    throw ConfigError("unknown command '" + command + "'");
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace i2c
