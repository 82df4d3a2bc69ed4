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

#include "i2c/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "i2c/cost.hpp"
#include "i2c/inference.hpp"

namespace i2c {

namespace {

// Re-inflation applied when a posterior covariance loses definiteness to
// roundoff; scaled to the covariance magnitude so it stays negligible.
MatrixXd reconditioned(const MatrixXd& cov, int* events) {
  const MatrixXd sym = symmetrize(cov);
  Eigen::LLT<MatrixXd> llt(sym);
  if (llt.info() == Eigen::Success) return sym;
  ++*events;
  const double bump =
      std::max(1e-12, 1e-9 * sym.trace() / static_cast<double>(sym.rows()));
  return sym + bump * MatrixXd::Identity(sym.rows(), sym.cols());
}

// Evaluates the global cost through a stage offset so a rolling plan keeps
// addressing time-indexed targets correctly. Copies of the callables are
// captured so the shifted cost owns its behavior.
QuadraticFeatureCost shift_cost(const QuadraticFeatureCost& cost,
                                int offset) {
  QuadraticFeatureCost shifted = cost;
  if (offset == 0) return shifted;
  const auto features = cost.features;
  shifted.features = [features, offset](int t, const VectorXd& x,
                                        const VectorXd& u) {
    return features(t + offset, x, u);
  };
  const auto target = cost.target;
  shifted.target = [target, offset](int t) { return target(t + offset); };
  const auto weight = cost.weight;
  shifted.weight = [weight, offset](int t) { return weight(t + offset); };
  if (cost.features_jacobian) {
    const auto jac = cost.features_jacobian;
    shifted.features_jacobian = [jac, offset](int t, const VectorXd& x,
                                              const VectorXd& u) {
      return jac(t + offset, x, u);
    };
  }
  return shifted;
}

// Same shift for time-indexed dynamics so a rolling plan simulates the
// window the executed controls will actually meet.
SystemModel shift_system(const SystemModel& sys, int offset) {
  SystemModel shifted = sys;
  if (offset == 0) return shifted;
  const auto step = sys.step;
  shifted.step = [step, offset](int t, const VectorXd& x, const VectorXd& u) {
    return step(t + offset, x, u);
  };
  if (sys.jacobian) {
    const auto jac = sys.jacobian;
    shifted.jacobian = [jac, offset](int t, const VectorXd& x,
                                     const VectorXd& u) {
      return jac(t + offset, x, u);
    };
  }
  return shifted;
}

template <typename T>
void shift_duplicate(std::vector<T>& v) {
  if (v.size() < 2) return;
  v.erase(v.begin());
  v.push_back(v.back());
}

void shift_plan(MpcState& state) {
  shift_duplicate(state.policy.gains);
  shift_duplicate(state.policy.offsets);
  shift_duplicate(state.policy.covs);
  shift_duplicate(state.plan_controls);
  shift_duplicate(state.plan_states);
  shift_duplicate(state.cem_std);
  shift_duplicate(state.beliefs.state_smoothed);
  shift_duplicate(state.beliefs.tau_smoothed);
  ++state.offset;
}

std::vector<VectorXd> mean_rollout(const SystemModel& sys, const VectorXd& x0,
                                   const std::vector<VectorXd>& controls,
                                   int offset) {
  std::vector<VectorXd> states;
  states.reserve(controls.size() + 1);
  states.push_back(x0);
  for (size_t t = 0; t < controls.size(); ++t)
    states.push_back(
        sys.step(offset + static_cast<int>(t), states.back(), controls[t]));
  return states;
}

std::uint64_t step_seed(std::uint64_t base, int offset) {
  return base + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(offset + 1);
}

void replan_i2c(const SystemModel& sys, const QuadraticFeatureCost& cost,
                const MpcConfig& config, MpcState& state,
                const Gaussian& belief) {
  LinearPolicy prior = state.policy;
  BeliefTrajectory bt;
  for (int i = 0; i < config.step_iterations; ++i) {
    bt = e_step(sys, cost, belief, prior, config.horizon, state.alpha,
                config.i2c.propagator, config.i2c.terminal_innovation);
    prior = bt.policy;
  }
  state.beliefs = std::move(bt);
  state.policy = prior;
  state.plan_controls = state.beliefs.mean_controls();
  state.plan_states = state.beliefs.mean_states();
}

void replan_ilqr(const SystemModel& sys, const QuadraticFeatureCost& cost,
                 const MpcConfig& config, MpcState& state,
                 const Gaussian& belief) {
  IlqrOptions opts = config.ilqr;
  opts.max_iterations = config.step_iterations;
  IlqrResult res =
      ilqr_solve(sys, cost, belief.mean(), state.plan_controls, opts);
  state.policy = std::move(res.policy);
  state.plan_controls = std::move(res.controls);
  state.plan_states = std::move(res.states);
}

void replan_cem(const SystemModel& sys, const QuadraticFeatureCost& cost,
                const MpcConfig& config, MpcState& state,
                const Gaussian& belief) {
  CemOptions opts = config.cem;
  opts.max_iterations = config.step_iterations;
  opts.init_mean = state.plan_controls;
  opts.seed = step_seed(config.cem.seed, state.offset);
  CemResult res = cem_solve(sys, cost, belief.mean(), config.horizon, opts);
  state.policy =
      LinearPolicy::feedforward(res.controls, sys.state_dim);
  state.plan_states =
      mean_rollout(sys, belief.mean(), res.controls, state.offset);
  state.plan_controls = std::move(res.controls);
  state.cem_std = std::move(res.std_devs);
}

VectorXd execute_control(const MpcConfig& config, const MpcState& state,
                         const Gaussian& belief) {
  switch (config.mode) {
    case PolicyMode::Feedforward:
      return state.plan_controls.front();
    case PolicyMode::Feedback:
      return state.policy.control(0, belief.mean());
    case PolicyMode::Expert: {
      const Gaussian& plan_x = state.beliefs.state_smoothed.front();
      const VectorXd dev = belief.mean() - plan_x.mean();
      double weight = 0.0;
      try {
        const double d = plan_x.mahalanobis_squared(belief.mean());
        weight = std::isfinite(d) ? std::exp(-0.5 * d) : 0.0;
      } catch (const SingularCovariance&) {
        weight = 0.0;
      }
      return state.plan_controls.front() +
             weight * (state.policy.gains.front() * dev);
    }
  }
  throw ConfigError("unknown execution mode");
}

void validate_config(const SystemModel& sys, const MpcConfig& config) {
  if (config.horizon < 2)
    throw ConfigError("receding horizon must be at least 2");
  if (config.warm_start_iterations < 1)
    throw ConfigError("warm start needs at least one iteration");
  if (config.step_iterations < 0)
    throw ConfigError("per-step iterations cannot be negative");
  if (config.init.dim() != sys.state_dim)
    throw ConfigError("initial belief dimension does not match the system");
  if (config.mode == PolicyMode::Expert && config.planner != PlannerKind::I2c)
    throw ConfigError("expert execution requires the input-inference "
                      "planner");
  if (config.mode == PolicyMode::Feedback &&
      config.planner == PlannerKind::Cem)
    throw ConfigError("the cross-entropy planner has no feedback law");
}

// PSD square root for noise sampling; tolerates semidefinite (including
// zero) covariances, unlike a Cholesky factor.
MatrixXd sqrt_psd(const MatrixXd& cov) {
  if (cov.size() == 0 || cov.norm() == 0.0)
    return MatrixXd::Zero(cov.rows(), cov.cols());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(cov));
  const VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * clipped.cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

VectorXd draw(const MatrixXd& sqrt_cov, std::mt19937_64& rng) {
  std::normal_distribution<double> unit;
  VectorXd z(sqrt_cov.cols());
  for (int i = 0; i < z.size(); ++i) z[i] = unit(rng);
  return sqrt_cov * z;
}

}  // namespace

FilterState ckf_predict(const SystemModel& sys, const FilterState& filter,
                        const VectorXd& u, const Propagator& prop) {
  if (filter.belief.dim() != sys.state_dim)
    throw ConfigError("filter belief dimension does not match the system");
  if (u.size() != sys.input_dim)
    throw ConfigError("control dimension does not match the system");

  const int t = filter.t;
  VectorFn f = [&sys, &u, t](const VectorXd& x) { return sys.step(t, x, u); };
  JacobianFn jac;
  if (sys.jacobian) {
    const int dx = sys.state_dim;
    jac = [&sys, &u, t, dx](const VectorXd& x) {
      return MatrixXd(sys.jacobian(t, x, u).leftCols(dx));
    };
  }
  const JointGaussian joint =
      propagate(prop, f, filter.belief, sys.process_noise, jac);

  FilterState next = filter;
  next.belief = joint.marginal_b();
  next.t = t + 1;
  return next;
}

FilterState ckf_update(const SystemModel& sys, const FilterState& filter,
                       const VectorXd& y, const Propagator& prop) {
  if (!sys.has_measurement())
    throw ConfigError("measurement update without a measurement model");
  if (filter.belief.dim() != sys.state_dim)
    throw ConfigError("filter belief dimension does not match the system");
  if (y.size() != sys.meas_dim)
    throw ConfigError("measurement dimension does not match the model");

  VectorFn g = [&sys](const VectorXd& x) { return sys.measure(x); };
  const JointGaussian joint =
      propagate(prop, g, filter.belief, sys.meas_noise);
  const Gaussian posterior = joint.condition_on_b(y);

  FilterState next = filter;
  next.innovation = y - joint.mean_b();
  next.innovation_cov = joint.cov_bb();
  next.belief = Gaussian(posterior.mean(),
                         reconditioned(posterior.cov(), &next.jitter_events));
  return next;
}

MpcState mpc_warm_start(const SystemModel& sys,
                        const QuadraticFeatureCost& cost,
                        const MpcConfig& config) {
  validate_config(sys, config);

  MpcState state;
  switch (config.planner) {
    case PlannerKind::I2c: {
      SolverOptions opts = config.i2c;
      opts.max_iterations = config.warm_start_iterations;
      SolveResult res = solve(sys, cost, config.init, config.horizon, opts);
      state.alpha = res.alpha;
      state.policy = std::move(res.policy);
      state.plan_controls = std::move(res.mean_controls);
      state.plan_states = std::move(res.mean_states);
      state.beliefs = std::move(res.beliefs);
      break;
    }
    case PlannerKind::Ilqr: {
      IlqrOptions opts = config.ilqr;
      opts.max_iterations = config.warm_start_iterations;
      const std::vector<VectorXd> u0(config.horizon - 1,
                                     VectorXd::Zero(sys.input_dim));
      IlqrResult res = ilqr_solve(sys, cost, config.init.mean(), u0, opts);
      state.policy = std::move(res.policy);
      state.plan_controls = std::move(res.controls);
      state.plan_states = std::move(res.states);
      break;
    }
    case PlannerKind::Cem: {
      CemOptions opts = config.cem;
      opts.max_iterations = config.warm_start_iterations;
      CemResult res =
          cem_solve(sys, cost, config.init.mean(), config.horizon, opts);
      state.policy = LinearPolicy::feedforward(res.controls, sys.state_dim);
      state.plan_states =
          mean_rollout(sys, config.init.mean(), res.controls, 0);
      state.plan_controls = std::move(res.controls);
      state.cem_std = std::move(res.std_devs);
      break;
    }
  }
  return state;
}

MpcStepResult mpc_step(const SystemModel& sys,
                       const QuadraticFeatureCost& cost,
                       const MpcConfig& config, MpcState& state,
                       const Gaussian& belief) {
  MpcStepResult out;
  if (config.step_iterations > 0) {
    out.replanned = true;
    const QuadraticFeatureCost local = shift_cost(cost, state.offset);
    const SystemModel local_sys = shift_system(sys, state.offset);
    try {
      switch (config.planner) {
        case PlannerKind::I2c:
          replan_i2c(local_sys, local, config, state, belief);
          break;
        case PlannerKind::Ilqr:
          replan_ilqr(local_sys, local, config, state, belief);
          break;
        case PlannerKind::Cem:
          replan_cem(local_sys, local, config, state, belief);
          break;
      }
    } catch (const ConfigError&) {
      throw;  // misconfiguration, not a numeric failure
    } catch (const std::runtime_error&) {
      // Fail operational: keep flying the previous plan.
      ++state.failures;
      out.replanned = false;
    }
  }

  out.control = execute_control(config, state, belief);
  shift_plan(state);
  return out;
}

PartiallyObservedRun run_partially_observed(const SystemModel& sys,
                                            const QuadraticFeatureCost& cost,
                                            const MpcConfig& config,
                                            int total_steps,
                                            std::uint64_t seed) {
  if (!sys.has_measurement())
    throw ConfigError("partially observed run needs a measurement model");
  if (total_steps < 1)
    throw ConfigError("partially observed run needs at least one step");

  MpcState state = mpc_warm_start(sys, cost, config);
  FilterState filter;
  filter.belief = config.init;

  std::mt19937_64 rng(seed);
  const MatrixXd init_sqrt = sqrt_psd(config.init.cov());
  const MatrixXd process_sqrt = sqrt_psd(sys.process_noise);
  const MatrixXd meas_sqrt = sqrt_psd(sys.meas_noise);

  PartiallyObservedRun run;
  VectorXd x = config.init.mean();
  if (!config.deterministic) x += draw(init_sqrt, rng);
  run.trajectory.states.push_back(x);
  run.beliefs.push_back(filter.belief);

  for (int k = 0; k < total_steps; ++k) {
    const MpcStepResult step = mpc_step(sys, cost, config, state, filter.belief);
    if (!all_finite(step.control)) {
      run.aborted = true;
      break;
    }

    VectorXd next = sys.step(k, x, step.control);
    if (!config.deterministic) next += draw(process_sqrt, rng);
    if (!all_finite(next)) {
      run.trajectory.controls.push_back(step.control);
      run.aborted = true;
      break;
    }

    filter = ckf_predict(sys, filter, step.control, config.filter_propagator);
    VectorXd y = sys.measure(next);
    if (!config.deterministic) y += draw(meas_sqrt, rng);
    filter = ckf_update(sys, filter, y, config.filter_propagator);

    x = next;
    run.trajectory.controls.push_back(step.control);
    run.trajectory.states.push_back(x);
    run.beliefs.push_back(filter.belief);
    run.measurements.push_back(y);
    run.innovations.push_back(filter.innovation);
  }

  run.planner_failures = state.failures;
  run.jitter_events = filter.jitter_events;
  if (run.trajectory.states.size() > 1)
    run.total_cost = cost.trajectory_cost(run.trajectory);
  return run;
}

}  // namespace i2c
