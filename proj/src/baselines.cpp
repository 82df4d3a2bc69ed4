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

#include "i2c/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "i2c/common.hpp"
#include "i2c/inference.hpp"

namespace i2c {

namespace {

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

/// PSD square root via pivoted LDLT: sigma = (P^T L sqrt(D)) (.)^T. Works for
/// rank-deficient noise, unlike a Cholesky factor.
MatrixXd psd_sqrt(const MatrixXd& sigma, const char* what) {
  Eigen::LDLT<MatrixXd> ldlt(symmetrize(sigma));
  if (ldlt.info() != Eigen::Success) throw SingularCovariance(what);
  VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  MatrixXd sqrt_m = ldlt.matrixL();
  sqrt_m = ldlt.transpositionsP().transpose() * sqrt_m;
  sqrt_m *= d.asDiagonal();
  return sqrt_m;
}

struct StageAction {
  MatrixXd quad;  // Q_t over tau
  VectorXd lin;   // q_t
  double constant = 0.0;
};

/// One backward Bellman step given the (already noise-marginalized) value
/// function of the next stage. Returns the updated value function and fills
/// the policy stage. `reg` is added to Q_uu before factorizing.
struct ValueFn {
  MatrixXd quad;
  VectorXd lin;
  double constant = 0.0;
};

ValueFn bellman_step(const AffineDynamics& dyn, const QuadraticCoeffs& stage,
                     const ValueFn& next, int dx, int du, double reg,
                     MatrixXd* gain, VectorXd* offset, StageAction* action) {
  const MatrixXd f = dyn.ftau();
  MatrixXd q_quad = symmetrize(stage.quad + f.transpose() * next.quad * f);
  VectorXd q_lin =
      stage.lin + f.transpose() * (next.lin + next.quad * dyn.f0);
  double q_const = stage.constant + next.constant +
                   next.lin.dot(dyn.f0) +
                   0.5 * dyn.f0.dot(next.quad * dyn.f0);

  MatrixXd q_uu = q_quad.bottomRightCorner(du, du);
  q_uu.diagonal().array() += reg;
  Eigen::LLT<MatrixXd> llt(q_uu);
  if (llt.info() != Eigen::Success)
    throw IndefiniteQuu("control block of the state-action value lost "
                        "positive definiteness");

  const MatrixXd q_ux = q_quad.bottomLeftCorner(du, dx);
  const VectorXd q_u = q_lin.tail(du);
  *gain = -llt.solve(q_ux);
  *offset = -llt.solve(q_u);
  if (action != nullptr) {
    action->quad = q_quad;
    action->lin = q_lin;
    action->constant = q_const;
  }

  ValueFn value;
  value.quad = symmetrize(q_quad.topLeftCorner(dx, dx) +
                          q_ux.transpose() * (*gain));
  value.lin = q_lin.head(dx) + q_ux.transpose() * (*offset);
  value.constant = q_const + 0.5 * q_u.dot(*offset);
  return value;
}

/// Exponential-utility expectation of a quadratic value function over the
/// process noise: for sigma = 0 this is the plain Gaussian expectation.
ValueFn risk_marginalize(const ValueFn& next, const MatrixXd& sigma_eta,
                         double sigma) {
  ValueFn out = next;
  if (sigma_eta.size() == 0 || sigma_eta.norm() == 0.0) return out;
  if (sigma == 0.0) {
    out.constant += 0.5 * (next.quad * sigma_eta).trace();
    return out;
  }
  const MatrixXd s = psd_sqrt(sigma_eta, "process noise in the exponential-"
                                         "utility recursion");
  const int d = static_cast<int>(s.cols());
  MatrixXd a = MatrixXd::Identity(d, d) +
               sigma * s.transpose() * next.quad * s;
  a = symmetrize(a);
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw RiskInfeasible(
        "risk-averse recursion infeasible: |sigma| exceeds the critical "
        "attenuation level for this noise and value curvature");
  const MatrixXd vs = next.quad * s;  // V' S
  const VectorXd stv = s.transpose() * next.lin;
  out.quad = symmetrize(next.quad - sigma * vs * llt.solve(vs.transpose()));
  out.lin = next.lin - sigma * vs * llt.solve(stv);
  double log_det = 0.0;
  const MatrixXd l = llt.matrixL();
  for (int i = 0; i < d; ++i) log_det += 2.0 * std::log(l(i, i));
  out.constant = next.constant + 0.5 / sigma * log_det -
                 0.5 * sigma * stv.dot(llt.solve(stv));
  return out;
}

RiccatiSolution backward_pass(const LqProblem& lq, double sigma,
                              bool risk_mode) {
  const int t_max = static_cast<int>(lq.dynamics.size());
  if (t_max == 0)
    throw ConfigError("LQ problem needs at least one dynamics stage");
  const int dx = lq.dx;
  const int du = lq.du;
  const bool has_noise = !lq.process_noise.empty();

  RiccatiSolution sol;
  sol.policy.gains.resize(t_max);
  sol.policy.offsets.resize(t_max);
  sol.policy.covs.assign(t_max, MatrixXd::Zero(du, du));
  sol.value_quad.resize(t_max + 1);
  sol.value_lin.resize(t_max + 1);
  sol.value_const.resize(t_max + 1);
  sol.action_quad.resize(t_max);
  sol.action_lin.resize(t_max);
  sol.action_const.resize(t_max);

  ValueFn value{lq.terminal.quad, lq.terminal.lin, lq.terminal.constant};
  sol.value_quad[t_max] = value.quad;
  sol.value_lin[t_max] = value.lin;
  sol.value_const[t_max] = value.constant;

  for (int t = t_max - 1; t >= 0; --t) {
    ValueFn ahead = value;
    if (has_noise) {
      if (risk_mode) {
        ahead = risk_marginalize(value, lq.process_noise[t], sigma);
      } else {
        ahead.constant += 0.5 * (value.quad * lq.process_noise[t]).trace();
      }
    }
    StageAction action;
    value = bellman_step(lq.dynamics[t], lq.stage[t], ahead, dx, du, 0.0,
                         &sol.policy.gains[t], &sol.policy.offsets[t],
                         &action);
    sol.action_quad[t] = action.quad;
    sol.action_lin[t] = action.lin;
    sol.action_const[t] = action.constant;
    sol.value_quad[t] = value.quad;
    sol.value_lin[t] = value.lin;
    sol.value_const[t] = value.constant;
  }
  return sol;
}

}  // namespace

LqProblem quadratize_along(const SystemModel& sys,
                           const QuadraticFeatureCost& cost,
                           const std::vector<VectorXd>& states,
                           const std::vector<VectorXd>& controls) {
  if (states.size() != controls.size() + 1)
    throw ConfigError("nominal trajectory needs one more state than control");
  if (controls.empty())
    throw ConfigError("nominal trajectory needs at least one control");
  LqProblem lq;
  lq.dx = sys.state_dim;
  lq.du = sys.input_dim;
  const int t_max = static_cast<int>(controls.size());
  lq.dynamics.reserve(t_max);
  lq.stage.reserve(t_max);
  lq.process_noise.assign(t_max, sys.process_noise);
  for (int t = 0; t < t_max; ++t) {
    lq.dynamics.push_back(linearize(sys, t, states[t], controls[t]));
    lq.stage.push_back(quadratize(cost, t, states[t], controls[t]));
  }
  lq.terminal = cost.has_terminal()
                    ? quadratize_terminal(cost, states.back())
                    : QuadraticCoeffs{MatrixXd::Zero(lq.dx, lq.dx),
                                      VectorXd::Zero(lq.dx), 0.0};
  return lq;
}

RiccatiSolution lqr_backward(const LqProblem& lq) {
  return backward_pass(lq, 0.0, /*risk_mode=*/false);
}

double expected_value(const RiccatiSolution& sol, const Gaussian& x1) {
  return 0.5 * (sol.value_quad.front() * x1.cov()).trace() +
         0.5 * x1.mean().dot(sol.value_quad.front() * x1.mean()) +
         sol.value_lin.front().dot(x1.mean()) + sol.value_const.front();
}

RiccatiSolution risk_sensitive_backward(const LqProblem& lq, double sigma) {
  if (!std::isfinite(sigma))
    throw ConfigError("risk parameter must be finite");
  return backward_pass(lq, sigma, /*risk_mode=*/true);
}

// ---------------------------------------------------------------------------
// iLQR
// ---------------------------------------------------------------------------

namespace {

struct Nominal {
  std::vector<VectorXd> states;
  std::vector<VectorXd> controls;
  double cost = std::numeric_limits<double>::infinity();
};

/// Deterministic forward simulation under u_t = u_ref_t + alpha k_t +
/// K_t (x - x_ref_t). Returns infinity cost when the rollout leaves the
/// finite domain so the line search simply rejects the candidate.
Nominal forward_roll(const SystemModel& sys, const QuadraticFeatureCost& cost,
                     const VectorXd& x0, const Nominal& ref,
                     const std::vector<MatrixXd>& gains,
                     const std::vector<VectorXd>& steps, double alpha) {
  const int t_max = static_cast<int>(ref.controls.size());
  Nominal out;
  out.states.resize(t_max + 1);
  out.controls.resize(t_max);
  out.states[0] = x0;
  double total = 0.0;
  for (int t = 0; t < t_max; ++t) {
    VectorXd u = ref.controls[t] + alpha * steps[t] +
                 gains[t] * (out.states[t] - ref.states[t]);
    if (!all_finite(u)) return out;
    out.controls[t] = u;
    total += cost.step_cost(t, out.states[t], u);
    VectorXd next = sys.step(t, out.states[t], u);
    if (!all_finite(next)) return out;
    out.states[t + 1] = next;
  }
  if (cost.has_terminal()) total += cost.terminal_cost(out.states.back());
  if (std::isfinite(total)) out.cost = total;
  return out;
}

}  // namespace

IlqrResult ilqr_solve(const SystemModel& sys, const QuadraticFeatureCost& cost,
                      const VectorXd& x0, const std::vector<VectorXd>& u_init,
                      const IlqrOptions& opts) {
  if (u_init.empty())
    throw ConfigError("iLQR needs at least one initial control");
  const int t_max = static_cast<int>(u_init.size());
  const int dx = sys.state_dim;
  const int du = sys.input_dim;

  Nominal nominal;
  nominal.states.resize(t_max + 1);
  nominal.controls = u_init;
  nominal.states[0] = x0;
  double total = 0.0;
  for (int t = 0; t < t_max; ++t) {
    total += cost.step_cost(t, nominal.states[t], nominal.controls[t]);
    nominal.states[t + 1] = sys.step(t, nominal.states[t], nominal.controls[t]);
    if (!all_finite(nominal.states[t + 1]))
      throw NonFiniteState("initial iLQR rollout left the finite domain");
  }
  if (cost.has_terminal()) total += cost.terminal_cost(nominal.states.back());
  nominal.cost = total;

  IlqrResult result;
  result.cost_trace.push_back(nominal.cost);

  double reg = opts.reg_init;
  std::vector<MatrixXd> gains(t_max);
  std::vector<VectorXd> steps(t_max);

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    const auto tic = std::chrono::steady_clock::now();

    // Expansion around the nominal, expressed in deviation coordinates so the
    // dynamics offset vanishes on the nominal itself.
    std::vector<AffineDynamics> dyn(t_max);
    std::vector<QuadraticCoeffs> stage(t_max);
    for (int t = 0; t < t_max; ++t) {
      dyn[t] = linearize(sys, t, nominal.states[t], nominal.controls[t]);
      dyn[t].f0.setZero();
      QuadraticCoeffs abs_stage =
          quadratize(cost, t, nominal.states[t], nominal.controls[t]);
      VectorXd tau(dx + du);
      tau << nominal.states[t], nominal.controls[t];
      stage[t].quad = abs_stage.quad;
      stage[t].lin = abs_stage.quad * tau + abs_stage.lin;
      stage[t].constant = 0.0;
    }
    ValueFn value{MatrixXd::Zero(dx, dx), VectorXd::Zero(dx), 0.0};
    if (cost.has_terminal()) {
      QuadraticCoeffs term = quadratize_terminal(cost, nominal.states.back());
      value.quad = term.quad;
      value.lin = term.quad * nominal.states.back() + term.lin;
    }

    // Backward pass; an indefinite control block restarts it with a heavier
    // Levenberg loading.
    bool backward_ok = false;
    while (!backward_ok) {
      try {
        ValueFn v = value;
        for (int t = t_max - 1; t >= 0; --t) {
          MatrixXd gain;
          VectorXd step;
          v = bellman_step(dyn[t], stage[t], v, dx, du, reg, &gain, &step,
                           nullptr);
          gains[t] = gain;
          steps[t] = step;
        }
        backward_ok = true;
      } catch (const IndefiniteQuu&) {
        reg *= 2.0;
        if (reg > opts.reg_max) break;
      }
    }
    if (!backward_ok) {
      result.line_search_failed = true;
      result.iter_seconds.push_back(elapsed_seconds(tic));
      ++result.iterations;
      break;
    }

    // Backtracking line search accepting only strict improvement.
    bool accepted = false;
    double best_candidate = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 10; ++k) {
      const double alpha = std::pow(0.5, k);
      Nominal cand = forward_roll(sys, cost, x0, nominal, gains, steps, alpha);
      best_candidate = std::min(best_candidate, cand.cost);
      if (cand.cost < nominal.cost) {
        nominal = std::move(cand);
        accepted = true;
        break;
      }
    }

    result.iter_seconds.push_back(elapsed_seconds(tic));
    ++result.iterations;

    if (!accepted) {
      // No strict decrease. If even the best candidate is only a hair above
      // the nominal we are at a local optimum, not in trouble.
      if (best_candidate - nominal.cost <=
          opts.tolerance * std::max(std::abs(nominal.cost), 1.0)) {
        result.converged = true;
      } else {
        result.line_search_failed = true;
      }
      break;
    }
    reg = std::max(reg * 0.5, 1e-12);
    const double prev = result.cost_trace.back();
    result.cost_trace.push_back(nominal.cost);
    const double improvement =
        (prev - nominal.cost) / std::max(std::abs(prev), 1e-12);
    if (opts.tolerance > 0.0 && improvement < opts.tolerance) {
      result.converged = true;
      break;
    }
  }

  // Final expansion around the accepted nominal so the returned policy is
  // consistent with the returned trajectory (its feedforward residual is zero
  // at convergence).
  {
    std::vector<AffineDynamics> dyn(t_max);
    std::vector<QuadraticCoeffs> stage(t_max);
    for (int t = 0; t < t_max; ++t) {
      dyn[t] = linearize(sys, t, nominal.states[t], nominal.controls[t]);
      dyn[t].f0.setZero();
      QuadraticCoeffs abs_stage =
          quadratize(cost, t, nominal.states[t], nominal.controls[t]);
      VectorXd tau(dx + du);
      tau << nominal.states[t], nominal.controls[t];
      stage[t].quad = abs_stage.quad;
      stage[t].lin = abs_stage.quad * tau + abs_stage.lin;
      stage[t].constant = 0.0;
    }
    ValueFn value{MatrixXd::Zero(dx, dx), VectorXd::Zero(dx), 0.0};
    if (cost.has_terminal()) {
      QuadraticCoeffs term = quadratize_terminal(cost, nominal.states.back());
      value.quad = term.quad;
      value.lin = term.quad * nominal.states.back() + term.lin;
    }
    result.policy.gains.resize(t_max);
    result.policy.offsets.resize(t_max);
    result.policy.covs.assign(t_max, MatrixXd::Zero(du, du));
    bool ok = false;
    double pol_reg = reg;
    while (!ok) {
      try {
        ValueFn v = value;
        for (int t = t_max - 1; t >= 0; --t) {
          MatrixXd gain;
          VectorXd step;
          v = bellman_step(dyn[t], stage[t], v, dx, du, pol_reg, &gain, &step,
                           nullptr);
          result.policy.gains[t] = gain;
          result.policy.offsets[t] = nominal.controls[t] + step -
                                     gain * nominal.states[t];
        }
        ok = true;
      } catch (const IndefiniteQuu&) {
        pol_reg = std::max(pol_reg * 10.0, 1e-6);
        if (pol_reg > opts.reg_max) throw;
      }
    }
  }

  result.states = std::move(nominal.states);
  result.controls = std::move(nominal.controls);
  return result;
}

// ---------------------------------------------------------------------------
// Cross-entropy method
// ---------------------------------------------------------------------------

CemResult cem_solve(const SystemModel& sys, const QuadraticFeatureCost& cost,
                    const VectorXd& x0, int horizon, const CemOptions& opts) {
  if (horizon < 2) throw ConfigError("CEM needs a horizon of at least 2");
  if (opts.population < 2)
    throw ConfigError("CEM needs a population of at least 2");
  const int t_max = horizon - 1;
  const int du = sys.input_dim;
  const int n = t_max * du;
  const int n_elite =
      opts.elites > 0 ? opts.elites : std::max(2, opts.population / 10);
  if (n_elite > opts.population)
    throw ConfigError("CEM elite count exceeds the population");

  VectorXd mean = VectorXd::Zero(n);
  if (!opts.init_mean.empty()) {
    if (static_cast<int>(opts.init_mean.size()) != t_max)
      throw ConfigError("CEM initial mean must carry horizon-1 controls");
    for (int t = 0; t < t_max; ++t) {
      if (opts.init_mean[t].size() != du)
        throw ConfigError("CEM initial mean has the wrong control dimension");
      mean.segment(t * du, du) = opts.init_mean[t];
    }
  }
  VectorXd std_dev = VectorXd::Constant(n, opts.init_std);
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> unit;

  const auto score = [&](const VectorXd& flat) {
    VectorXd x = x0;
    double total = 0.0;
    for (int t = 0; t < t_max; ++t) {
      const VectorXd u = flat.segment(t * du, du);
      total += cost.step_cost(t, x, u);
      x = sys.step(t, x, u);
      if (!all_finite(x)) return std::numeric_limits<double>::infinity();
    }
    if (cost.has_terminal()) total += cost.terminal_cost(x);
    return std::isfinite(total) ? total
                                : std::numeric_limits<double>::infinity();
  };

  CemResult result;
  std::vector<VectorXd> samples(opts.population);
  std::vector<double> costs(opts.population);
  std::vector<int> order(opts.population);
  int flat_iters = 0;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    const auto tic = std::chrono::steady_clock::now();
    for (int i = 0; i < opts.population; ++i) {
      VectorXd draw(n);
      for (int j = 0; j < n; ++j) draw[j] = unit(rng);
      samples[i] = mean + std_dev.cwiseProduct(draw);
      costs[i] = score(samples[i]);
    }
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + n_elite, order.end(),
                      [&](int a, int b) { return costs[a] < costs[b]; });

    VectorXd new_mean = VectorXd::Zero(n);
    double elite_cost = 0.0;
    for (int e = 0; e < n_elite; ++e) {
      new_mean += samples[order[e]];
      elite_cost += costs[order[e]];
    }
    new_mean /= n_elite;
    elite_cost /= n_elite;
    VectorXd var = VectorXd::Zero(n);
    for (int e = 0; e < n_elite; ++e) {
      const VectorXd d = samples[order[e]] - new_mean;
      var += d.cwiseProduct(d);
    }
    var = (var / n_elite).cwiseMax(opts.var_floor);

    mean = new_mean;
    std_dev = var.cwiseSqrt();
    result.iter_seconds.push_back(elapsed_seconds(tic));
    ++result.iterations;

    if (!result.cost_trace.empty() && opts.tolerance > 0.0) {
      const double prev = result.cost_trace.back();
      const double improvement =
          (prev - elite_cost) / std::max(std::abs(prev), 1e-12);
      flat_iters = improvement < opts.tolerance ? flat_iters + 1 : 0;
    }
    result.cost_trace.push_back(elite_cost);
    if (flat_iters >= 5) break;
  }

  result.controls.resize(t_max);
  result.std_devs.resize(t_max);
  for (int t = 0; t < t_max; ++t) {
    result.controls[t] = mean.segment(t * du, du);
    result.std_devs[t] = std_dev.segment(t * du, du);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Static Gauss-Newton inference
// ---------------------------------------------------------------------------

InverseResult gauss_newton_inference(const VectorFn& f,
                                     const JacobianFn& jacobian,
                                     const VectorXd& y_star,
                                     const Gaussian& prior,
                                     const InverseOptions& opts) {
  const int d = static_cast<int>(prior.mean().size());
  const int dz = static_cast<int>(y_star.size());

  // tr E[dz dz^T] of the fit residual dz = y* - f(x) under a belief, via the
  // configured moment backend.
  const auto fit_trace = [&](const Gaussian& g) {
    JointGaussian joint =
        propagate(opts.propagator, f, g, MatrixXd::Zero(dz, dz), jacobian);
    return (y_star - joint.mean_b()).squaredNorm() + joint.cov_bb().trace();
  };

  InverseResult result;
  const double initial_residual = (y_star - f(prior.mean())).norm();

  double alpha = opts.alpha;
  if (opts.mode == InverseMode::Em) {
    // Calibrate the starting temperature from a prior-only residual pass.
    const double tr = fit_trace(prior);
    if (tr > 1e-300) alpha = static_cast<double>(dz) / tr;
  }

  result.trace.push_back({0, initial_residual, alpha, prior.mean()});

  Gaussian belief = prior;       // Em carries the posterior forward
  VectorXd xhat = prior.mean();  // Iterated linearization point
  MatrixXd prior_prec;           // Iterated keeps the original prior
  if (opts.mode == InverseMode::Iterated) {
    Eigen::LLT<MatrixXd> llt =
        safe_llt(prior.cov(), "prior covariance in inverse inference");
    prior_prec = llt.solve(MatrixXd::Identity(d, d));
  }

  bool non_finite = false;
  double worst_residual = 0.0;  // over post-prior iterates
  result.mean = prior.mean();
  result.cov = prior.cov();

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    try {
      if (opts.mode == InverseMode::Em) {
        JointGaussian joint =
            propagate(opts.propagator, f, belief,
                      MatrixXd::Identity(dz, dz) / alpha, jacobian);
        Gaussian posterior = joint.condition_on_b(y_star);

        // Single-stage temperature re-estimate with the moments recomputed
        // under the new belief, clamped so consecutive temperatures stay
        // within a factor gamma.
        const double tr = fit_trace(posterior);
        if (tr > 1e-300) {
          const double raw = static_cast<double>(dz) / tr;
          alpha = std::clamp(raw, alpha / opts.gamma, alpha * opts.gamma);
        }
        belief = posterior;
        result.mean = posterior.mean();
        result.cov = posterior.cov();
      } else {
        // Surrogate model linearized at xhat, posterior recomputed from the
        // original prior: the damped Gauss-Newton iteration.
        const VectorXd fx = f(xhat);
        const MatrixXd j = jacobian ? jacobian(xhat) : fd_jacobian(f, xhat);
        MatrixXd lambda = prior_prec + alpha * j.transpose() * j;
        Eigen::LLT<MatrixXd> post_llt =
            safe_llt(symmetrize(lambda), "posterior precision");
        const VectorXd r = y_star - fx - j * (prior.mean() - xhat);
        const VectorXd mean =
            prior.mean() + post_llt.solve(alpha * j.transpose() * r);
        xhat = opts.theta * xhat + (1.0 - opts.theta) * mean;
        result.mean = mean;
        result.cov = post_llt.solve(MatrixXd::Identity(d, d));
      }
    } catch (const NonFinitePropagation&) {
      non_finite = true;
      result.trace.push_back({iter, std::numeric_limits<double>::quiet_NaN(),
                              alpha, result.mean});
      break;
    }

    if (!all_finite(result.mean)) {
      non_finite = true;
      result.trace.push_back({iter, std::numeric_limits<double>::quiet_NaN(),
                              alpha, result.mean});
      break;
    }
    const double residual = (y_star - f(result.mean)).norm();
    result.trace.push_back({iter, residual, alpha, result.mean});
    if (!std::isfinite(residual)) {
      non_finite = true;
      break;
    }
    worst_residual = std::max(worst_residual, residual);
    if (residual < opts.converged_residual) break;
  }

  const double final_residual = result.trace.back().residual;
  if (non_finite) {
    result.regime = "diverged";
  } else if (final_residual < opts.converged_residual) {
    result.regime = "converged";
  } else if (worst_residual > initial_residual) {
    result.regime = "diverged";
  } else {
    result.regime = "stalled";
  }
  return result;
}

ReferenceInverseProblem reference_inverse_problem() {
  ReferenceInverseProblem problem;
  problem.f = [](const VectorXd& x) {
    VectorXd y(1);
    y[0] = x[0] * x[0] * x[0] - 2.0 * x[0] + 2.0 * std::sin(3.0 * x[0]);
    return y;
  };
  problem.jacobian = [](const VectorXd& x) {
    MatrixXd j(1, 1);
    j(0, 0) = 3.0 * x[0] * x[0] - 2.0 + 6.0 * std::cos(3.0 * x[0]);
    return j;
  };
  problem.y_star = VectorXd::Constant(1, 3.0);
  problem.prior = Gaussian{VectorXd::Zero(1),
                           MatrixXd::Constant(1, 1, 4.0)};
  problem.em_propagator = Propagator::gauss_hermite(10);
  return problem;
}

}  // namespace i2c
