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

#include "i2c/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

#include "i2c/baselines.hpp"

namespace i2c {

namespace {

double elapsed_seconds(
    const std::chrono::steady_clock::time_point& tic) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - tic)
      .count();
}

MatrixXd precision_of(const Gaussian& g, const char* what) {
  const int d = g.dim();
  return symmetrize(safe_llt(g.cov(), what).solve(MatrixXd::Identity(d, d)));
}

// Control prior of the first sweep: zero gain, diffuse covariance.
LinearPolicy diffuse_prior(int dx, int du, int stages, const MatrixXd& cov,
                           const VectorXd& mean) {
  if (cov.rows() != du || cov.cols() != du)
    throw ConfigError("input prior covariance must be square in the control "
                      "dimension");
  VectorXd offset = mean.size() == 0 ? VectorXd::Zero(du) : mean;
  if (offset.size() != du)
    throw ConfigError("input prior mean has the wrong dimension");
  LinearPolicy prior;
  prior.gains.assign(stages, MatrixXd::Zero(du, dx));
  prior.offsets.assign(stages, offset);
  prior.covs.assign(stages, cov);
  return prior;
}

struct ExpertStage {
  MatrixXd gain;
  VectorXd mean_x;
  VectorXd mean_u;
  MatrixXd state_precision;
};

// Forward sweep only; the caller seeds terminal_filtered (or keeps the
// prior) before smoothing.
BeliefTrajectory forward_pass(const SystemModel& sys,
                              const QuadraticFeatureCost& cost,
                              const Gaussian& init,
                              const LinearPolicy& prior_policy, int horizon,
                              double alpha, const Propagator& prop,
                              bool update_costs) {
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (init.dim() != sys.state_dim)
    throw ConfigError("initial belief dimension does not match the system");
  const int stages = horizon - 1;
  if (static_cast<int>(prior_policy.gains.size()) != stages ||
      static_cast<int>(prior_policy.offsets.size()) != stages ||
      static_cast<int>(prior_policy.covs.size()) != stages)
    throw ConfigError("control prior must carry horizon-1 stages");
  if (update_costs && !(alpha > 0.0 && std::isfinite(alpha)))
    throw ConfigError("temperature must be positive and finite");

  BeliefTrajectory bt;
  bt.dx = sys.state_dim;
  bt.du = sys.input_dim;
  bt.state_prior.reserve(horizon);
  bt.tau_prior.reserve(stages);
  bt.tau_filtered.reserve(stages);
  bt.prediction.reserve(stages);

  Gaussian belief = init;
  bt.state_prior.push_back(belief);
  for (int t = 0; t < stages; ++t) {
    bt.tau_prior.push_back(control_step(belief, prior_policy.gains[t],
                                        prior_policy.offsets[t],
                                        prior_policy.covs[t]));
    bt.tau_filtered.push_back(
        update_costs ? cost_innovation(cost, t, bt.tau_prior[t], alpha, prop)
                     : bt.tau_prior[t]);
    bt.prediction.push_back(
        dynamics_prediction(sys, t, bt.tau_filtered[t], prop));
    belief = bt.prediction[t].marginal_b();
    bt.state_prior.push_back(belief);
  }
  bt.terminal_filtered = belief;
  return bt;
}

}  // namespace

std::vector<VectorXd> BeliefTrajectory::mean_states() const {
  std::vector<VectorXd> means;
  means.reserve(state_smoothed.size());
  for (const Gaussian& g : state_smoothed) means.push_back(g.mean());
  return means;
}

std::vector<VectorXd> BeliefTrajectory::mean_controls() const {
  std::vector<VectorXd> means;
  means.reserve(tau_smoothed.size());
  for (const Gaussian& g : tau_smoothed)
    means.push_back(g.mean().tail(du));
  return means;
}

Gaussian control_step(const Gaussian& state, const MatrixXd& gain,
                      const VectorXd& offset, const MatrixXd& policy_cov) {
  const int dx = state.dim();
  const int du = static_cast<int>(offset.size());
  if (gain.rows() != du || gain.cols() != dx || policy_cov.rows() != du ||
      policy_cov.cols() != du)
    throw ConfigError("control step received inconsistent policy blocks");

  VectorXd mean(dx + du);
  mean.head(dx) = state.mean();
  mean.tail(du) = gain * state.mean() + offset;

  MatrixXd cov(dx + du, dx + du);
  const MatrixXd cross = state.cov() * gain.transpose();
  cov.topLeftCorner(dx, dx) = state.cov();
  cov.topRightCorner(dx, du) = cross;
  cov.bottomLeftCorner(du, dx) = cross.transpose();
  cov.bottomRightCorner(du, du) =
      symmetrize(gain * cross + policy_cov);
  return Gaussian(mean, cov);
}

Gaussian cost_innovation(const QuadraticFeatureCost& cost, int t,
                         const Gaussian& belief, double alpha,
                         const Propagator& prop) {
  if (!(alpha > 0.0 && std::isfinite(alpha)))
    throw ConfigError("temperature must be positive and finite");

  VectorFn h;
  JacobianFn jac;
  VectorXd target;
  if (t < 0) {
    if (!cost.has_terminal())
      throw ConfigError("terminal innovation requested without a terminal "
                        "feature");
    h = [&cost](const VectorXd& x) { return cost.terminal_features(x); };
    if (cost.terminal_features_jacobian)
      jac = [&cost](const VectorXd& x) {
        return cost.terminal_features_jacobian(x);
      };
    target = cost.terminal_target;
  } else {
    const int dx = cost.dx;
    h = [&cost, t, dx](const VectorXd& tau) {
      return cost.features(t, tau.head(dx), tau.tail(tau.size() - dx));
    };
    if (cost.features_jacobian)
      jac = [&cost, t, dx](const VectorXd& tau) {
        return cost.features_jacobian(t, tau.head(dx),
                                      tau.tail(tau.size() - dx));
      };
    target = cost.target(t);
  }

  const JointGaussian joint =
      propagate(prop, h, belief, cost.observation_noise(t, alpha), jac);
  return joint.condition_on_b(target);
}

JointGaussian dynamics_prediction(const SystemModel& sys, int t,
                                  const Gaussian& tau, const Propagator& prop) {
  const int dx = sys.state_dim;
  if (tau.dim() != dx + sys.input_dim)
    throw ConfigError("dynamics prediction expects a joint (x, u) belief");
  const VectorFn f = [&sys, t, dx](const VectorXd& v) {
    return sys.step(t, v.head(dx), v.tail(v.size() - dx));
  };
  JacobianFn jac;
  if (sys.jacobian)
    jac = [&sys, t, dx](const VectorXd& v) {
      return sys.jacobian(t, v.head(dx), v.tail(v.size() - dx));
    };
  return propagate(prop, f, tau, sys.process_noise, jac);
}

void backward_smooth(BeliefTrajectory& bt) {
  const int horizon = bt.horizon();
  const int stages = horizon - 1;
  bt.state_smoothed.assign(horizon, Gaussian());
  bt.tau_smoothed.assign(stages, Gaussian());
  bt.state_smoothed[horizon - 1] = bt.terminal_filtered;

  for (int t = stages - 1; t >= 0; --t) {
    const JointGaussian& pred = bt.prediction[t];
    // Gain of the conditional E[tau_t | x_{t+1}] under the filtered joint.
    const auto llt = safe_llt(pred.cov_bb(), "predicted state covariance");
    const MatrixXd gain =
        llt.solve(pred.cov_ab().transpose()).transpose();

    const Gaussian& next = bt.state_smoothed[t + 1];
    const VectorXd mean =
        pred.mean_a() + gain * (next.mean() - pred.mean_b());
    const MatrixXd cov = symmetrize(
        pred.cov_aa() +
        gain * (next.cov() - pred.cov_bb()) * gain.transpose());
    bt.tau_smoothed[t] = Gaussian(mean, cov);
    bt.state_smoothed[t] =
        Gaussian(mean.head(bt.dx), cov.topLeftCorner(bt.dx, bt.dx));
  }
  bt.policy = extract_policy(bt.tau_smoothed, bt.dx, &bt.policy_fallbacks);
}

LinearPolicy extract_policy(const std::vector<Gaussian>& tau_smoothed, int dx,
                            int* fallbacks) {
  LinearPolicy policy;
  int dropped = 0;
  for (const Gaussian& tau : tau_smoothed) {
    const int du = tau.dim() - dx;
    const JointGaussian ux(
        tau.mean().tail(du), tau.mean().head(dx),
        tau.cov().bottomRightCorner(du, du), tau.cov().topLeftCorner(dx, dx),
        tau.cov().bottomLeftCorner(du, dx));
    try {
      const JointGaussian::Regression reg = ux.regression_on_b();
      policy.gains.push_back(reg.gain);
      policy.offsets.push_back(reg.offset);
      policy.covs.push_back(symmetrize(reg.cov));
    } catch (const SingularCovariance&) {
      // Degenerate state marginal: no usable correlation, keep the mean
      // control open loop.
      ++dropped;
      policy.gains.push_back(MatrixXd::Zero(du, dx));
      policy.offsets.push_back(tau.mean().tail(du));
      policy.covs.push_back(tau.cov().bottomRightCorner(du, du));
    }
  }
  if (fallbacks) *fallbacks = dropped;
  return policy;
}

BeliefTrajectory e_step(const SystemModel& sys,
                        const QuadraticFeatureCost& cost, const Gaussian& init,
                        const LinearPolicy& prior_policy, int horizon,
                        double alpha, const Propagator& prop,
                        bool terminal_innovation, bool update_costs) {
  BeliefTrajectory bt = forward_pass(sys, cost, init, prior_policy, horizon,
                                     alpha, prop, update_costs);
  if (update_costs && terminal_innovation && cost.has_terminal())
    bt.terminal_filtered =
        cost_innovation(cost, -1, bt.terminal_filtered, alpha, prop);
  backward_smooth(bt);
  return bt;
}

MStepResult m_step(const QuadraticFeatureCost& cost,
                   const BeliefTrajectory& bt, double alpha, double gamma,
                   const Propagator& prop, bool terminal_innovation) {
  if (!(gamma >= 1.0))
    throw ConfigError("temperature trust region must be at least 1");
  const int stages = bt.horizon() - 1;
  const bool terminal = terminal_innovation && cost.has_terminal();

  double dofs = static_cast<double>(stages) * cost.dz;
  double denom = 0.0;
  for (int t = 0; t < stages; ++t) {
    const ResidualMoments mom =
        residual_moments(cost, t, bt.tau_smoothed[t], prop);
    denom += (cost.weight(t) *
              (mom.cov + mom.mean * mom.mean.transpose()))
                 .trace();
  }
  if (terminal) {
    dofs += cost.dz_term;
    const ResidualMoments mom =
        residual_moments(cost, -1, bt.state_smoothed.back(), prop);
    denom += (cost.terminal_weight *
              (mom.cov + mom.mean * mom.mean.transpose()))
                 .trace();
  }
  if (dofs <= 0.0)
    throw ConfigError("temperature update needs at least one innovation");

  MStepResult out;
  if (!(denom > dofs * 1e-300)) {
    // The posterior reproduces every target exactly; the temperature has no
    // gradient left.
    out.alpha = alpha;
    out.alpha_raw = alpha;
    out.underflow = true;
    return out;
  }
  out.alpha_raw = dofs / denom;
  out.alpha = std::clamp(out.alpha_raw, alpha / gamma, alpha * gamma);
  return out;
}

double expected_trajectory_cost(const QuadraticFeatureCost& cost,
                                const BeliefTrajectory& bt,
                                const Propagator& prop) {
  double total = 0.0;
  for (int t = 0; t < bt.horizon() - 1; ++t)
    total += expected_cost(cost, t, bt.tau_smoothed[t], prop);
  if (cost.has_terminal())
    total += expected_cost(cost, -1, bt.state_smoothed.back(), prop);
  return total;
}

LinearPolicy SolveResult::feedforward() const {
  return LinearPolicy::feedforward(mean_controls,
                                   beliefs.dx > 0 ? beliefs.dx : 1);
}

SolveResult solve(const SystemModel& sys, const QuadraticFeatureCost& cost,
                  const Gaussian& init, int horizon,
                  const SolverOptions& opts) {
  if (opts.max_iterations < 1)
    throw ConfigError("solve needs at least one iteration");
  if (opts.window < 1) throw ConfigError("convergence window must be >= 1");
  const int stages = horizon - 1;

  LinearPolicy prior = diffuse_prior(sys.state_dim, sys.input_dim, stages,
                                     opts.input_prior_cov,
                                     opts.input_prior_mean);

  double alpha = opts.alpha_init;
  if (!(alpha > 0.0)) {
    // Calibrate so the first innovations carry unit information relative to
    // the cost scale seen by the open prior.
    BeliefTrajectory prior_bt = e_step(sys, cost, init, prior, horizon, 1.0,
                                       opts.propagator,
                                       opts.terminal_innovation,
                                       /*update_costs=*/false);
    const MStepResult calib =
        m_step(cost, prior_bt, 1.0, std::numeric_limits<double>::infinity(),
               opts.propagator, opts.terminal_innovation);
    alpha = calib.underflow ? 1.0 : calib.alpha_raw;
  }

  SolveResult res;
  int settled = 0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const auto tic = std::chrono::steady_clock::now();
    res.beliefs = e_step(sys, cost, init, prior, horizon, alpha,
                         opts.propagator, opts.terminal_innovation);
    res.cost_trace.push_back(
        expected_trajectory_cost(cost, res.beliefs, opts.propagator));

    const MStepResult m = m_step(cost, res.beliefs, alpha, opts.gamma,
                                 opts.propagator, opts.terminal_innovation);
    alpha = m.alpha;
    res.alpha_trace.push_back(alpha);
    prior = res.beliefs.policy;
    res.iter_seconds.push_back(elapsed_seconds(tic));
    res.iterations = it + 1;

    if (m.underflow) {
      res.converged = true;
      break;
    }
    if (it >= 1) {
      const double prev = res.cost_trace[it - 1];
      const double change = std::abs(res.cost_trace[it] - prev);
      settled = change <= opts.tolerance * std::max(1.0, std::abs(prev))
                    ? settled + 1
                    : 0;
      if (settled >= opts.window) {
        res.converged = true;
        break;
      }
    }
  }

  res.policy = res.beliefs.policy;
  res.mean_states = res.beliefs.mean_states();
  res.mean_controls = res.beliefs.mean_controls();
  res.alpha = alpha;
  return res;
}

ControlLaw expert_law(const SolveResult& result) {
  auto stages = std::make_shared<std::vector<ExpertStage>>();
  const int n = static_cast<int>(result.policy.gains.size());
  stages->reserve(n);
  for (int t = 0; t < n; ++t) {
    ExpertStage s;
    s.gain = result.policy.gains[t];
    s.mean_x = result.beliefs.state_smoothed[t].mean();
    s.mean_u = result.mean_controls[t];
    try {
      s.state_precision =
          precision_of(result.beliefs.state_smoothed[t], "plan marginal");
    } catch (const SingularCovariance&) {
      // Treat a degenerate plan marginal as exact: any deviation from it
      // disables the feedback correction.
      s.state_precision = MatrixXd::Constant(
          s.mean_x.size(), s.mean_x.size(),
          std::numeric_limits<double>::infinity());
    }
    stages->push_back(std::move(s));
  }
  return [stages](int t, const VectorXd& x) {
    const int idx =
        std::clamp(t, 0, static_cast<int>(stages->size()) - 1);
    const ExpertStage& s = (*stages)[idx];
    const VectorXd dev = x - s.mean_x;
    const double d = dev.dot(s.state_precision * dev);
    const double weight = std::isfinite(d) ? std::exp(-0.5 * d) : 0.0;
    return VectorXd(s.mean_u + weight * (s.gain * dev));
  };
}

ControlLaw select_law(const SolveResult& result, PolicyMode mode) {
  switch (mode) {
    case PolicyMode::Feedforward:
      return result.feedforward().law();
    case PolicyMode::Feedback:
      return result.policy.law();
    case PolicyMode::Expert:
      return expert_law(result);
  }
  throw ConfigError("unknown policy mode");
}

CovarianceControlResult covariance_control_solve(
    const SystemModel& sys, const QuadraticFeatureCost& cost,
    const Gaussian& init, const Gaussian& target, int horizon,
    const CovarianceControlOptions& opts) {
  if (target.dim() != sys.state_dim)
    throw ConfigError("target distribution dimension does not match the "
                      "system");
  if (opts.max_iterations < 1)
    throw ConfigError("covariance control needs at least one iteration");
  const int stages = horizon - 1;
  if (stages < 1)
    throw ConfigError("covariance control needs at least one stage");

  LinearPolicy prior = diffuse_prior(sys.state_dim, sys.input_dim, stages,
                                     opts.input_prior_cov, VectorXd());

  // The temperature only prices control effort here; the task lives in the
  // terminal seed. It is calibrated once and then held, because re-fitting
  // it against an effort-only cost contracts the posterior controls and the
  // update ratchets the temperature up until the seed loses authority.
  double alpha = opts.alpha_init;
  if (!(alpha > 0.0)) {
    BeliefTrajectory prior_bt =
        e_step(sys, cost, init, prior, horizon, 1.0, opts.propagator,
               /*terminal_innovation=*/false, /*update_costs=*/false);
    const MStepResult calib =
        m_step(cost, prior_bt, 1.0, std::numeric_limits<double>::infinity(),
               opts.propagator, /*terminal_innovation=*/false);
    alpha = calib.underflow ? 1.0 : calib.alpha_raw;
  }

  const Gaussian::Canonical target_nat = target.canonical();
  const double anneal_span =
      opts.anneal_fraction * static_cast<double>(opts.max_iterations);

  CovarianceControlResult res;
  for (int it = 0; it < opts.max_iterations; ++it) {
    res.beliefs = forward_pass(sys, cost, init, prior, horizon, alpha,
                               opts.propagator, /*update_costs=*/true);

    // Seed the smoother with the target density, annealed against the
    // forward prediction so early sweeps stay close to reachable beliefs.
    const double beta =
        anneal_span > 0.0
            ? std::max(0.0, 1.0 - static_cast<double>(it) / anneal_span)
            : 0.0;
    Gaussian seed = target;
    if (beta > 0.0) {
      const Gaussian::Canonical fwd =
          res.beliefs.state_prior.back().canonical();
      seed = Gaussian::from_canonical(target_nat.eta + beta * fwd.eta,
                                      target_nat.lambda + beta * fwd.lambda);
    }
    res.beliefs.terminal_filtered = seed;
    backward_smooth(res.beliefs);
    prior = res.beliefs.policy;
    res.iterations = it + 1;

    // Diagnose this iteration's policy by its innovation-free closed loop.
    const BeliefTrajectory replay =
        forward_pass(sys, cost, init, prior, horizon, alpha, opts.propagator,
                     /*update_costs=*/false);
    res.kl_trace.push_back(
        kl_divergence(target, replay.state_prior.back()));
  }

  res.policy = res.beliefs.policy;
  res.alpha = alpha;
  return res;
}

DualityReport duality_report(const SystemModel& sys,
                             const QuadraticFeatureCost& cost,
                             const Gaussian& init, int horizon, double alpha,
                             const MatrixXd& input_prior_cov,
                             const Propagator& prop) {
  LinearPolicy prior = diffuse_prior(sys.state_dim, sys.input_dim,
                                     horizon - 1, input_prior_cov, VectorXd());
  BeliefTrajectory bt =
      e_step(sys, cost, init, prior, horizon, alpha, prop);

  std::vector<VectorXd> xs(horizon, VectorXd::Zero(sys.state_dim));
  std::vector<VectorXd> us(horizon - 1, VectorXd::Zero(sys.input_dim));
  const LqProblem lq = quadratize_along(sys, cost, xs, us);
  const RiccatiSolution riccati = lqr_backward(lq);

  const int dx = sys.state_dim;
  const int du = sys.input_dim;
  const MatrixXd eye_x = MatrixXd::Identity(dx, dx);

  DualityReport rep;
  rep.alpha = alpha;
  for (int t = 0; t < horizon; ++t) {
    const Gaussian& smoothed = bt.state_smoothed[t];
    const Gaussian& fwd = bt.state_prior[t];
    rep.state_message.push_back(
        symmetrize(precision_of(smoothed, "smoothed state") -
                   precision_of(fwd, "prior state")));
    rep.value_oracle.push_back(alpha * riccati.value_quad[t]);
  }
  for (int t = 0; t < horizon - 1; ++t) {
    const MatrixXd msg =
        symmetrize(precision_of(bt.tau_smoothed[t], "smoothed stage") -
                   precision_of(bt.tau_prior[t], "prior stage"));
    rep.tau_message.push_back(msg);

    const MatrixXd f = lq.dynamics[t].ftau();
    const MatrixXd stage = alpha * lq.stage[t].quad;
    const MatrixXd& next_msg = rep.state_message[t + 1];
    rep.action_update.push_back(
        symmetrize(stage + f.transpose() * next_msg * f));
    const MatrixXd attenuated = symmetrize(
        safe_llt(sys.process_noise +
                     safe_llt(next_msg, "next-state message").solve(eye_x),
                 "attenuated next-state covariance")
            .solve(eye_x));
    rep.action_update_corrected.push_back(
        symmetrize(stage + f.transpose() * attenuated * f));
    rep.action_oracle.push_back(alpha * riccati.action_quad[t]);
    rep.action_residual = std::max(
        rep.action_residual,
        (msg - rep.action_update[t]).norm() /
            std::max(rep.action_oracle[t].norm(), 1e-300));

    // Gain in precision coordinates against the posterior regression. The
    // block-inverse identity ties the two for any joint, so this residual
    // probes numerical health rather than the inference itself.
    const MatrixXd post =
        precision_of(bt.tau_smoothed[t], "smoothed stage");
    rep.precision_gain.push_back(
        -safe_llt(MatrixXd(post.bottomRightCorner(du, du)),
                  "posterior control block")
             .solve(MatrixXd(post.bottomLeftCorner(du, dx))));
    const MatrixXd luu = msg.bottomRightCorner(du, du);
    const MatrixXd lux = msg.bottomLeftCorner(du, dx);
    rep.covariance_gain.push_back(bt.policy.gains[t]);
    rep.gain_oracle.push_back(riccati.policy.gains[t]);
    rep.gain_residual = std::max(
        rep.gain_residual,
        (rep.precision_gain[t] - rep.covariance_gain[t]).norm() /
            std::max(rep.gain_oracle[t].norm(), 1e-300));

    // Marginalized state message against the Schur complement.
    const MatrixXd lxx = msg.topLeftCorner(dx, dx);
    rep.state_schur.push_back(symmetrize(
        lxx -
        lux.transpose() * safe_llt(luu, "message control block").solve(lux)));
    rep.value_residual = std::max(
        rep.value_residual,
        (rep.state_message[t] - rep.state_schur[t]).norm() /
            std::max(rep.value_oracle[t].norm(), 1e-300));
  }
  return rep;
}

}  // namespace i2c
