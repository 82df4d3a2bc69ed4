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

#ifndef I2C_SOLVER_HPP
#define I2C_SOLVER_HPP

#include <string>
#include <vector>

#include "i2c/cost.hpp"
#include "i2c/gaussian.hpp"
#include "i2c/inference.hpp"
#include "i2c/policy.hpp"
#include "i2c/system.hpp"

namespace i2c {

// Input inference for control: the trajectory optimum is recovered as the
// posterior of a Gaussian smoothing problem in which every stage cost acts
// as a pseudo-observation z* = h(x, u) + xi with xi ~ N(0, (alpha Theta)^-1).
// The inverse temperature alpha is estimated by expectation maximization, and
// nonlinear stages are handled by the moment propagators from inference.hpp.

/// All per-stage beliefs of one smoothing sweep over a horizon of T states
/// and T-1 controls. tau denotes the stacked stage vector (x_t, u_t).
struct BeliefTrajectory {
  int dx = 0;
  int du = 0;

  std::vector<Gaussian> state_prior;  // T, forward-predicted, before costs
  std::vector<Gaussian> tau_prior;    // T-1, after the control step
  std::vector<Gaussian> tau_filtered; // T-1, after the cost innovation
  std::vector<JointGaussian> prediction;  // T-1, (tau_t, x_{t+1})
  Gaussian terminal_filtered;         // x_{T-1} after the terminal innovation

  std::vector<Gaussian> state_smoothed;  // T
  std::vector<Gaussian> tau_smoothed;    // T-1

  LinearPolicy policy;        // conditionals u | x of the smoothed joints
  int policy_fallbacks = 0;   // stages whose state marginal was degenerate

  int horizon() const { return static_cast<int>(state_prior.size()); }
  std::vector<VectorXd> mean_states() const;
  std::vector<VectorXd> mean_controls() const;
};

/// Joint belief over (x, u) induced by a stochastic affine stage policy
/// u | x ~ N(gain x + offset, policy_cov) under the state marginal `state`.
Gaussian control_step(const Gaussian& state, const MatrixXd& gain,
                      const VectorXd& offset, const MatrixXd& policy_cov);

/// Conditions the stage belief on the pseudo-observation z*_t of the cost
/// features at temperature alpha. Stage t = -1 applies the terminal feature
/// to a state-only belief.
Gaussian cost_innovation(const QuadraticFeatureCost& cost, int t,
                         const Gaussian& belief, double alpha,
                         const Propagator& prop);

/// Pushes the stage belief through the dynamics; returns the joint over
/// (tau_t, x_{t+1}) including process noise.
JointGaussian dynamics_prediction(const SystemModel& sys, int t,
                                  const Gaussian& tau, const Propagator& prop);

/// Rauch-Tung-Striebel pass: fills state_smoothed / tau_smoothed from the
/// filtered beliefs, then extracts the stage policy. The smoothed terminal
/// state is terminal_filtered.
void backward_smooth(BeliefTrajectory& bt);

/// Conditional u | x of each smoothed stage belief. Stages whose state
/// marginal cannot be inverted (even after one jitter retry) degrade to the
/// feedforward conditional (zero gain, mean control); `fallbacks` counts
/// them when non-null.
LinearPolicy extract_policy(const std::vector<Gaussian>& tau_smoothed, int dx,
                            int* fallbacks = nullptr);

/// One full forward-backward sweep at fixed temperature under the given
/// control prior (the previous iteration's policy). `prior_policy` must
/// carry horizon-1 stages; covs are the per-stage control prior covariance.
/// When update_costs is false the sweep skips every innovation and the
/// smoothed beliefs coincide with the forward prior (used for calibration).
BeliefTrajectory e_step(const SystemModel& sys,
                        const QuadraticFeatureCost& cost, const Gaussian& init,
                        const LinearPolicy& prior_policy, int horizon,
                        double alpha, const Propagator& prop,
                        bool terminal_innovation = true,
                        bool update_costs = true);

/// Closed-form temperature update from the smoothed beliefs:
///   alpha_raw = (total feature dofs) / sum_t tr{Theta_t E[dz_t dz_t^T]},
/// with the expectation re-propagated under the smoothed stage beliefs.
/// The accepted value is clamped to [alpha/gamma, alpha*gamma]. An
/// underflowing denominator marks the problem solved exactly and leaves
/// alpha unchanged.
struct MStepResult {
  double alpha = 0.0;      // clamped update
  double alpha_raw = 0.0;  // unclamped ratio
  bool underflow = false;
};
MStepResult m_step(const QuadraticFeatureCost& cost,
                   const BeliefTrajectory& bt, double alpha, double gamma,
                   const Propagator& prop, bool terminal_innovation = true);

/// Expected total cost under the smoothed stage beliefs.
double expected_trajectory_cost(const QuadraticFeatureCost& cost,
                                const BeliefTrajectory& bt,
                                const Propagator& prop);

struct SolverOptions {
  Propagator propagator = Propagator::cubature();

  /// Control prior covariance of the first sweep (required, SPD).
  MatrixXd input_prior_cov;
  /// Control prior mean of the first sweep; zero when empty.
  VectorXd input_prior_mean;

  int max_iterations = 100;
  /// Relative expected-cost change below which an iteration counts as
  /// settled; `window` consecutive settled iterations stop the solve.
  double tolerance = 1e-6;
  int window = 5;
  /// Trust region of the temperature update per iteration.
  double gamma = 2.0;
  /// Initial temperature; 0 calibrates it from a cost-free prior sweep so
  /// that the first innovation is a unit-information update.
  double alpha_init = 0.0;
  bool terminal_innovation = true;
};

struct SolveResult {
  BeliefTrajectory beliefs;  // final sweep
  LinearPolicy policy;       // time-varying affine feedback
  std::vector<VectorXd> mean_states;
  std::vector<VectorXd> mean_controls;

  std::vector<double> alpha_trace;  // accepted temperature per iteration
  std::vector<double> cost_trace;   // expected cost per iteration
  std::vector<double> iter_seconds;
  double alpha = 0.0;
  int iterations = 0;
  bool converged = false;

  /// Open-loop replay of the posterior mean controls.
  LinearPolicy feedforward() const;
};

/// Expectation-maximized input inference over the given horizon.
SolveResult solve(const SystemModel& sys, const QuadraticFeatureCost& cost,
                  const Gaussian& init, int horizon,
                  const SolverOptions& opts);

/// Certainty-weighted feedback: the correction K (x - mu_x) is scaled by the
/// plan-consistency weight exp(-d/2), d the squared Mahalanobis distance of
/// x under the planned state marginal, so the law degrades to feedforward
/// far from the plan. Captures copies of the plan; safe to outlive `result`.
ControlLaw expert_law(const SolveResult& result);

/// Execution-mode selector shared by the CLI and the closed-loop driver.
enum class PolicyMode { Feedforward, Feedback, Expert };
ControlLaw select_law(const SolveResult& result, PolicyMode mode);

// ---------------------------------------------------------------------------
// Covariance control.
// ---------------------------------------------------------------------------

struct CovarianceControlOptions {
  Propagator propagator = Propagator::cubature();
  MatrixXd input_prior_cov;
  int max_iterations = 60;
  /// Temperature of the running (minimum-energy) innovations, held fixed
  /// for the whole anneal; 0 calibrates it from a cost-free prior sweep.
  double alpha_init = 0.0;
  /// Fraction of the iterations over which the terminal seed anneals from
  /// the forward-blended density to the pure target.
  double anneal_fraction = 0.8;
};

struct CovarianceControlResult {
  BeliefTrajectory beliefs;
  LinearPolicy policy;
  /// KL(goal || closed loop) of each iteration's extracted policy, where
  /// the closed-loop terminal comes from replaying the policy without any
  /// cost innovation.
  std::vector<double> kl_trace;
  double alpha = 0.0;
  int iterations = 0;

  double final_kl() const { return kl_trace.empty() ? 0.0 : kl_trace.back(); }
};

/// Drives the terminal state distribution to `target` by seeding the
/// backward sweep with the target density instead of a terminal cost
/// innovation: the seed blends the target with the forward prediction,
/// p(x_T) ~ target * forward^beta in natural parameters, with beta annealed
/// linearly 1 -> 0 over the first anneal_fraction of iterations and held at
/// 0 afterwards. The running cost must only involve the controls; the
/// terminal feature of `cost`, if any, is ignored.
CovarianceControlResult covariance_control_solve(
    const SystemModel& sys, const QuadraticFeatureCost& cost,
    const Gaussian& init, const Gaussian& target, int horizon,
    const CovarianceControlOptions& opts);

// ---------------------------------------------------------------------------
// Optimality diagnostics.
// ---------------------------------------------------------------------------

/// Compares one smoothing sweep on an LQ problem against its Riccati
/// solution. The cost-to-go evidence carried backward into each belief is
/// the precision a stage gains from smoothing: L_tau = prec(posterior tau) -
/// prec(prior tau), and likewise L_x per state. On LQ problems these
/// messages replicate the Riccati recursion: L_tau matches the state-action
/// value expansion scaled by alpha, its Schur complement matches the value
/// expansion, and the posterior conditional u | x carries the optimal gain.
/// Three residuals summarize the sweep, each normalized by the Riccati
/// quantity:
///   action: || L_tau - (alpha C + F^T L_{x'} F) ||  / || alpha Q ||
///   gain:   || -P_uu^-1 P_ux - S_ux S_x^-1 ||       / || K ||
///   value:  || L_x - (L_xx - L_xu L_uu^-1 L_ux) ||  / || alpha V ||
/// with S the posterior covariance blocks and P the posterior precision;
/// the gain row is the block-inverse identity, exact (up to conditioning)
/// at any prior or noise scale. The action relation is exact
/// only for vanishing process noise; action_update_corrected carries the
/// finite-noise form alpha C + F^T (Sigma_eta + L_{x'}^-1)^-1 F, which
/// holds at any noise level.
struct DualityReport {
  double alpha = 0.0;

  std::vector<MatrixXd> tau_message;        // T-1, smoothing gain on (x, u)
  std::vector<MatrixXd> action_update;      // alpha C + F^T L_{x_{t+1}} F
  std::vector<MatrixXd> action_update_corrected;  // with the Sigma_eta gap
  std::vector<MatrixXd> action_oracle;      // alpha * action-value quad

  std::vector<MatrixXd> precision_gain;     // -L_uu^-1 L_ux, posterior prec.
  std::vector<MatrixXd> covariance_gain;    // S_ux S_x^-1 (policy gain)
  std::vector<MatrixXd> gain_oracle;        // Riccati gain

  std::vector<MatrixXd> state_message;      // T, smoothing gain on x
  std::vector<MatrixXd> state_schur;        // L_xx - L_xu L_uu^-1 L_ux
  std::vector<MatrixXd> value_oracle;       // alpha * value quad

  double action_residual = 0.0;  // max over t, normalized as documented
  double gain_residual = 0.0;
  double value_residual = 0.0;
};

DualityReport duality_report(const SystemModel& sys,
                             const QuadraticFeatureCost& cost,
                             const Gaussian& init, int horizon, double alpha,
                             const MatrixXd& input_prior_cov,
                             const Propagator& prop);

}  // namespace i2c

#endif  // I2C_SOLVER_HPP
