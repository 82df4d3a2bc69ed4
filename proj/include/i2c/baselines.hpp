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

#ifndef I2C_BASELINES_HPP
#define I2C_BASELINES_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "i2c/cost.hpp"
#include "i2c/policy.hpp"

namespace i2c {

// ---------------------------------------------------------------------------
// Finite-horizon LQ problem data and Riccati recursions.
// ---------------------------------------------------------------------------

/// Stagewise linear-quadratic data in absolute (x, u) coordinates.
/// stage[t] holds C(tau) = 1/2 tau^T Q tau + q^T tau + q0 over tau = (x, u);
/// terminal is over x alone. process_noise may be empty (treated as zero):
/// gains do not depend on it, only expected-cost constants do.
struct LqProblem {
  std::vector<AffineDynamics> dynamics;  // length T-1
  std::vector<QuadraticCoeffs> stage;    // length T-1
  QuadraticCoeffs terminal;
  std::vector<MatrixXd> process_noise;  // length T-1 or empty
  int dx = 0;
  int du = 0;

  int horizon() const { return static_cast<int>(dynamics.size()) + 1; }
};

/// Expands a nonlinear problem along a nominal trajectory (Gauss-Newton cost,
/// first-order dynamics). states has length T, controls T-1.
LqProblem quadratize_along(const SystemModel& sys,
                           const QuadraticFeatureCost& cost,
                           const std::vector<VectorXd>& states,
                           const std::vector<VectorXd>& controls);

/// Value functions V_t(x) = 1/2 x^T V x + v^T x + v0 (cost-to-go, including
/// the additive noise constants when process_noise is present) and the
/// state-action coefficients Q_t over tau retained for duality diagnostics.
struct RiccatiSolution {
  LinearPolicy policy;
  std::vector<MatrixXd> value_quad;   // V_t, length T
  std::vector<VectorXd> value_lin;    // v_t
  std::vector<double> value_const;    // v0_t
  std::vector<MatrixXd> action_quad;  // Q_t over tau, length T-1
  std::vector<VectorXd> action_lin;   // q_t
  std::vector<double> action_const;   // q0_t
};

/// Backward dynamic programming on the LQ problem. Throws IndefiniteQuu when
/// any Q_uu block fails its Cholesky factorization.
RiccatiSolution lqr_backward(const LqProblem& lq);

/// Expected total closed-loop cost from a Gaussian initial state, using the
/// time-zero value function: E[V_1(x)] for x ~ p(x1).
double expected_value(const RiccatiSolution& sol, const Gaussian& x1);

/// Exponential-utility dynamic programming. sigma > 0 is the optimistic
/// (risk-seeking) direction and is always feasible; sigma < 0 is risk-averse
/// and throws RiskInfeasible once (V^-1 + sigma Sigma_eta) loses positive
/// definiteness. sigma = 0 reduces to lqr_backward exactly; the recursion is
/// continuous at 0. Requires lq.process_noise (zero matrices are fine).
RiccatiSolution risk_sensitive_backward(const LqProblem& lq, double sigma);

// ---------------------------------------------------------------------------
// Iterative LQR with backtracking line search.
// ---------------------------------------------------------------------------

struct IlqrOptions {
  int max_iterations = 100;
  /// Relative cost-improvement threshold; set to 0 to always run
  /// max_iterations (used by the timing benchmarks).
  double tolerance = 1e-8;
  double reg_init = 1e-6;
  double reg_max = 1e10;
};

struct IlqrResult {
  std::vector<VectorXd> states;    // accepted nominal, length T
  std::vector<VectorXd> controls;  // length T-1
  LinearPolicy policy;             // affine law around the nominal
  std::vector<double> cost_trace;  // accepted costs; front() is the initial
  std::vector<double> iter_seconds;
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
  double cost() const { return cost_trace.back(); }
};

/// Gauss-Newton trajectory optimization: relinearize, backward pass with
/// Levenberg-style loading of Q_uu, forward pass with a backtracking line
/// search over {1, 1/2, ..., 2^-10} accepting only strict cost decrease.
/// The accepted-cost trace is non-increasing by construction.
IlqrResult ilqr_solve(const SystemModel& sys, const QuadraticFeatureCost& cost,
                      const VectorXd& x0, const std::vector<VectorXd>& u_init,
                      const IlqrOptions& opts = {});

// ---------------------------------------------------------------------------
// Cross-entropy method over open-loop action sequences.
// ---------------------------------------------------------------------------

struct CemOptions {
  int population = 50;
  int elites = 0;  // 0 -> max(2, population / 10)
  int max_iterations = 100;
  /// Stop once the elite-mean cost improves by less than this relative
  /// amount over 5 consecutive iterations; 0 disables early stopping.
  double tolerance = 1e-8;
  double var_floor = 1e-6;
  double init_std = 1.0;
  /// Optional warm start for the search mean (horizon-1 controls); empty
  /// starts from zero.
  std::vector<VectorXd> init_mean;
  std::uint64_t seed = 0;
};

struct CemResult {
  std::vector<VectorXd> controls;  // mean sequence, length T-1
  std::vector<VectorXd> std_devs;  // matching per-coordinate deviations
  std::vector<double> cost_trace;  // elite-mean cost per iteration
  std::vector<double> iter_seconds;
  int iterations = 0;
  double cost() const { return cost_trace.back(); }
};

/// Factorized-Gaussian cross-entropy search; candidates are scored by
/// deterministic rollouts of the mean dynamics. Deterministic given the seed.
CemResult cem_solve(const SystemModel& sys, const QuadraticFeatureCost& cost,
                    const VectorXd& x0, int horizon,
                    const CemOptions& opts = {});

// ---------------------------------------------------------------------------
// Static Gauss-Newton inference on y = f(x) + noise.
// ---------------------------------------------------------------------------

enum class InverseMode {
  /// Moment-matched conditioning under the running belief (the belief is
  /// carried forward as the next prior) with the temperature re-estimated
  /// each iteration by a single-stage M-step.
  Em,
  /// Fixed temperature and fixed prior: each iteration recomputes the
  /// posterior from the original prior under a surrogate model linearized at
  /// xhat, then smooths xhat <- theta xhat + (1 - theta) posterior_mean.
  /// theta = 0 is plain repeated relinearization.
  Iterated,
};

struct InverseOptions {
  InverseMode mode = InverseMode::Em;
  double alpha = 1.0;  // initial (Em) or fixed (Iterated) temperature
  double theta = 0.0;  // linearization smoothing for Iterated
  double gamma = 2.0;  // Em temperature ratio clamp
  int max_iterations = 50;
  double converged_residual = 1e-6;
  /// Em-mode moment backend. Linearize reproduces the damped Gauss-Newton
  /// mean update exactly; the quadrature rules statistically linearize under
  /// the whole belief and can therefore see past curvature barriers that a
  /// point Jacobian cannot.
  Propagator propagator = Propagator::linearize();
};

struct InverseIterate {
  int iteration = 0;
  double residual = 0.0;  // |y* - f(mean)|
  double alpha = 0.0;
  VectorXd mean;
};

struct InverseResult {
  std::vector<InverseIterate> trace;  // trace[0] is the prior state
  VectorXd mean;
  MatrixXd cov;
  /// "converged": final residual < converged_residual;
  /// "diverged": a non-finite iterate, or some post-prior residual exceeded
  ///             the initial one (the iteration made the fit worse);
  /// "stalled": everything else.
  std::string regime;
};

/// Nonlinear least squares as Bayesian inference with observation noise
/// N(0, alpha^-1 I): condition the belief over x on the pseudo-observation
/// y*. Under the Linearize backend the mean update is exactly
/// mean <- mean + (alpha^-1 Lambda + J^T J)^-1 J^T (y* - f(mean)).
/// `jacobian` may be null (finite differences).
InverseResult gauss_newton_inference(const VectorFn& f,
                                     const JacobianFn& jacobian,
                                     const VectorXd& y_star,
                                     const Gaussian& prior,
                                     const InverseOptions& opts = {});

/// The repository's 1-d reference problem for the inverse-inference demo:
/// f(x) = x^3 - 2x + 2 sin(3x), prior N(0, 4), and a target picked off the
/// trivial root so the solver regimes separate. em_propagator pins the
/// moment backend the Em runs of the demo are defined with.
struct ReferenceInverseProblem {
  VectorFn f;
  JacobianFn jacobian;
  VectorXd y_star;
  Gaussian prior;
  Propagator em_propagator;
};
ReferenceInverseProblem reference_inverse_problem();

}  // namespace i2c

#endif  // I2C_BASELINES_HPP
