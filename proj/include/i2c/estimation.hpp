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

// State estimation for partially observed systems and the receding-horizon
// control loop around it. The filter is a cubature Kalman filter built on
// the shared propagation backends; the planner behind the loop is
// exchangeable (input inference, iterative LQR, or the cross-entropy
// search), each warm-started once and then refined a configurable number of
// iterations per executed step.

#ifndef I2C_ESTIMATION_HPP
#define I2C_ESTIMATION_HPP

#include <cstdint>
#include <vector>

#include "i2c/baselines.hpp"
#include "i2c/common.hpp"
#include "i2c/solver.hpp"
#include "i2c/system.hpp"

namespace i2c {

// ---------------------------------------------------------------------------
// Cubature Kalman filtering.
// ---------------------------------------------------------------------------

/// Filtered state belief p(x_t | y_{1:t}) plus the statistics of the most
/// recent measurement update.
struct FilterState {
  Gaussian belief{VectorXd(), MatrixXd()};
  int t = 0;

  VectorXd innovation;      // y - E[g(x)]; empty before the first update
  MatrixXd innovation_cov;  // predicted measurement covariance
  /// Updates whose posterior covariance lost definiteness and had to be
  /// re-inflated; stays at zero on well-posed (in particular affine)
  /// problems.
  int jitter_events = 0;
};

/// Time update: pushes the belief through f_t(., u) and adds the process
/// noise; advances the time index.
FilterState ckf_predict(const SystemModel& sys, const FilterState& filter,
                        const VectorXd& u,
                        const Propagator& prop = Propagator::cubature());

/// Measurement update: propagates the belief through g, then conditions on
/// the observed y under the measurement noise. Records the innovation and
/// its covariance.
FilterState ckf_update(const SystemModel& sys, const FilterState& filter,
                       const VectorXd& y,
                       const Propagator& prop = Propagator::cubature());

// ---------------------------------------------------------------------------
// Receding-horizon control.
// ---------------------------------------------------------------------------

enum class PlannerKind { I2c, Ilqr, Cem };

/// Receding-horizon configuration. The planning problem always spans
/// `horizon` steps of the global cost, re-anchored at the current filtered
/// belief; `warm_start_iterations` are spent once before execution and
/// `step_iterations` on every executed step (0 replays the warm-started
/// plan). The input-inference planner freezes its temperature after the
/// warm start.
struct MpcConfig {
  int horizon = 20;              // planning horizon H >= 2
  int warm_start_iterations = 50;
  int step_iterations = 1;

  PlannerKind planner = PlannerKind::I2c;
  PolicyMode mode = PolicyMode::Feedback;
  Gaussian init{VectorXd(), MatrixXd()};  // initial state belief

  SolverOptions i2c;
  IlqrOptions ilqr;
  CemOptions cem;

  Propagator filter_propagator = Propagator::cubature();
  /// Disables process and measurement noise sampling in the closed loop
  /// (the filter still carries the configured covariances).
  bool deterministic = false;
};

/// Rolling plan. `offset` is the global stage index the plan head currently
/// corresponds to; costs are evaluated at global time, so time-indexed
/// tracking targets stay aligned while the horizon recedes.
struct MpcState {
  LinearPolicy policy;                  // affine plan, horizon-1 stages
  std::vector<VectorXd> plan_controls;  // open-loop control means
  std::vector<VectorXd> plan_states;    // planned state means, horizon long
  BeliefTrajectory beliefs;   // smoothed beliefs (input-inference planner)
  std::vector<VectorXd> cem_std;  // search spread (cross-entropy planner)
  double alpha = 0.0;         // frozen temperature (input-inference planner)
  int offset = 0;
  int failures = 0;           // fail-operational fallbacks taken
};

struct MpcStepResult {
  VectorXd control;
  /// True when a per-step refinement ran and succeeded; false when none was
  /// requested or the refinement failed and the previous plan's next control
  /// was executed instead.
  bool replanned = false;
};

/// Solves the first planning problem from the configured initial belief.
MpcState mpc_warm_start(const SystemModel& sys,
                        const QuadraticFeatureCost& cost,
                        const MpcConfig& config);

/// One receding-horizon step: re-anchors the planning problem at `belief`,
/// refines the plan for the configured iterations, executes the first
/// control under the configured mode (feedforward: the planned mean;
/// feedback: the stage law at the filtered mean; expert: the
/// certainty-weighted blend), and shifts the plan one stage, duplicating
/// the final stage as the new tail. Planner failures fall back to the
/// previous plan and are counted in `state.failures`.
MpcStepResult mpc_step(const SystemModel& sys,
                       const QuadraticFeatureCost& cost,
                       const MpcConfig& config, MpcState& state,
                       const Gaussian& belief);

/// Closed-loop record of a partially observed run. Belief and innovation
/// traces are aligned with the executed steps; `trajectory` holds the true
/// states and executed controls with costs filled in.
struct PartiallyObservedRun {
  Trajectory trajectory;
  std::vector<Gaussian> beliefs;        // posterior per time index, T long
  std::vector<VectorXd> measurements;   // one per executed step
  std::vector<VectorXd> innovations;
  int planner_failures = 0;
  int jitter_events = 0;
  bool aborted = false;  // true state left the finite domain; trace partial
  double total_cost = 0.0;
};

/// Interleaves filtering and receding-horizon planning for `total_steps`
/// executed controls: plan from the posterior, act on the true state,
/// predict, measure, update. The true initial state is sampled from the
/// configured belief (its mean when deterministic).
PartiallyObservedRun run_partially_observed(const SystemModel& sys,
                                            const QuadraticFeatureCost& cost,
                                            const MpcConfig& config,
                                            int total_steps,
                                            std::uint64_t seed);

}  // namespace i2c

#endif  // I2C_ESTIMATION_HPP
