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

#ifndef I2C_SYSTEM_HPP
#define I2C_SYSTEM_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "i2c/gaussian.hpp"

namespace i2c {

/// Discrete-time stochastic system x' = f_t(x, u) + eta, eta ~ N(0, Sigma_eta),
/// with an optional measurement model y = g(x) + zeta, zeta ~ N(0, Sigma_zeta).
/// Input saturation, when an environment has it, lives inside f_t (smooth
/// tanh clamp), so planners see a differentiable map.
struct SystemModel {
  int state_dim = 0;
  int input_dim = 0;
  std::string name;

  /// Mean next state f_t(x, u).
  std::function<VectorXd(int t, const VectorXd& x, const VectorXd& u)> step;

  /// Process noise covariance (PSD; constant across t for all built-ins).
  MatrixXd process_noise;

  /// Optional analytic Jacobian of f_t with respect to (x, u); columns are
  /// ordered state first. Null means finite differences.
  std::function<MatrixXd(int t, const VectorXd& x, const VectorXd& u)>
      jacobian;

  /// Optional measurement model.
  int meas_dim = 0;
  std::function<VectorXd(const VectorXd& x)> measure;
  MatrixXd meas_noise;

  bool has_measurement() const { return meas_dim > 0; }
};

/// F_x, F_u, and the offset of the affine expansion
/// f(x, u) ~= F_x x + F_u u + f0 around (x, u).
struct AffineDynamics {
  MatrixXd fx;
  MatrixXd fu;
  VectorXd f0;

  MatrixXd ftau() const {
    MatrixXd f(fx.rows(), fx.cols() + fu.cols());
    f << fx, fu;
    return f;
  }
};

/// Expansion via the analytic Jacobian when present, else central
/// finite differences (step 1e-5 * max(1, |coord|)).
AffineDynamics linearize(const SystemModel& sys, int t, const VectorXd& x,
                         const VectorXd& u);

/// Exact affine system helper: f = A x + B u + c with noise Sigma_eta.
SystemModel make_affine_system(const MatrixXd& a, const MatrixXd& b,
                               const VectorXd& c, const MatrixXd& sigma_eta,
                               const std::string& name = "affine");

/// State/control record of one simulation; per-step costs are filled by
/// rollout when a cost is attached (running costs first, terminal last).
struct Trajectory {
  std::vector<VectorXd> states;    // length T
  std::vector<VectorXd> controls;  // length T-1
  std::vector<double> step_costs;  // length T when cost recorded, else empty
  double total_cost = 0.0;

  int horizon() const { return static_cast<int>(states.size()); }
};

/// Time-varying state-feedback controller u = pi_t(x).
using ControlLaw = std::function<VectorXd(int t, const VectorXd& x)>;

struct RolloutOptions {
  std::uint64_t seed = 0;
  bool deterministic = false;  // suppress process noise
};

/// Simulates the closed-loop system for `horizon` states starting at x0.
/// Noise draws are seeded and independent of the control law.
/// Throws NonFiniteState when the simulation leaves the finite domain.
Trajectory rollout(const SystemModel& sys, const VectorXd& x0,
                   const ControlLaw& law, int horizon,
                   const RolloutOptions& opts = {});

}  // namespace i2c

#endif  // I2C_SYSTEM_HPP
