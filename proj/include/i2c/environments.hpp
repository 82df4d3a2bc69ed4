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

#ifndef I2C_ENVIRONMENTS_HPP
#define I2C_ENVIRONMENTS_HPP

#include <map>
#include <string>
#include <vector>

#include "i2c/cost.hpp"
#include "i2c/system.hpp"

namespace i2c {

/// Task bundle: dynamics, stage cost, initial state belief, and the default
/// knobs solvers start from. All mechanical environments use semi-implicit
/// Euler, angles are kept unwrapped, gravity is 9.81, and input saturation
/// is a smooth tanh clamp inside the dynamics.
struct Environment {
  SystemModel sys;
  QuadraticFeatureCost cost;
  Gaussian init;
  MatrixXd input_prior_cov;
  int horizon = 0;
  std::string name;
};

/// Wraps an angle to [-pi, pi).
double wrap_angle(double a);

// ---------------------------------------------------------------------------
// Parameter sets (defaults are the versioned per-environment table).
// ---------------------------------------------------------------------------

struct PendulumParams {
  double mass = 1.0;
  double length = 0.5;
  double damping = 0.05;
  double dt = 0.05;
  double u_max = 2.5;  // < m g l: swing-up requires pumping
  double gravity = 9.81;
};

struct CartpoleParams {
  double cart_mass = 0.5;
  double pole_mass = 0.5;
  double length = 0.5;
  double cart_damping = 0.1;
  double pole_damping = 0.01;
  double dt = 0.05;
  double u_max = 10.0;
  double gravity = 9.81;
};

struct DoubleCartpoleParams {
  double cart_mass = 0.5;
  double mass1 = 0.5;
  double mass2 = 0.5;
  double length1 = 0.6;
  double length2 = 0.6;
  double cart_damping = 0.1;
  double joint_damping = 0.01;
  double dt = 0.02;
  double u_max = 20.0;
  double gravity = 9.81;
};

struct QuadcopterParams {
  double mass = 0.8;
  double inertia = 0.02;
  double arm = 0.17;
  double dt = 0.025;
  double gravity = 9.81;
  // Per-rotor thrust is hover/rotor + L tanh(u/L) with L = m g / 2, so each
  // rotor stays inside (0, m g).
};

/// Planar quadcopter reference: (time, x, y, theta) per row. The stock path
/// (data/quadcopter_path.csv) is a smooth translation with one full 360-degree
/// flip segment in the middle.
struct PathPoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

/// Built-in generator behind the CSV fixture.
std::vector<PathPoint> default_quadcopter_path();
std::vector<PathPoint> load_path_csv(const std::string& file);

// ---------------------------------------------------------------------------
// Factories.
// ---------------------------------------------------------------------------

/// Raw dynamics (no cost attached).
SystemModel pendulum_dynamics(const PendulumParams& p = {});
SystemModel cartpole_dynamics(const CartpoleParams& p = {});
SystemModel double_cartpole_dynamics(const DoubleCartpoleParams& p = {});
SystemModel quadcopter_dynamics(const QuadcopterParams& p = {});

/// Swing-up / tracking tasks with the default cost shaping.
Environment make_pendulum(const PendulumParams& p = {});
Environment make_cartpole(const CartpoleParams& p = {});
Environment make_double_cartpole(const DoubleCartpoleParams& p = {});
Environment make_quadcopter(const std::vector<PathPoint>& path,
                            const QuadcopterParams& p = {});

/// Masks the velocity channels and the right-rotor position with variance 1e6.
void set_quadcopter_high_noise(Environment& env);

/// Unstable 2-d linear system (eigenvalues above one, single input) with
/// Sigma_eta = diag(0.1, 0.1); used by the covariance-control studies.
Environment make_linear2d();

/// Double integrator with the exact discretization x' = x + dt v + dt^2/2 u,
/// v' = v + dt u; the LQ workhorse for oracles and duality checks.
Environment make_double_integrator(double dt = 0.1,
                                   double noise = 1e-9);

/// Name-based registry for the CLI. Recognized names: pendulum, cartpole,
/// double_cartpole, quadcopter, linear2d, double_integrator. String overrides
/// are applied to the parameter table; unknown keys raise ConfigError.
Environment make_environment(const std::string& name,
                             const std::map<std::string, std::string>& overrides = {});

}  // namespace i2c

#endif  // I2C_ENVIRONMENTS_HPP
