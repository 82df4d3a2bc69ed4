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

#ifndef I2C_COST_HPP
#define I2C_COST_HPP

#include <functional>

#include "i2c/inference.hpp"
#include "i2c/system.hpp"

namespace i2c {

/// Stage cost C_t(x, u) = 1/2 (z*_t - h_t(x, u))^T Theta_t (z*_t - h_t(x, u))
/// plus an optional terminal term over the state alone. The same triple
/// doubles as the pseudo-measurement model z_t = h_t + xi with
/// xi ~ N(0, (alpha Theta_t)^-1), so cost weight and measurement confidence
/// are one object.
struct QuadraticFeatureCost {
  int dx = 0;  // state dimension of the (x, u) domain
  int du = 0;  // control dimension
  int dz = 0;
  int dz_term = 0;

  std::function<VectorXd(int t, const VectorXd& x, const VectorXd& u)> features;
  std::function<VectorXd(int t)> target;
  std::function<MatrixXd(int t)> weight;  // Theta_t, SPD

  /// Optional analytic Jacobian of h_t in (x, u); finite differences when null.
  std::function<MatrixXd(int t, const VectorXd& x, const VectorXd& u)>
      features_jacobian;

  std::function<VectorXd(const VectorXd& x)> terminal_features;  // null: none
  VectorXd terminal_target;
  MatrixXd terminal_weight;
  std::function<MatrixXd(const VectorXd& x)> terminal_features_jacobian;

  bool has_terminal() const { return static_cast<bool>(terminal_features); }

  double step_cost(int t, const VectorXd& x, const VectorXd& u) const;
  double terminal_cost(const VectorXd& x) const;

  /// Sum of running costs plus the terminal term; also fills
  /// traj.step_costs / traj.total_cost.
  double trajectory_cost(Trajectory& traj) const;

  /// Pseudo-measurement noise (alpha Theta_t)^-1 for the given stage
  /// (t = -1 selects the terminal stage).
  MatrixXd observation_noise(int t, double alpha) const;
};

/// Throws DegenerateCost unless every Theta_t for t in [0, horizon-1) and the
/// terminal weight are symmetric positive definite.
void validate_cost(const QuadraticFeatureCost& cost, int horizon);

/// Classic LQ tracking cost: h = (x, u), Theta = blkdiag(Q, R), plus
/// terminal h = x with weight QT. Exact affine features.
QuadraticFeatureCost quadratic_cost(const MatrixXd& q, const MatrixXd& r,
                                    const VectorXd& x_ref,
                                    const VectorXd& u_ref, const MatrixXd& qt,
                                    const VectorXd& x_ref_term);

/// Pure control-effort cost: h = u with weight R and no terminal term; the
/// running-cost shape the covariance-steering solver requires. u_ref
/// defaults to zero when empty.
QuadraticFeatureCost effort_cost(int dx, const MatrixXd& r,
                                 const VectorXd& u_ref = VectorXd());

/// Moments of the cost residual dz = z* - h(tau) under a Gaussian belief over
/// tau = (x, u), via the chosen backend. Stage t = -1 selects the terminal
/// feature over the state belief.
struct ResidualMoments {
  VectorXd mean;
  MatrixXd cov;
};
ResidualMoments residual_moments(const QuadraticFeatureCost& cost, int t,
                                 const Gaussian& belief,
                                 const Propagator& prop);

/// E[C_t] under the belief: 1/2 (tr(Theta Sigma_dz) + mu_dz^T Theta mu_dz).
double expected_cost(const QuadraticFeatureCost& cost, int t,
                     const Gaussian& belief, const Propagator& prop);

/// Gauss-Newton expansion of a stage cost around (x, u) in absolute
/// coordinates: C(tau) ~= 1/2 tau^T Q tau + q^T tau + q0.
struct QuadraticCoeffs {
  MatrixXd quad;
  VectorXd lin;
  double constant = 0.0;
};
QuadraticCoeffs quadratize(const QuadraticFeatureCost& cost, int t,
                           const VectorXd& x, const VectorXd& u);
QuadraticCoeffs quadratize_terminal(const QuadraticFeatureCost& cost,
                                    const VectorXd& x);

}  // namespace i2c

#endif  // I2C_COST_HPP
