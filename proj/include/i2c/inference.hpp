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

#ifndef I2C_INFERENCE_HPP
#define I2C_INFERENCE_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "i2c/gaussian.hpp"

namespace i2c {

/// Nonlinear map whose Gaussian image a propagator approximates.
using VectorFn = std::function<VectorXd(const VectorXd&)>;

/// Jacobian of a VectorFn at a point (rows = output dim, cols = input dim).
using JacobianFn = std::function<MatrixXd(const VectorXd&)>;

/// Moment-propagation backend selector.
///   Linearize: first-order expansion at the mean; Jacobian from an analytic
///     callback when supplied, otherwise central finite differences with
///     step 1e-5 * max(1, |mu_i|) per coordinate.
///   Cubature: third-degree spherical rule, exactly 2n points at
///     mu +/- sqrt(n) L e_i with equal weights 1/(2n).
///   GaussHermite: tensor grid of p^n points from the 1-D probabilists'
///     rule; degree 2..10 and p^n <= 2^20 enforced (UnsupportedDegree).
///   MonteCarlo: n seeded draws, sample moments; oracle use only.
struct Propagator {
  enum class Kind { Linearize, Cubature, GaussHermite, MonteCarlo };
  Kind kind = Kind::Cubature;
  int gh_degree = 4;
  int mc_samples = 1000;
  std::uint64_t mc_seed = 0;

  static Propagator linearize() { return {Kind::Linearize, 0, 0, 0}; }
  static Propagator cubature() { return {Kind::Cubature, 0, 0, 0}; }
  static Propagator gauss_hermite(int degree) {
    return {Kind::GaussHermite, degree, 0, 0};
  }
  static Propagator monte_carlo(int samples, std::uint64_t seed) {
    return {Kind::MonteCarlo, 0, samples, seed};
  }

  std::string name() const;
};

/// 1-D Gauss-Hermite rule for the standard normal weight (probabilists'
/// convention): integrates polynomials up to degree 2p-1 exactly.
/// degree 2 gives nodes +/-1 with weights 1/2.
struct GaussHermiteRule {
  VectorXd nodes;
  VectorXd weights;
};
GaussHermiteRule gh_nodes(int degree);

/// Pushes a Gaussian through f and returns the joint over (input, output).
/// `output_noise` (additive, may be zero) lands on the output block only.
/// `jacobian` is honored by the Linearize backend and ignored otherwise.
/// Input-block moments are re-accumulated from the same evaluation points so
/// the joint stays internally consistent (exact for the quadrature rules).
/// Throws NonFinitePropagation if any evaluation is non-finite.
JointGaussian propagate(const Propagator& prop, const VectorFn& f,
                        const Gaussian& input, const MatrixXd& output_noise,
                        const JacobianFn& jacobian = nullptr);

/// Finite-difference Jacobian used by the Linearize backend.
MatrixXd fd_jacobian(const VectorFn& f, const VectorXd& x);

}  // namespace i2c

#endif  // I2C_INFERENCE_HPP
