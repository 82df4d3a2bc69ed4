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

#ifndef I2C_POLICY_HPP
#define I2C_POLICY_HPP

#include <cstdint>
#include <vector>

#include "i2c/system.hpp"

namespace i2c {

/// Time-varying affine-Gaussian controller u_t ~ N(K_t x + k_t, Sigma_t).
/// `covs` may be left empty for deterministic policies; when present it is
/// only used by sampling_law and by solvers that consume policy entropy.
struct LinearPolicy {
  std::vector<MatrixXd> gains;    // K_t, one per transition
  std::vector<VectorXd> offsets;  // k_t
  std::vector<MatrixXd> covs;     // Sigma^pi_t (optional)

  int horizon() const { return static_cast<int>(gains.size()) + 1; }

  /// Mean control K_t x + k_t. Timesteps beyond the plan reuse the last
  /// stage, which is the shift rule the MPC loop relies on.
  VectorXd control(int t, const VectorXd& x) const;

  /// Deterministic law evaluating `control`.
  ControlLaw law() const;

  /// Adds seeded N(0, Sigma^pi_t) exploration noise on top of the mean.
  ControlLaw sampling_law(std::uint64_t seed) const;

  /// Constant open-loop sequence helper (K = 0).
  static LinearPolicy feedforward(const std::vector<VectorXd>& controls,
                                  int state_dim);
};

}  // namespace i2c

#endif  // I2C_POLICY_HPP
