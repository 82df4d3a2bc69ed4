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

#include "i2c/policy.hpp"

#include <memory>
#include <random>

#include "i2c/gaussian.hpp"

namespace i2c {

VectorXd LinearPolicy::control(int t, const VectorXd& x) const {
  if (gains.empty()) throw std::logic_error("LinearPolicy: empty policy");
  const int idx = std::min(std::max(t, 0), static_cast<int>(gains.size()) - 1);
  return gains[idx] * x + offsets[idx];
}

ControlLaw LinearPolicy::law() const {
  LinearPolicy self = *this;
  return [self](int t, const VectorXd& x) { return self.control(t, x); };
}

ControlLaw LinearPolicy::sampling_law(std::uint64_t seed) const {
  LinearPolicy self = *this;
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [self, rng](int t, const VectorXd& x) {
    VectorXd u = self.control(t, x);
    if (!self.covs.empty()) {
      const int idx =
          std::min(std::max(t, 0), static_cast<int>(self.covs.size()) - 1);
      const MatrixXd& s = self.covs[idx];
      if (s.norm() > 0.0) {
        Eigen::LDLT<MatrixXd> ldlt(symmetrize(s));
        if (ldlt.info() != Eigen::Success)
          throw SingularCovariance("LinearPolicy::sampling_law");
        VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
        std::normal_distribution<double> unit(0.0, 1.0);
        VectorXd z(u.size());
        for (int i = 0; i < u.size(); ++i) z[i] = unit(*rng);
        u += ldlt.transpositionsP().transpose() *
             MatrixXd(MatrixXd(ldlt.matrixL()) * d.asDiagonal()) * z;
      }
    }
    return u;
  };
}

LinearPolicy LinearPolicy::feedforward(const std::vector<VectorXd>& controls,
                                       int state_dim) {
  if (controls.empty())
    throw std::invalid_argument("LinearPolicy::feedforward: empty sequence");
  LinearPolicy p;
  const int du = static_cast<int>(controls.front().size());
  for (const auto& u : controls) {
    p.gains.push_back(MatrixXd::Zero(du, state_dim));
    p.offsets.push_back(u);
  }
  return p;
}

}  // namespace i2c
