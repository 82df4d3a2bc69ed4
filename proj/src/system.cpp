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

#include "i2c/system.hpp"

#include <cmath>
#include <random>

#include "i2c/inference.hpp"

namespace i2c {

AffineDynamics linearize(const SystemModel& sys, int t, const VectorXd& x,
                         const VectorXd& u) {
  const int dx = sys.state_dim, du = sys.input_dim;
  MatrixXd j;
  if (sys.jacobian) {
    j = sys.jacobian(t, x, u);
  } else {
    VectorXd tau(dx + du);
    tau << x, u;
    j = fd_jacobian(
        [&](const VectorXd& v) { return sys.step(t, v.head(dx), v.tail(du)); },
        tau);
  }
  AffineDynamics d;
  d.fx = j.leftCols(dx);
  d.fu = j.rightCols(du);
  d.f0 = sys.step(t, x, u) - d.fx * x - d.fu * u;
  return d;
}

SystemModel make_affine_system(const MatrixXd& a, const MatrixXd& b,
                               const VectorXd& c, const MatrixXd& sigma_eta,
                               const std::string& name) {
  SystemModel sys;
  sys.state_dim = static_cast<int>(a.rows());
  sys.input_dim = static_cast<int>(b.cols());
  sys.name = name;
  sys.process_noise = sigma_eta;
  sys.step = [a, b, c](int, const VectorXd& x, const VectorXd& u) -> VectorXd {
    return a * x + b * u + c;
  };
  sys.jacobian = [a, b](int, const VectorXd&, const VectorXd&) -> MatrixXd {
    MatrixXd j(a.rows(), a.cols() + b.cols());
    j << a, b;
    return j;
  };
  return sys;
}

Trajectory rollout(const SystemModel& sys, const VectorXd& x0,
                   const ControlLaw& law, int horizon,
                   const RolloutOptions& opts) {
  if (horizon < 1) throw std::invalid_argument("rollout: horizon < 1");
  if (x0.size() != sys.state_dim)
    throw std::invalid_argument("rollout: x0 dimension mismatch");

  MatrixXd noise_chol;
  if (!opts.deterministic && sys.process_noise.norm() > 0.0) {
    // LDLT tolerates the PSD (rank-deficient) noise models the environments
    // use for position coordinates.
    Eigen::LDLT<MatrixXd> ldlt(symmetrize(sys.process_noise));
    if (ldlt.info() != Eigen::Success)
      throw SingularCovariance("rollout: process noise");
    VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    noise_chol = ldlt.transpositionsP().transpose() *
                 MatrixXd(MatrixXd(ldlt.matrixL()) * d.asDiagonal());
  }

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  Trajectory traj;
  traj.states.reserve(horizon);
  traj.controls.reserve(horizon - 1);
  traj.states.push_back(x0);
  for (int t = 0; t + 1 < horizon; ++t) {
    VectorXd u = law(t, traj.states.back());
    if (!all_finite(u))
      throw NonFiniteState("control at t=" + std::to_string(t));
    VectorXd next = sys.step(t, traj.states.back(), u);
    if (noise_chol.size() > 0) {
      VectorXd z(sys.state_dim);
      for (int i = 0; i < sys.state_dim; ++i) z[i] = unit(rng);
      next += noise_chol * z;
    }
    if (!all_finite(next))
      throw NonFiniteState("state at t=" + std::to_string(t + 1));
    traj.controls.push_back(std::move(u));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

}  // namespace i2c
