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

#include "i2c/cost.hpp"

namespace i2c {

namespace {

double half_quad(const VectorXd& r, const MatrixXd& theta) {
  return 0.5 * r.dot(theta * r);
}

bool spd(const MatrixXd& m) {
  if (m.rows() != m.cols()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + m.norm()))
    return false;
  Eigen::LLT<MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace

double QuadraticFeatureCost::step_cost(int t, const VectorXd& x,
                                       const VectorXd& u) const {
  VectorXd r = target(t) - features(t, x, u);
  return half_quad(r, weight(t));
}

double QuadraticFeatureCost::terminal_cost(const VectorXd& x) const {
  if (!has_terminal()) return 0.0;
  VectorXd r = terminal_target - terminal_features(x);
  return half_quad(r, terminal_weight);
}

double QuadraticFeatureCost::trajectory_cost(Trajectory& traj) const {
  const int horizon = traj.horizon();
  traj.step_costs.assign(horizon, 0.0);
  double total = 0.0;
  for (int t = 0; t + 1 < horizon; ++t) {
    traj.step_costs[t] = step_cost(t, traj.states[t], traj.controls[t]);
    total += traj.step_costs[t];
  }
  traj.step_costs[horizon - 1] = terminal_cost(traj.states[horizon - 1]);
  total += traj.step_costs[horizon - 1];
  traj.total_cost = total;
  return total;
}

MatrixXd QuadraticFeatureCost::observation_noise(int t, double alpha) const {
  if (alpha <= 0.0)
    throw std::invalid_argument("observation_noise: alpha must be positive");
  MatrixXd theta = (t < 0) ? terminal_weight : weight(t);
  return symmetrize(solve_spd(alpha * theta,
                              MatrixXd::Identity(theta.rows(), theta.cols()),
                              "observation_noise"));
}

void validate_cost(const QuadraticFeatureCost& cost, int horizon) {
  for (int t = 0; t + 1 < horizon; ++t) {
    if (!spd(cost.weight(t)))
      throw DegenerateCost("Theta at t=" + std::to_string(t));
  }
  if (cost.has_terminal() && !spd(cost.terminal_weight))
    throw DegenerateCost("terminal Theta");
}

QuadraticFeatureCost quadratic_cost(const MatrixXd& q, const MatrixXd& r,
                                    const VectorXd& x_ref,
                                    const VectorXd& u_ref, const MatrixXd& qt,
                                    const VectorXd& x_ref_term) {
  const int dx = static_cast<int>(q.rows());
  const int du = static_cast<int>(r.rows());
  QuadraticFeatureCost cost;
  cost.dx = dx;
  cost.du = du;
  cost.dz = dx + du;
  cost.dz_term = dx;
  cost.features = [dx, du](int, const VectorXd& x, const VectorXd& u) {
    VectorXd z(dx + du);
    z << x, u;
    return z;
  };
  VectorXd zref(dx + du);
  zref << x_ref, u_ref;
  cost.target = [zref](int) { return zref; };
  MatrixXd theta = MatrixXd::Zero(dx + du, dx + du);
  theta.topLeftCorner(dx, dx) = q;
  theta.bottomRightCorner(du, du) = r;
  cost.weight = [theta](int) { return theta; };
  cost.features_jacobian = [dx, du](int, const VectorXd&, const VectorXd&) {
    return MatrixXd::Identity(dx + du, dx + du);
  };
  cost.terminal_features = [](const VectorXd& x) { return x; };
  cost.terminal_target = x_ref_term;
  cost.terminal_weight = qt;
  cost.terminal_features_jacobian = [dx](const VectorXd&) {
    return MatrixXd::Identity(dx, dx);
  };
  return cost;
}

QuadraticFeatureCost effort_cost(int dx, const MatrixXd& r,
                                 const VectorXd& u_ref) {
  const int du = static_cast<int>(r.rows());
  QuadraticFeatureCost cost;
  cost.dx = dx;
  cost.du = du;
  cost.dz = du;
  cost.dz_term = 0;
  cost.features = [](int, const VectorXd&, const VectorXd& u) { return u; };
  const VectorXd zref = u_ref.size() ? u_ref : VectorXd::Zero(du);
  if (zref.size() != du)
    throw ConfigError("effort_cost: u_ref does not match the weight");
  cost.target = [zref](int) { return zref; };
  cost.weight = [r](int) { return r; };
  cost.features_jacobian = [dx, du](int, const VectorXd&, const VectorXd&) {
    MatrixXd j = MatrixXd::Zero(du, dx + du);
    j.rightCols(du) = MatrixXd::Identity(du, du);
    return j;
  };
  return cost;
}

ResidualMoments residual_moments(const QuadraticFeatureCost& cost, int t,
                                 const Gaussian& belief,
                                 const Propagator& prop) {
  VectorFn h;
  JacobianFn jac;
  VectorXd z_star;
  int dz;
  if (t < 0) {
    h = [&cost](const VectorXd& x) { return cost.terminal_features(x); };
    if (cost.terminal_features_jacobian)
      jac = [&cost](const VectorXd& x) {
        return cost.terminal_features_jacobian(x);
      };
    z_star = cost.terminal_target;
    dz = cost.dz_term;
  } else {
    const int dx = cost.dx, du = cost.du;
    if (belief.dim() != dx + du)
      throw std::invalid_argument("residual_moments: belief is not over (x, u)");
    h = [&cost, t, dx, du](const VectorXd& tau) {
      return cost.features(t, tau.head(dx), tau.tail(du));
    };
    if (cost.features_jacobian)
      jac = [&cost, t, dx, du](const VectorXd& tau) {
        return cost.features_jacobian(t, tau.head(dx), tau.tail(du));
      };
    z_star = cost.target(t);
    dz = cost.dz;
  }
  JointGaussian j = propagate(prop, h, belief, MatrixXd::Zero(dz, dz), jac);
  ResidualMoments m;
  m.mean = z_star - j.mean_b();
  m.cov = j.cov_bb();
  return m;
}

double expected_cost(const QuadraticFeatureCost& cost, int t,
                     const Gaussian& belief, const Propagator& prop) {
  if (t < 0 && !cost.has_terminal()) return 0.0;
  ResidualMoments m = residual_moments(cost, t, belief, prop);
  MatrixXd theta = (t < 0) ? cost.terminal_weight : cost.weight(t);
  return 0.5 * ((theta * m.cov).trace() + m.mean.dot(theta * m.mean));
}

namespace {

QuadraticCoeffs quadratize_impl(const VectorXd& residual, const MatrixXd& jac_h,
                                const MatrixXd& theta, const VectorXd& point) {
  // C(v) = 1/2 (rho - H v)^T Theta (rho - H v) with rho = r + H v0.
  VectorXd rho = residual + jac_h * point;
  QuadraticCoeffs c;
  c.quad = symmetrize(jac_h.transpose() * theta * jac_h);
  c.lin = -jac_h.transpose() * theta * rho;
  c.constant = half_quad(rho, theta);
  return c;
}

}  // namespace

QuadraticCoeffs quadratize(const QuadraticFeatureCost& cost, int t,
                           const VectorXd& x, const VectorXd& u) {
  const int dx = cost.dx, du = cost.du;
  MatrixXd h;
  if (cost.features_jacobian) {
    h = cost.features_jacobian(t, x, u);
  } else {
    VectorXd tau(dx + du);
    tau << x, u;
    h = fd_jacobian(
        [&](const VectorXd& v) {
          return cost.features(t, v.head(dx), v.tail(du));
        },
        tau);
  }
  VectorXd r = cost.target(t) - cost.features(t, x, u);
  VectorXd tau(dx + du);
  tau << x, u;
  return quadratize_impl(r, h, cost.weight(t), tau);
}

QuadraticCoeffs quadratize_terminal(const QuadraticFeatureCost& cost,
                                    const VectorXd& x) {
  if (!cost.has_terminal()) {
    QuadraticCoeffs c;
    c.quad = MatrixXd::Zero(x.size(), x.size());
    c.lin = VectorXd::Zero(x.size());
    return c;
  }
  MatrixXd h = cost.terminal_features_jacobian
                   ? cost.terminal_features_jacobian(x)
                   : fd_jacobian(
                         [&](const VectorXd& v) {
                           return cost.terminal_features(v);
                         },
                         x);
  VectorXd r = cost.terminal_target - cost.terminal_features(x);
  return quadratize_impl(r, h, cost.terminal_weight, x);
}

}  // namespace i2c
