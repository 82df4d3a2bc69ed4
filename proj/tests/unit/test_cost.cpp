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

#include <cmath>
#include <random>

#include "doctest.h"
#include "i2c/cost.hpp"
#include "i2c/environments.hpp"

using namespace i2c;

namespace {

MatrixXd random_spd(int n, unsigned seed, double ridge = 0.5) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = nd(rng);
  return a * a.transpose() + ridge * MatrixXd::Identity(n, n);
}

VectorXd random_vec(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

QuadraticFeatureCost example_lq() {
  MatrixXd q = random_spd(2, 1);
  MatrixXd r = random_spd(1, 2);
  MatrixXd qt = random_spd(2, 3);
  return quadratic_cost(q, r, random_vec(2, 4), random_vec(1, 5), qt,
                        random_vec(2, 6));
}

}  // namespace

TEST_SUITE("cost") {
  TEST_CASE("quadratic cost evaluates the half weighted square") {
    MatrixXd q(2, 2), r(1, 1), qt(2, 2);
    q << 2.0, 0.0, 0.0, 1.0;
    r << 0.5;
    qt << 4.0, 0.0, 0.0, 3.0;
    VectorXd xr(2), ur(1), xt(2);
    xr << 1.0, -1.0;
    ur << 0.5;
    xt << 0.0, 0.0;
    QuadraticFeatureCost cost = quadratic_cost(q, r, xr, ur, qt, xt);

    VectorXd x(2), u(1);
    x << 2.0, 0.0;  // dx = (1, 1)
    u << 1.5;       // du = 0.5*... du = 1.0
    // 1/2 [2*1 + 1*1] + 1/2 [0.5 * 1] = 1.5 + 0.25
    CHECK(cost.step_cost(0, x, u) == doctest::Approx(1.75).epsilon(1e-12));
    // terminal: 1/2 [4*4 + 3*0] = 8
    CHECK(cost.terminal_cost(x) == doctest::Approx(8.0).epsilon(1e-12));
  }

  TEST_CASE("trajectory cost is the sum of stage and terminal terms") {
    Environment env = make_double_integrator(0.1);
    ControlLaw law = [](int t, const VectorXd&) {
      return (VectorXd(1) << 0.2 * std::cos(0.3 * t)).finished();
    };
    Trajectory traj =
        rollout(env.sys, env.init.mean(), law, 20, {0, true});
    double total = env.cost.trajectory_cost(traj);
    REQUIRE(static_cast<int>(traj.step_costs.size()) == 20);
    double manual = 0.0;
    for (int t = 0; t < 19; ++t)
      manual += env.cost.step_cost(t, traj.states[t], traj.controls[t]);
    manual += env.cost.terminal_cost(traj.states[19]);
    CHECK(total == doctest::Approx(manual).epsilon(1e-12));
    CHECK(traj.total_cost == doctest::Approx(manual).epsilon(1e-12));
  }

  TEST_CASE("validation rejects weights that are not positive definite") {
    QuadraticFeatureCost cost = example_lq();
    CHECK_NOTHROW(validate_cost(cost, 10));
    MatrixXd bad = MatrixXd::Zero(3, 3);
    cost.weight = [bad](int) { return bad; };
    CHECK_THROWS_AS(validate_cost(cost, 10), DegenerateCost);

    QuadraticFeatureCost asym = example_lq();
    MatrixXd skew(3, 3);
    skew << 1.0, 0.5, 0.0, -0.5, 1.0, 0.0, 0.0, 0.0, 1.0;
    asym.weight = [skew](int) { return skew; };
    CHECK_THROWS_AS(validate_cost(asym, 10), DegenerateCost);
  }

  TEST_CASE("observation noise inverts the scaled weight") {
    QuadraticFeatureCost cost = example_lq();
    const double alpha = 2.5;
    MatrixXd v = cost.observation_noise(3, alpha);
    CHECK(relative_error(v, (alpha * cost.weight(3)).inverse()) < 1e-10);
    MatrixXd vt = cost.observation_noise(-1, alpha);
    CHECK(relative_error(vt, (alpha * cost.terminal_weight).inverse()) < 1e-10);
    CHECK_THROWS_AS(cost.observation_noise(0, 0.0), std::invalid_argument);
  }

  TEST_CASE("residual moments are exact for affine features") {
    QuadraticFeatureCost cost = example_lq();
    Gaussian belief(random_vec(3, 11), random_spd(3, 12));
    for (auto prop : {Propagator::linearize(), Propagator::cubature(),
                      Propagator::gauss_hermite(3)}) {
      ResidualMoments m = residual_moments(cost, 2, belief, prop);
      // h(tau) = tau, so dz = z* - tau has mean z* - mu and covariance Sigma.
      CHECK(relative_error(m.mean, VectorXd(cost.target(2) - belief.mean()),
                           1.0) < 1e-10);
      CHECK(relative_error(m.cov, belief.cov()) < 1e-10);
    }

    Gaussian state_belief(random_vec(2, 13), random_spd(2, 14));
    ResidualMoments mt = residual_moments(cost, -1, state_belief,
                                          Propagator::cubature());
    CHECK(relative_error(mt.mean,
                         VectorXd(cost.terminal_target - state_belief.mean()),
                         1.0) < 1e-10);
    CHECK(relative_error(mt.cov, state_belief.cov()) < 1e-10);
  }

  TEST_CASE("expected cost of a centered belief is half the weighted trace") {
    QuadraticFeatureCost cost = example_lq();
    VectorXd mu(3);
    mu << cost.target(0);  // belief centered exactly on the target
    MatrixXd sigma = random_spd(3, 21);
    Gaussian belief(mu, sigma);
    double ec = expected_cost(cost, 0, belief, Propagator::cubature());
    CHECK(ec ==
          doctest::Approx(0.5 * (cost.weight(0) * sigma).trace()).epsilon(1e-9));
  }

  TEST_CASE("expected cost matches monte carlo on a nonlinear stage") {
    Environment env = make_pendulum();
    VectorXd mu(3);
    mu << 2.6, -0.4, 0.8;
    MatrixXd sigma = 0.04 * MatrixXd::Identity(3, 3);
    Gaussian belief(mu, sigma);

    const int n = 200000;
    auto draws = belief.sample(n, 77);
    double acc = 0.0;
    for (const auto& tau : draws)
      acc += env.cost.step_cost(4, tau.head(2), tau.tail(1));
    acc /= n;

    double gh = expected_cost(env.cost, 4, belief, Propagator::gauss_hermite(5));
    CHECK(gh == doctest::Approx(acc).epsilon(0.02));
  }

  TEST_CASE("quadratization is exact for quadratic costs") {
    QuadraticFeatureCost cost = example_lq();
    VectorXd x = random_vec(2, 31), u = random_vec(1, 32);
    QuadraticCoeffs c = quadratize(cost, 1, x, u);
    for (unsigned s : {41u, 42u, 43u}) {
      VectorXd xp = random_vec(2, s), up = random_vec(1, s + 100);
      VectorXd tau(3);
      tau << xp, up;
      double quad_val = 0.5 * tau.dot(c.quad * tau) + c.lin.dot(tau) +
                        c.constant;
      CHECK(quad_val ==
            doctest::Approx(cost.step_cost(1, xp, up)).epsilon(1e-9));
    }
    QuadraticCoeffs ct = quadratize_terminal(cost, x);
    VectorXd xq = random_vec(2, 51);
    double tq = 0.5 * xq.dot(ct.quad * xq) + ct.lin.dot(xq) + ct.constant;
    CHECK(tq == doctest::Approx(cost.terminal_cost(xq)).epsilon(1e-9));
  }

  TEST_CASE("quadratization matches value and gradient on nonlinear features") {
    Environment env = make_pendulum();
    VectorXd x(2), u(1);
    x << 2.1, -0.6;
    u << 0.7;
    QuadraticCoeffs c = quadratize(env.cost, 3, x, u);
    VectorXd tau(3);
    tau << x, u;

    // Value agrees at the expansion point.
    double at_point = 0.5 * tau.dot(c.quad * tau) + c.lin.dot(tau) + c.constant;
    CHECK(at_point == doctest::Approx(env.cost.step_cost(3, x, u))
                          .epsilon(1e-10));

    // Gradient agrees with central differences of the true cost.
    VectorXd grad_quad = c.quad * tau + c.lin;
    for (int i = 0; i < 3; ++i) {
      VectorXd tp = tau, tm = tau;
      const double h = 1e-6;
      tp[i] += h;
      tm[i] -= h;
      double gp = env.cost.step_cost(3, tp.head(2), tp.tail(1));
      double gm = env.cost.step_cost(3, tm.head(2), tm.tail(1));
      CHECK(grad_quad[i] == doctest::Approx((gp - gm) / (2.0 * h))
                                .epsilon(1e-4));
    }
  }

  TEST_CASE("builtin environment costs validate") {
    for (const char* name : {"pendulum", "cartpole", "double_cartpole",
                             "quadcopter", "linear2d", "double_integrator"}) {
      Environment env = make_environment(name);
      CHECK_NOTHROW(validate_cost(env.cost, env.horizon));
    }
  }
}
