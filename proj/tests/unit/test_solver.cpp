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

#include "i2c/solver.hpp"

#include <cmath>

#include "doctest.h"
#include "i2c/common.hpp"
#include "i2c/environments.hpp"
#include "i2c/system.hpp"

namespace {

using namespace i2c;

// Affine test system shared by the conditioning oracles: mildly unstable,
// cross-coupled, with a nonzero drift so offsets are exercised everywhere.
struct AffineFixture {
  SystemModel sys;
  QuadraticFeatureCost cost;
  MatrixXd a, b, noise;
  VectorXd c;
  MatrixXd q, r, qt;
  VectorXd x_ref, u_ref, x_term;
};

AffineFixture make_affine_fixture(double noise_scale = 1.0) {
  AffineFixture f;
  f.a = MatrixXd(2, 2);
  f.a << 1.05, 0.3, -0.1, 0.92;
  f.b = MatrixXd(2, 1);
  f.b << 0.1, 0.8;
  f.c = VectorXd(2);
  f.c << 0.05, -0.02;
  f.noise = noise_scale * (MatrixXd(2, 2) << 0.02, 0.005, 0.005, 0.03)
                              .finished();
  f.sys = make_affine_system(f.a, f.b, f.c, f.noise);

  f.q = (MatrixXd(2, 2) << 2.0, 0.3, 0.3, 1.0).finished();
  f.r = MatrixXd::Constant(1, 1, 0.5);
  f.qt = (MatrixXd(2, 2) << 5.0, -0.5, -0.5, 3.0).finished();
  f.x_ref = (VectorXd(2) << 0.3, -0.2).finished();
  f.u_ref = VectorXd::Constant(1, 0.1);
  f.x_term = (VectorXd(2) << -0.4, 0.25).finished();
  f.cost = quadratic_cost(f.q, f.r, f.x_ref, f.u_ref, f.qt, f.x_term);
  return f;
}

// Running cost that only prices control effort; used by covariance control.
QuadraticFeatureCost make_effort_cost(int dx, int du) {
  QuadraticFeatureCost cost;
  cost.dx = dx;
  cost.du = du;
  cost.dz = du;
  cost.features = [](int, const VectorXd&, const VectorXd& u) { return u; };
  cost.features_jacobian = [dx, du](int, const VectorXd&, const VectorXd&) {
    MatrixXd h = MatrixXd::Zero(du, dx + du);
    h.rightCols(du).setIdentity();
    return h;
  };
  cost.target = [du](int) { return VectorXd::Zero(du); };
  cost.weight = [du](int) { return MatrixXd::Identity(du, du); };
  return cost;
}

Gaussian conjugate_posterior(const Gaussian& prior, const MatrixXd& h,
                             const MatrixXd& theta, const VectorXd& target,
                             double alpha) {
  const Gaussian::Canonical nat = prior.canonical();
  const MatrixXd lambda = nat.lambda + alpha * h.transpose() * theta * h;
  const VectorXd eta = nat.eta + alpha * h.transpose() * theta * target;
  return Gaussian::from_canonical(eta, lambda);
}

double max_abs_diff(const MatrixXd& a, const MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

TEST_SUITE("solver") {

TEST_CASE("control step assembles the joint policy prior") {
  const MatrixXd sigma = (MatrixXd(2, 2) << 0.5, 0.1, 0.1, 0.3).finished();
  const VectorXd mu = (VectorXd(2) << 1.0, -0.5).finished();
  const Gaussian state(mu, sigma);
  const MatrixXd gain = (MatrixXd(1, 2) << 0.2, -0.3).finished();
  const VectorXd offset = VectorXd::Constant(1, 0.4);
  const MatrixXd pol_cov = MatrixXd::Constant(1, 1, 0.6);

  const Gaussian tau = control_step(state, gain, offset, pol_cov);
  REQUIRE(tau.dim() == 3);

  // Block structure of the joint.
  CHECK(max_abs_diff(tau.cov().topLeftCorner(2, 2), sigma) < 1e-12);
  CHECK(max_abs_diff(tau.cov().topRightCorner(2, 1),
                     sigma * gain.transpose()) < 1e-12);
  CHECK(max_abs_diff(tau.cov().bottomRightCorner(1, 1),
                     gain * sigma * gain.transpose() + pol_cov) < 1e-12);
  CHECK((tau.mean().head(2) - mu).norm() < 1e-12);
  CHECK((tau.mean().tail(1) - (gain * mu + offset)).norm() < 1e-12);

  // Conditioning the joint on the state recovers the stochastic policy.
  const JointGaussian ux(tau.mean().tail(1), tau.mean().head(2),
                         tau.cov().bottomRightCorner(1, 1),
                         tau.cov().topLeftCorner(2, 2),
                         tau.cov().bottomLeftCorner(1, 2));
  for (double x0 : {-1.0, 0.0, 2.5}) {
    const VectorXd x = (VectorXd(2) << x0, 0.7 * x0 - 0.2).finished();
    const Gaussian cond = ux.condition_on_b(x);
    CHECK((cond.mean() - (gain * x + offset)).norm() < 1e-9);
    CHECK(max_abs_diff(cond.cov(), pol_cov) < 1e-9);
  }

  CHECK_THROWS_AS(control_step(state, MatrixXd::Zero(1, 3), offset, pol_cov),
                  ConfigError);
  CHECK_THROWS_AS(control_step(state, gain, VectorXd::Zero(2), pol_cov),
                  ConfigError);
}

TEST_CASE("cost innovation is conjugate conditioning on affine features") {
  const AffineFixture f = make_affine_fixture();
  const double alpha = 0.9;

  const VectorXd m = (VectorXd(3) << 0.8, -0.3, 0.5).finished();
  MatrixXd p(3, 3);
  p << 0.6, 0.1, -0.05, 0.1, 0.4, 0.08, -0.05, 0.08, 0.7;
  const Gaussian prior(m, p);

  MatrixXd theta = MatrixXd::Zero(3, 3);
  theta.topLeftCorner(2, 2) = f.q;
  theta.bottomRightCorner(1, 1) = f.r;
  VectorXd target(3);
  target << f.x_ref, f.u_ref;
  const Gaussian oracle = conjugate_posterior(prior, MatrixXd::Identity(3, 3),
                                              theta, target, alpha);

  for (const Propagator& prop :
       {Propagator::linearize(), Propagator::cubature()}) {
    const Gaussian post = cost_innovation(f.cost, 2, prior, alpha, prop);
    CHECK((post.mean() - oracle.mean()).norm() < 1e-9);
    CHECK(max_abs_diff(post.cov(), oracle.cov()) < 1e-9);
  }

  SUBCASE("unit prior with unit weights halves the covariance") {
    const QuadraticFeatureCost unit = quadratic_cost(
        MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1), VectorXd::Zero(2),
        VectorXd::Zero(1), MatrixXd::Identity(2, 2), VectorXd::Zero(2));
    const Gaussian iso(VectorXd::Zero(3), MatrixXd::Identity(3, 3));
    const Gaussian post =
        cost_innovation(unit, 0, iso, 1.0, Propagator::linearize());
    CHECK(post.mean().norm() < 1e-12);
    CHECK(max_abs_diff(post.cov(), 0.5 * MatrixXd::Identity(3, 3)) < 1e-10);
  }

  SUBCASE("vanishing temperature leaves the belief untouched") {
    const Gaussian post =
        cost_innovation(f.cost, 0, prior, 1e-12, Propagator::linearize());
    CHECK((post.mean() - prior.mean()).norm() < 1e-9);
    CHECK(relative_error(post.cov(), prior.cov()) < 1e-9);
  }

  SUBCASE("terminal stage conditions the state belief") {
    const Gaussian state(m.head(2), MatrixXd(p.topLeftCorner(2, 2)));
    const Gaussian oracle_t = conjugate_posterior(
        state, MatrixXd::Identity(2, 2), f.qt, f.x_term, alpha);
    const Gaussian post =
        cost_innovation(f.cost, -1, state, alpha, Propagator::cubature());
    CHECK((post.mean() - oracle_t.mean()).norm() < 1e-9);
    CHECK(max_abs_diff(post.cov(), oracle_t.cov()) < 1e-9);
  }

  SUBCASE("invalid configurations are rejected") {
    CHECK_THROWS_AS(
        cost_innovation(f.cost, 0, prior, 0.0, Propagator::linearize()),
        ConfigError);
    CHECK_THROWS_AS(
        cost_innovation(f.cost, 0, prior, -1.0, Propagator::linearize()),
        ConfigError);
    const QuadraticFeatureCost bare = make_effort_cost(2, 1);
    const Gaussian state(m.head(2), MatrixXd(p.topLeftCorner(2, 2)));
    CHECK_THROWS_AS(
        cost_innovation(bare, -1, state, 1.0, Propagator::linearize()),
        ConfigError);
  }
}

TEST_CASE("dynamics prediction carries exact affine moments") {
  const AffineFixture f = make_affine_fixture();
  MatrixXd ftau(2, 3);
  ftau << f.a, f.b;

  const VectorXd m = (VectorXd(3) << 1.2, -0.4, 0.6).finished();
  MatrixXd p(3, 3);
  p << 0.5, 0.12, -0.03, 0.12, 0.35, 0.06, -0.03, 0.06, 0.8;
  const Gaussian tau(m, p);

  for (const Propagator& prop :
       {Propagator::linearize(), Propagator::cubature()}) {
    CAPTURE(prop.name());
    const JointGaussian joint = dynamics_prediction(f.sys, 0, tau, prop);
    CHECK((joint.mean_a() - m).norm() < 1e-10);
    CHECK(max_abs_diff(joint.cov_aa(), p) < 1e-10);
    CHECK((joint.mean_b() - (ftau * m + f.c)).norm() < 1e-10);
    CHECK(max_abs_diff(joint.cov_bb(),
                       ftau * p * ftau.transpose() + f.noise) < 1e-10);
    CHECK(max_abs_diff(joint.cov_ab(), p * ftau.transpose()) < 1e-10);
  }

  CHECK_THROWS_AS(dynamics_prediction(
                      f.sys, 0,
                      Gaussian(VectorXd::Zero(2), MatrixXd::Identity(2, 2)),
                      Propagator::linearize()),
                  ConfigError);
}

// The strongest correctness check available for the sweep: on an affine
// system the full trajectory posterior is one big Gaussian, so conditioning
// the stacked joint over (x_0, u_0, x_1, u_1, x_2) on every pseudo
// observation at once must reproduce each smoothed stage marginal that the
// recursive forward-backward pass computes.
TEST_CASE("smoothing matches dense joint conditioning") {
  const AffineFixture f = make_affine_fixture();
  const int horizon = 3;
  const double alpha = 0.9;

  const VectorXd mu0 = (VectorXd(2) << 1.0, -0.5).finished();
  const MatrixXd sig0 = (MatrixXd(2, 2) << 0.5, 0.1, 0.1, 0.3).finished();
  const Gaussian init(mu0, sig0);

  LinearPolicy prior;
  prior.gains = {(MatrixXd(1, 2) << 0.2, -0.3).finished(),
                 (MatrixXd(1, 2) << -0.1, 0.15).finished()};
  prior.offsets = {VectorXd::Constant(1, 0.4), VectorXd::Constant(1, -0.2)};
  prior.covs = {MatrixXd::Constant(1, 1, 0.6), MatrixXd::Constant(1, 1, 0.8)};

  // Dense trajectory prior over v = (x0, u0, x1, u1, x2) as an affine map of
  // the independent sources s = (x0, w0, w1, e0, e1).
  const int nv = 8, ns = 8;
  MatrixXd r_x0 = MatrixXd::Zero(2, ns);
  r_x0.leftCols(2).setIdentity();
  VectorXd o_x0 = VectorXd::Zero(2);

  MatrixXd r_u0 = prior.gains[0] * r_x0;
  r_u0(0, 2) = 1.0;
  VectorXd o_u0 = prior.offsets[0];

  MatrixXd r_x1 = f.a * r_x0 + f.b * r_u0;
  r_x1.middleCols(4, 2) += MatrixXd::Identity(2, 2);
  VectorXd o_x1 = f.a * o_x0 + f.b * o_u0 + f.c;

  MatrixXd r_u1 = prior.gains[1] * r_x1;
  r_u1(0, 3) = 1.0;
  VectorXd o_u1 = prior.gains[1] * o_x1 + prior.offsets[1];

  MatrixXd r_x2 = f.a * r_x1 + f.b * r_u1;
  r_x2.middleCols(6, 2) += MatrixXd::Identity(2, 2);
  VectorXd o_x2 = f.a * o_x1 + f.b * o_u1 + f.c;

  MatrixXd map(nv, ns);
  map << r_x0, r_u0, r_x1, r_u1, r_x2;
  VectorXd shift(nv);
  shift << o_x0, o_u0, o_x1, o_u1, o_x2;

  MatrixXd src_cov = MatrixXd::Zero(ns, ns);
  src_cov.topLeftCorner(2, 2) = sig0;
  src_cov(2, 2) = prior.covs[0](0, 0);
  src_cov(3, 3) = prior.covs[1](0, 0);
  src_cov.block(4, 4, 2, 2) = f.noise;
  src_cov.block(6, 6, 2, 2) = f.noise;
  VectorXd src_mean = VectorXd::Zero(ns);
  src_mean.head(2) = mu0;

  const VectorXd mean_v = map * src_mean + shift;
  const MatrixXd cov_v = map * src_cov * map.transpose();

  // All pseudo observations at once: stage features (x_t, u_t) with noise
  // (alpha Theta)^-1 and the terminal feature x_2.
  MatrixXd theta = MatrixXd::Zero(3, 3);
  theta.topLeftCorner(2, 2) = f.q;
  theta.bottomRightCorner(1, 1) = f.r;

  MatrixXd obs = MatrixXd::Zero(8, nv);
  obs.block(0, 0, 3, 3).setIdentity();
  obs.block(3, 3, 3, 3).setIdentity();
  obs.block(6, 6, 2, 2).setIdentity();
  VectorXd y(8);
  y << f.x_ref, f.u_ref, f.x_ref, f.u_ref, f.x_term;
  MatrixXd obs_noise = MatrixXd::Zero(8, 8);
  obs_noise.block(0, 0, 3, 3) = theta.inverse() / alpha;
  obs_noise.block(3, 3, 3, 3) = theta.inverse() / alpha;
  obs_noise.block(6, 6, 2, 2) = f.qt.inverse() / alpha;

  const MatrixXd s_mat = obs * cov_v * obs.transpose() + obs_noise;
  const MatrixXd k_mat = s_mat.llt().solve(obs * cov_v).transpose();
  const VectorXd post_mean = mean_v + k_mat * (y - obs * mean_v);
  const MatrixXd post_cov = cov_v - k_mat * obs * cov_v;

  auto dense_marginal = [&](int row, int n) {
    return Gaussian(post_mean.segment(row, n), post_cov.block(row, row, n, n));
  };

  for (const Propagator& prop :
       {Propagator::linearize(), Propagator::cubature()}) {
    CAPTURE(prop.name());
    const BeliefTrajectory bt =
        e_step(f.sys, f.cost, init, prior, horizon, alpha, prop);

    REQUIRE(bt.state_prior.size() == 3);
    REQUIRE(bt.tau_smoothed.size() == 2);
    REQUIRE(bt.state_smoothed.size() == 3);
    CHECK(bt.policy_fallbacks == 0);

    const int rows[] = {0, 3};
    for (int t = 0; t < 2; ++t) {
      const Gaussian dense = dense_marginal(rows[t], 3);
      CHECK((bt.tau_smoothed[t].mean() - dense.mean()).norm() < 1e-8);
      CHECK(max_abs_diff(bt.tau_smoothed[t].cov(), dense.cov()) < 1e-8);

      const Gaussian dense_x = dense_marginal(rows[t], 2);
      CHECK((bt.state_smoothed[t].mean() - dense_x.mean()).norm() < 1e-8);
      CHECK(max_abs_diff(bt.state_smoothed[t].cov(), dense_x.cov()) < 1e-8);

      // The extracted policy is the dense conditional u_t | x_t.
      const JointGaussian ux(
          post_mean.segment(rows[t] + 2, 1), post_mean.segment(rows[t], 2),
          post_cov.block(rows[t] + 2, rows[t] + 2, 1, 1),
          post_cov.block(rows[t], rows[t], 2, 2),
          post_cov.block(rows[t] + 2, rows[t], 1, 2));
      const JointGaussian::Regression reg = ux.regression_on_b();
      CHECK((bt.policy.gains[t] - reg.gain).norm() < 1e-7);
      CHECK((bt.policy.offsets[t] - reg.offset).norm() < 1e-7);
      CHECK(max_abs_diff(bt.policy.covs[t], reg.cov) < 1e-7);
    }

    const Gaussian dense_term = dense_marginal(6, 2);
    CHECK((bt.state_smoothed[2].mean() - dense_term.mean()).norm() < 1e-8);
    CHECK(max_abs_diff(bt.state_smoothed[2].cov(), dense_term.cov()) < 1e-8);
    CHECK((bt.state_smoothed[2].mean() - bt.terminal_filtered.mean()).norm() <
          1e-12);
  }

  SUBCASE("a sweep without innovations reproduces the prior") {
    const BeliefTrajectory bt =
        e_step(f.sys, f.cost, init, prior, horizon, alpha,
               Propagator::cubature(), true, /*update_costs=*/false);
    for (int t = 0; t < 2; ++t) {
      CHECK((bt.tau_smoothed[t].mean() - bt.tau_prior[t].mean()).norm() <
            1e-9);
      CHECK(max_abs_diff(bt.tau_smoothed[t].cov(), bt.tau_prior[t].cov()) <
            1e-9);
    }
    for (int t = 0; t < 3; ++t) {
      CHECK((bt.state_smoothed[t].mean() - bt.state_prior[t].mean()).norm() <
            1e-9);
      CHECK(max_abs_diff(bt.state_smoothed[t].cov(),
                         bt.state_prior[t].cov()) < 1e-9);
    }
  }

  SUBCASE("configuration errors are rejected up front") {
    const Propagator& prop = Propagator::linearize();
    CHECK_THROWS_AS(e_step(f.sys, f.cost, init, prior, 0, alpha, prop),
                    ConfigError);
    CHECK_THROWS_AS(e_step(f.sys, f.cost,
                           Gaussian(VectorXd::Zero(3),
                                    MatrixXd::Identity(3, 3)),
                           prior, horizon, alpha, prop),
                    ConfigError);
    CHECK_THROWS_AS(e_step(f.sys, f.cost, init, prior, 4, alpha, prop),
                    ConfigError);
    CHECK_THROWS_AS(e_step(f.sys, f.cost, init, prior, horizon, 0.0, prop),
                    ConfigError);
  }
}

TEST_CASE("policy extraction is the smoothed conditional") {
  // Scalar joint with Sigma_x = 2, Sigma_ux = 1, Sigma_u = 1 and a mean on
  // the regression line: K = 1/2, k = 0, conditional variance 1/2.
  const VectorXd mean = (VectorXd(2) << 2.0, 1.0).finished();
  const MatrixXd cov = (MatrixXd(2, 2) << 2.0, 1.0, 1.0, 1.0).finished();
  int fallbacks = -1;
  const LinearPolicy pol =
      extract_policy({Gaussian(mean, cov)}, 1, &fallbacks);
  REQUIRE(pol.gains.size() == 1);
  CHECK(pol.gains[0](0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pol.offsets[0](0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(pol.covs[0](0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fallbacks == 0);

  SUBCASE("a degenerate state marginal degrades to feedforward") {
    const VectorXd m2 = (VectorXd(2) << 2.0, 0.7).finished();
    const MatrixXd c2 = (MatrixXd(2, 2) << 0.0, 0.0, 0.0, 1.0).finished();
    int n_fallback = -1;
    const LinearPolicy ff =
        extract_policy({Gaussian(m2, c2)}, 1, &n_fallback);
    CHECK(ff.gains[0].norm() == 0.0);
    CHECK(ff.offsets[0](0) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(ff.covs[0](0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(n_fallback == 1);
  }
}

TEST_CASE("temperature update matches the closed-form ratio") {
  const QuadraticFeatureCost cost = [] {
    QuadraticFeatureCost c = make_effort_cost(1, 1);
    c.dz_term = 1;
    c.terminal_features = [](const VectorXd& x) { return x; };
    c.terminal_features_jacobian = [](const VectorXd&) {
      return MatrixXd::Identity(1, 1);
    };
    c.terminal_target = VectorXd::Zero(1);
    c.terminal_weight = MatrixXd::Identity(1, 1);
    return c;
  }();
  const Propagator& prop = Propagator::linearize();

  auto point_beliefs = [](double u, double x_term) {
    BeliefTrajectory bt;
    bt.dx = 1;
    bt.du = 1;
    const Gaussian state(VectorXd::Zero(1), MatrixXd::Zero(1, 1));
    bt.state_prior = {state, state};
    bt.tau_smoothed = {Gaussian((VectorXd(2) << 0.0, u).finished(),
                                MatrixXd::Zero(2, 2))};
    bt.state_smoothed = {state, Gaussian(VectorXd::Constant(1, x_term),
                                         MatrixXd::Zero(1, 1))};
    return bt;
  };

  // Two stages of unit-weight scalar residuals summing to 4 give the ratio
  // ((T-1) dz + dz_term) / 4 = 1/2.
  const double root2 = std::sqrt(2.0);
  MStepResult m = m_step(cost, point_beliefs(root2, root2), 1.0, 2.0, prop);
  CHECK(m.alpha_raw == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(m.alpha == doctest::Approx(0.5).epsilon(1e-9));
  CHECK_FALSE(m.underflow);

  SUBCASE("the trust region clamps both directions") {
    // Residual trace 0.2 puts the raw ratio at 10; gamma = 2 accepts 2.
    const double small = std::sqrt(0.1);
    MStepResult up = m_step(cost, point_beliefs(small, small), 1.0, 2.0, prop);
    CHECK(up.alpha_raw == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(up.alpha == doctest::Approx(2.0).epsilon(1e-12));

    MStepResult down =
        m_step(cost, point_beliefs(root2, root2), 1.0, 1.5, prop);
    CHECK(down.alpha_raw == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(down.alpha == doctest::Approx(1.0 / 1.5).epsilon(1e-12));
  }

  SUBCASE("exactly reproduced targets flag underflow") {
    MStepResult flat = m_step(cost, point_beliefs(0.0, 0.0), 3.7, 2.0, prop);
    CHECK(flat.underflow);
    CHECK(flat.alpha == doctest::Approx(3.7));
    CHECK(flat.alpha_raw == doctest::Approx(3.7));
  }

  SUBCASE("degenerate configurations are rejected") {
    CHECK_THROWS_AS(m_step(cost, point_beliefs(1.0, 1.0), 1.0, 0.5, prop),
                    ConfigError);

    BeliefTrajectory empty;
    empty.dx = 1;
    empty.du = 1;
    const Gaussian state(VectorXd::Zero(1), MatrixXd::Zero(1, 1));
    empty.state_prior = {state};
    empty.state_smoothed = {state};
    const QuadraticFeatureCost bare = make_effort_cost(1, 1);
    CHECK_THROWS_AS(m_step(bare, empty, 1.0, 2.0, prop), ConfigError);
  }
}

TEST_CASE("single-stage problem fits the temperature in closed form") {
  // With no transitions the update reduces to dz_term over the expected
  // quadratic residual of the terminal conditioning, which has an exact
  // conjugate answer.
  QuadraticFeatureCost cost;
  cost.dx = 2;
  cost.du = 1;
  const MatrixXd qt = (MatrixXd(2, 2) << 2.0, 0.3, 0.3, 1.5).finished();
  const VectorXd r = (VectorXd(2) << 0.4, -0.2).finished();
  cost.dz_term = 2;
  cost.terminal_features = [](const VectorXd& x) { return x; };
  cost.terminal_features_jacobian = [](const VectorXd&) {
    return MatrixXd::Identity(2, 2);
  };
  cost.terminal_target = r;
  cost.terminal_weight = qt;

  const VectorXd m0 = (VectorXd(2) << 1.0, 0.5).finished();
  const MatrixXd p0 = (MatrixXd(2, 2) << 0.3, 0.05, 0.05, 0.2).finished();
  const Gaussian init(m0, p0);
  const double alpha = 0.8;

  const AffineFixture f = make_affine_fixture();
  const BeliefTrajectory bt = e_step(f.sys, cost, init, LinearPolicy{}, 1,
                                     alpha, Propagator::linearize());
  REQUIRE(bt.state_smoothed.size() == 1);

  const Gaussian post =
      conjugate_posterior(init, MatrixXd::Identity(2, 2), qt, r, alpha);
  CHECK((bt.state_smoothed[0].mean() - post.mean()).norm() < 1e-9);

  const VectorXd delta = r - post.mean();
  const double denom =
      (qt * (post.cov() + delta * delta.transpose())).trace();
  const MStepResult m =
      m_step(cost, bt, alpha, 4.0, Propagator::linearize());
  CHECK(m.alpha_raw == doctest::Approx(2.0 / denom).epsilon(1e-9));
  CHECK(m.alpha ==
        doctest::Approx(std::clamp(2.0 / denom, 0.2, 3.2)).epsilon(1e-9));
}

TEST_CASE("expectation maximization descends on a linear-quadratic task") {
  const Environment env = make_double_integrator();
  SolverOptions opts;
  opts.propagator = Propagator::linearize();
  opts.input_prior_cov = env.input_prior_cov;
  opts.max_iterations = 30;

  const int horizon = 30;
  const SolveResult res = solve(env.sys, env.cost, env.init, horizon, opts);

  REQUIRE(res.iterations >= 1);
  REQUIRE(res.cost_trace.size() == static_cast<size_t>(res.iterations));
  REQUIRE(res.alpha_trace.size() == static_cast<size_t>(res.iterations));
  REQUIRE(res.iter_seconds.size() == static_cast<size_t>(res.iterations));
  CHECK(res.beliefs.horizon() == horizon);
  CHECK(res.policy.gains.size() == static_cast<size_t>(horizon - 1));
  CHECK(res.mean_controls.size() == static_cast<size_t>(horizon - 1));

  for (size_t i = 1; i < res.cost_trace.size(); ++i) {
    CHECK(res.cost_trace[i] <=
          res.cost_trace[i - 1] +
              1e-8 * std::max(1.0, std::abs(res.cost_trace[i - 1])));
  }
  CHECK(res.cost_trace.back() < res.cost_trace.front());

  for (size_t i = 0; i < res.alpha_trace.size(); ++i) {
    CHECK(res.alpha_trace[i] > 0.0);
    CHECK(std::isfinite(res.alpha_trace[i]));
    if (i > 0) {
      const double ratio = res.alpha_trace[i] / res.alpha_trace[i - 1];
      CHECK(ratio <= opts.gamma + 1e-9);
      CHECK(ratio >= 1.0 / opts.gamma - 1e-9);
    }
  }
  CHECK(res.alpha == doctest::Approx(res.alpha_trace.back()));

  // The feedforward reduction keeps the plan means and drops the gains.
  const LinearPolicy ff = res.feedforward();
  REQUIRE(ff.gains.size() == res.policy.gains.size());
  for (size_t t = 0; t < ff.gains.size(); ++t) {
    CHECK(ff.gains[t].norm() == 0.0);
    CHECK((ff.offsets[t] - res.mean_controls[t]).norm() < 1e-12);
  }
}

TEST_CASE("temperature initialization is honored and calibrated") {
  const Environment env = make_double_integrator();
  SolverOptions opts;
  opts.propagator = Propagator::linearize();
  opts.input_prior_cov = env.input_prior_cov;
  opts.max_iterations = 2;

  SUBCASE("an explicit initial temperature bounds the first update") {
    opts.alpha_init = 5.0;
    const SolveResult res = solve(env.sys, env.cost, env.init, 20, opts);
    CHECK(res.alpha_trace.front() >= 5.0 / opts.gamma - 1e-12);
    CHECK(res.alpha_trace.front() <= 5.0 * opts.gamma + 1e-12);
  }

  SUBCASE("the default calibrates a positive finite temperature") {
    const SolveResult res = solve(env.sys, env.cost, env.init, 20, opts);
    CHECK(res.alpha_trace.front() > 0.0);
    CHECK(std::isfinite(res.alpha_trace.front()));
  }

  SUBCASE("invalid knobs are rejected") {
    SolverOptions bad = opts;
    bad.max_iterations = 0;
    CHECK_THROWS_AS(solve(env.sys, env.cost, env.init, 20, bad), ConfigError);
    bad = opts;
    bad.window = 0;
    CHECK_THROWS_AS(solve(env.sys, env.cost, env.init, 20, bad), ConfigError);
  }
}

TEST_CASE("expert law blends feedback by plan consistency") {
  // Synthetic two-stage plan with unit state covariance so the Mahalanobis
  // weight has closed form.
  SolveResult res;
  const MatrixXd gain = (MatrixXd(1, 2) << 1.0, 2.0).finished();
  res.policy.gains = {gain, 0.5 * gain};
  res.policy.offsets = {VectorXd::Constant(1, 0.5),
                        VectorXd::Constant(1, -0.1)};
  res.beliefs.state_smoothed = {
      Gaussian(VectorXd::Zero(2), MatrixXd::Identity(2, 2)),
      Gaussian(VectorXd::Ones(2), MatrixXd::Identity(2, 2))};
  res.mean_controls = {VectorXd::Constant(1, 0.5),
                       VectorXd::Constant(1, -0.1)};

  const ControlLaw law = expert_law(res);

  // On the plan the correction vanishes.
  CHECK(law(0, VectorXd::Zero(2))(0) == doctest::Approx(0.5).epsilon(1e-12));

  // Unit deviations in both coordinates weigh the feedback by exp(-1).
  const VectorXd ones = VectorXd::Ones(2);
  const double w = std::exp(-1.0);
  CHECK(law(0, ones)(0) ==
        doctest::Approx(0.5 + w * (gain * ones)(0)).epsilon(1e-12));

  // A squared distance of 2 ln 2 lands exactly midway between feedforward
  // and full feedback.
  const VectorXd dev =
      (VectorXd(2) << std::sqrt(2.0 * std::log(2.0)), 0.0).finished();
  const double fb = 0.5 + (gain * dev)(0);
  CHECK(law(0, dev)(0) == doctest::Approx(0.5 * (0.5 + fb)).epsilon(1e-12));

  // Far from the plan the law is pure feedforward.
  CHECK(law(0, VectorXd::Constant(2, 50.0))(0) ==
        doctest::Approx(0.5).epsilon(1e-15));

  // Stage indices clamp to the planned range.
  const VectorXd probe = (VectorXd(2) << 1.3, 0.4).finished();
  CHECK((law(7, probe) - law(1, probe)).norm() == 0.0);
  CHECK((law(-2, probe) - law(0, probe)).norm() == 0.0);

  SUBCASE("a singular plan marginal disables the correction") {
    SolveResult degenerate = res;
    degenerate.beliefs.state_smoothed[0] =
        Gaussian(VectorXd::Zero(2), MatrixXd::Zero(2, 2));
    const ControlLaw careful = expert_law(degenerate);
    CHECK(careful(0, ones)(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(careful(0, VectorXd::Zero(2))(0) ==
          doctest::Approx(0.5).epsilon(1e-15));
  }
}

TEST_CASE("law selection covers the three execution modes") {
  const Environment env = make_double_integrator();
  SolverOptions opts;
  opts.propagator = Propagator::linearize();
  opts.input_prior_cov = env.input_prior_cov;
  opts.max_iterations = 8;
  const SolveResult res = solve(env.sys, env.cost, env.init, 12, opts);

  const ControlLaw ff = select_law(res, PolicyMode::Feedforward);
  const ControlLaw fb = select_law(res, PolicyMode::Feedback);
  const ControlLaw expert = select_law(res, PolicyMode::Expert);

  const VectorXd off_plan = (VectorXd(2) << 0.4, -0.3).finished();
  for (int t : {0, 4, 10}) {
    // Feedforward ignores the state entirely.
    CHECK((ff(t, off_plan) - res.mean_controls[t]).norm() < 1e-12);
    CHECK((ff(t, VectorXd::Zero(2)) - res.mean_controls[t]).norm() < 1e-12);

    // Feedback is the extracted affine policy.
    CHECK((fb(t, off_plan) - res.policy.control(t, off_plan)).norm() < 1e-12);

    // All three agree on the planned mean.
    const VectorXd mean_x = res.mean_states[t];
    CHECK((fb(t, mean_x) - ff(t, mean_x)).norm() < 1e-9);
    CHECK((expert(t, mean_x) - ff(t, mean_x)).norm() < 1e-9);

    // Off the plan the expert interpolates feedforward and feedback.
    const VectorXd lo = ff(t, off_plan);
    const VectorXd hi = fb(t, off_plan);
    const VectorXd mid = expert(t, off_plan);
    CHECK((mid - lo).norm() <= (hi - lo).norm() + 1e-12);
  }
}

TEST_CASE("covariance control reaches the target terminal law") {
  const Environment env = make_double_integrator();
  const QuadraticFeatureCost effort = make_effort_cost(2, 1);
  const int horizon = 30;

  CovarianceControlOptions opts;
  opts.input_prior_cov = env.input_prior_cov;
  opts.max_iterations = 60;

  SUBCASE("a tight terminal Gaussian is matched in the linear case") {
    const Gaussian target(VectorXd::Zero(2), 0.03 * MatrixXd::Identity(2, 2));
    const CovarianceControlResult res = covariance_control_solve(
        env.sys, effort, env.init, target, horizon, opts);
    CHECK(res.iterations == opts.max_iterations);
    CHECK(res.kl_trace.size() == static_cast<size_t>(res.iterations));
    // Effort dofs over the prior control energy: 29 / (29 * 4).
    CHECK(res.alpha == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(res.final_kl() <= 1e-6);
  }

  SUBCASE("the unforced prior terminal is a fixed point") {
    LinearPolicy prior;
    for (int t = 0; t < horizon - 1; ++t) {
      prior.gains.push_back(MatrixXd::Zero(1, 2));
      prior.offsets.push_back(VectorXd::Zero(1));
      prior.covs.push_back(env.input_prior_cov);
    }
    const BeliefTrajectory sweep =
        e_step(env.sys, effort, env.init, prior, horizon, 1.0,
               Propagator::cubature(), false, /*update_costs=*/false);
    const Gaussian target = sweep.state_prior.back();

    CovarianceControlOptions fixed = opts;
    fixed.max_iterations = 40;
    const CovarianceControlResult res = covariance_control_solve(
        env.sys, effort, env.init, target, horizon, fixed);
    CHECK(res.final_kl() <= 1e-9);
  }

  SUBCASE("configuration errors are rejected") {
    const Gaussian bad_target(VectorXd::Zero(3), MatrixXd::Identity(3, 3));
    CHECK_THROWS_AS(covariance_control_solve(env.sys, effort, env.init,
                                             bad_target, horizon, opts),
                    ConfigError);
    const Gaussian target(VectorXd::Zero(2), 0.1 * MatrixXd::Identity(2, 2));
    CHECK_THROWS_AS(covariance_control_solve(env.sys, effort, env.init,
                                             target, 1, opts),
                    ConfigError);
    CovarianceControlOptions none = opts;
    none.max_iterations = 0;
    CHECK_THROWS_AS(covariance_control_solve(env.sys, effort, env.init,
                                             target, horizon, none),
                    ConfigError);
  }
}

TEST_CASE("duality residuals replicate the backward recursion") {
  // Diffuse prior and vanishing process noise turn the smoothing messages
  // into the discrete Riccati recursion.
  MatrixXd a(2, 2), b(2, 1);
  a << 1.05, 0.3, -0.1, 0.92;
  b << 0.1, 0.8;
  const SystemModel sys = make_affine_system(
      a, b, VectorXd::Zero(2), 1e-9 * MatrixXd::Identity(2, 2));
  const QuadraticFeatureCost cost = quadratic_cost(
      2.0 * MatrixXd::Identity(2, 2), MatrixXd::Constant(1, 1, 0.5),
      VectorXd::Zero(2), VectorXd::Zero(1), 3.0 * MatrixXd::Identity(2, 2),
      VectorXd::Zero(2));
  const Gaussian init(VectorXd::Ones(2), 1e6 * MatrixXd::Identity(2, 2));
  const int horizon = 30;

  const DualityReport rep =
      duality_report(sys, cost, init, horizon, 1.0,
                     1e6 * MatrixXd::Identity(1, 1), Propagator::linearize());

  REQUIRE(rep.tau_message.size() == static_cast<size_t>(horizon - 1));
  REQUIRE(rep.state_message.size() == static_cast<size_t>(horizon));
  REQUIRE(rep.precision_gain.size() == static_cast<size_t>(horizon - 1));

  CHECK(rep.action_residual < 1e-4);
  CHECK(rep.gain_residual < 1e-8);
  CHECK(rep.value_residual < 1e-4);

  // The smoothed conditional gain itself lands on the Riccati gain.
  for (int t = 0; t < horizon - 1; ++t) {
    CHECK((rep.covariance_gain[t] - rep.gain_oracle[t]).norm() /
              rep.gain_oracle[t].norm() <
          1e-4);
  }
}

TEST_CASE("duality corrected action update holds at finite noise") {
  MatrixXd a(2, 2), b(2, 1);
  a << 1.05, 0.3, -0.1, 0.92;
  b << 0.1, 0.8;
  const QuadraticFeatureCost cost = quadratic_cost(
      2.0 * MatrixXd::Identity(2, 2), MatrixXd::Constant(1, 1, 0.5),
      VectorXd::Zero(2), VectorXd::Zero(1), 3.0 * MatrixXd::Identity(2, 2),
      VectorXd::Zero(2));

  SUBCASE("the noise-aware form closes the gap the raw form opens") {
    const SystemModel sys = make_affine_system(a, b, VectorXd::Zero(2),
                                               MatrixXd::Identity(2, 2));
    const Gaussian init(VectorXd::Ones(2), 1e6 * MatrixXd::Identity(2, 2));
    const DualityReport rep = duality_report(sys, cost, init, 30, 1.0,
                                             1e6 * MatrixXd::Identity(1, 1),
                                             Propagator::linearize());
    CHECK(rep.action_residual > 0.1);

    double corrected = 0.0;
    for (size_t t = 0; t < rep.tau_message.size(); ++t) {
      corrected = std::max(
          corrected, (rep.tau_message[t] - rep.action_update_corrected[t])
                             .norm() /
                         rep.action_oracle[t].norm());
    }
    CHECK(corrected < 1e-6);
  }

  SUBCASE("the conditional gain identity is scale free") {
    for (double prior_scale : {1.0, 100.0, 1e6}) {
      for (double noise_scale : {1.0, 1e-4}) {
        CAPTURE(prior_scale);
        CAPTURE(noise_scale);
        const SystemModel sys = make_affine_system(
            a, b, VectorXd::Zero(2),
            noise_scale * MatrixXd::Identity(2, 2));
        const Gaussian init(VectorXd::Ones(2),
                            prior_scale * MatrixXd::Identity(2, 2));
        const DualityReport rep = duality_report(
            sys, cost, init, 20, 1.0,
            prior_scale * MatrixXd::Identity(1, 1), Propagator::linearize());
        CHECK(rep.gain_residual < 1e-8);
      }
    }
  }
}

}  // TEST_SUITE

}  // namespace
