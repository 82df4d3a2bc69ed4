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

#include "i2c/inference.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace i2c {

namespace {

constexpr int kMaxGhDegree = 10;
constexpr long kMaxGhPoints = 1L << 20;

/// Weighted points. Moments accumulated with plain weighted sums; the
/// Monte Carlo backend divides by (n-1) for covariances instead.
struct PointSet {
  std::vector<VectorXd> points;
  std::vector<double> weights;
  bool unbiased_cov = false;
};

PointSet cubature_points(const Gaussian& input) {
  const int n = input.dim();
  MatrixXd l = safe_llt(input.cov(), "propagate: cubature input").matrixL();
  const double scale = std::sqrt(static_cast<double>(n));
  PointSet ps;
  ps.points.reserve(2 * n);
  ps.weights.assign(2 * n, 1.0 / (2.0 * n));
  for (int i = 0; i < n; ++i) {
    VectorXd dir = scale * l.col(i);
    ps.points.push_back(input.mean() + dir);
    ps.points.push_back(input.mean() - dir);
  }
  return ps;
}

PointSet gauss_hermite_points(const Gaussian& input, int degree) {
  const int n = input.dim();
  if (degree < 2 || degree > kMaxGhDegree)
    throw UnsupportedDegree("degree " + std::to_string(degree) +
                            " outside [2, " + std::to_string(kMaxGhDegree) +
                            "]");
  double count = std::pow(static_cast<double>(degree), n);
  if (count > static_cast<double>(kMaxGhPoints))
    throw UnsupportedDegree("tensor grid " + std::to_string(degree) + "^" +
                            std::to_string(n) + " exceeds the point cap");
  GaussHermiteRule rule = gh_nodes(degree);
  MatrixXd l = safe_llt(input.cov(), "propagate: gh input").matrixL();
  const long total = static_cast<long>(count);
  PointSet ps;
  ps.points.reserve(total);
  ps.weights.reserve(total);
  std::vector<int> idx(n, 0);
  for (long p = 0; p < total; ++p) {
    VectorXd z(n);
    double w = 1.0;
    for (int i = 0; i < n; ++i) {
      z[i] = rule.nodes[idx[i]];
      w *= rule.weights[idx[i]];
    }
    ps.points.push_back(input.mean() + l * z);
    ps.weights.push_back(w);
    for (int i = 0; i < n; ++i) {
      if (++idx[i] < degree) break;
      idx[i] = 0;
    }
  }
  return ps;
}

PointSet monte_carlo_points(const Gaussian& input, int samples,
                            std::uint64_t seed) {
  if (samples < 2)
    throw std::invalid_argument("propagate: MonteCarlo needs >= 2 samples");
  PointSet ps;
  ps.points = input.sample(samples, seed);
  ps.weights.assign(samples, 1.0 / samples);
  ps.unbiased_cov = true;
  return ps;
}

JointGaussian from_points(const PointSet& ps, const VectorFn& f,
                          const Gaussian& input, const MatrixXd& noise) {
  const int n = input.dim();
  std::vector<VectorXd> values;
  values.reserve(ps.points.size());
  for (const auto& p : ps.points) {
    VectorXd y = f(p);
    if (!all_finite(y)) throw NonFinitePropagation("evaluation point");
    values.push_back(std::move(y));
  }
  const int m = static_cast<int>(values.front().size());

  VectorXd mean_in = VectorXd::Zero(n), mean_out = VectorXd::Zero(m);
  for (size_t i = 0; i < values.size(); ++i) {
    mean_in += ps.weights[i] * ps.points[i];
    mean_out += ps.weights[i] * values[i];
  }
  MatrixXd c_in = MatrixXd::Zero(n, n), c_out = MatrixXd::Zero(m, m),
           c_cross = MatrixXd::Zero(n, m);
  for (size_t i = 0; i < values.size(); ++i) {
    VectorXd di = ps.points[i] - mean_in;
    VectorXd dy = values[i] - mean_out;
    c_in += ps.weights[i] * di * di.transpose();
    c_out += ps.weights[i] * dy * dy.transpose();
    c_cross += ps.weights[i] * di * dy.transpose();
  }
  if (ps.unbiased_cov) {
    const double k =
        static_cast<double>(ps.points.size()) / (ps.points.size() - 1.0);
    c_in *= k;
    c_out *= k;
    c_cross *= k;
  }
  return JointGaussian(mean_in, mean_out, c_in, c_out + noise, c_cross);
}

JointGaussian linearize_joint(const VectorFn& f, const Gaussian& input,
                              const MatrixXd& noise, const JacobianFn& jac) {
  VectorXd mean_out = f(input.mean());
  if (!all_finite(mean_out)) throw NonFinitePropagation("linearization point");
  MatrixXd j = jac ? jac(input.mean()) : fd_jacobian(f, input.mean());
  if (!all_finite(j)) throw NonFinitePropagation("jacobian");
  MatrixXd cross = input.cov() * j.transpose();
  MatrixXd c_out = j * cross + noise;
  return JointGaussian(input.mean(), mean_out, input.cov(), c_out, cross);
}

}  // namespace

std::string Propagator::name() const {
  switch (kind) {
    case Kind::Linearize:
      return "linearize";
    case Kind::Cubature:
      return "cubature";
    case Kind::GaussHermite:
      return "gh:" + std::to_string(gh_degree);
    case Kind::MonteCarlo:
      return "mc:" + std::to_string(mc_samples);
  }
  return "unknown";
}

GaussHermiteRule gh_nodes(int degree) {
  if (degree < 2 || degree > kMaxGhDegree)
    throw UnsupportedDegree("degree " + std::to_string(degree) +
                            " outside [2, " + std::to_string(kMaxGhDegree) +
                            "]");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite
  // recurrence: off-diagonal sqrt(k), weights from first eigenvector rows.
  MatrixXd jac = MatrixXd::Zero(degree, degree);
  for (int k = 1; k < degree; ++k) {
    double b = std::sqrt(static_cast<double>(k));
    jac(k, k - 1) = b;
    jac(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(jac);
  GaussHermiteRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights = es.eigenvectors().row(0).array().square();
  return rule;
}

MatrixXd fd_jacobian(const VectorFn& f, const VectorXd& x) {
  const int n = static_cast<int>(x.size());
  MatrixXd j;
  for (int i = 0; i < n; ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[i]));
    VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    VectorXd col = (f(xp) - f(xm)) / (2.0 * h);
    if (j.size() == 0) j.resize(col.size(), n);
    j.col(i) = col;
  }
  return j;
}

JointGaussian propagate(const Propagator& prop, const VectorFn& f,
                        const Gaussian& input, const MatrixXd& output_noise,
                        const JacobianFn& jacobian) {
  switch (prop.kind) {
    case Propagator::Kind::Linearize:
      return linearize_joint(f, input, output_noise, jacobian);
    case Propagator::Kind::Cubature:
      return from_points(cubature_points(input), f, input, output_noise);
    case Propagator::Kind::GaussHermite:
      return from_points(gauss_hermite_points(input, prop.gh_degree), f, input,
                         output_noise);
    case Propagator::Kind::MonteCarlo:
      return from_points(monte_carlo_points(input, prop.mc_samples,
                                            prop.mc_seed),
                         f, input, output_noise);
  }
  throw std::logic_error("propagate: unknown backend");
}

}  // namespace i2c
