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

#include "i2c/gaussian.hpp"

#include <cmath>
#include <random>

namespace i2c {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}  // namespace

Gaussian::Gaussian(VectorXd mean, MatrixXd cov)
    : mean_(std::move(mean)), cov_(symmetrize(cov)) {
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size())
    throw std::invalid_argument("Gaussian: covariance shape does not match mean");
  if (!all_finite(mean_) || !all_finite(cov_))
    throw std::invalid_argument("Gaussian: non-finite moments");
}

Gaussian::Canonical Gaussian::canonical() const {
  auto llt = safe_llt(cov_, "Gaussian::canonical");
  Canonical c;
  c.lambda = symmetrize(llt.solve(MatrixXd::Identity(dim(), dim())));
  c.eta = llt.solve(mean_);
  return c;
}

Gaussian Gaussian::from_canonical(const VectorXd& eta, const MatrixXd& lambda) {
  auto llt = safe_llt(symmetrize(lambda), "Gaussian::from_canonical");
  MatrixXd cov = symmetrize(
      llt.solve(MatrixXd::Identity(lambda.rows(), lambda.cols())));
  return Gaussian(llt.solve(eta), cov);
}

double Gaussian::mahalanobis_squared(const VectorXd& x) const {
  VectorXd d = x - mean_;
  return d.dot(safe_llt(cov_, "Gaussian::mahalanobis_squared").solve(d));
}

double Gaussian::log_density(const VectorXd& x) const {
  auto llt = safe_llt(cov_, "Gaussian::log_density");
  VectorXd d = x - mean_;
  double quad = d.dot(llt.solve(d));
  double logdet = 0.0;
  for (int i = 0; i < dim(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (dim() * kLog2Pi + logdet + quad);
}

std::vector<VectorXd> Gaussian::sample(int n, std::uint64_t seed) const {
  MatrixXd l = safe_llt(cov_, "Gaussian::sample").matrixL();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<VectorXd> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    VectorXd z(dim());
    for (int j = 0; j < dim(); ++j) z[j] = unit(rng);
    out.push_back(mean_ + l * z);
  }
  return out;
}

Gaussian fuse(const Gaussian& a, const Gaussian& b) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("fuse: dimension mismatch");
  auto ca = a.canonical();
  auto cb = b.canonical();
  return Gaussian::from_canonical(ca.eta + cb.eta, ca.lambda + cb.lambda);
}

double kl_divergence(const Gaussian& p, const Gaussian& q) {
  if (p.dim() != q.dim())
    throw std::invalid_argument("kl_divergence: dimension mismatch");
  const int d = p.dim();
  auto lq = safe_llt(q.cov(), "kl_divergence: q");
  auto lp = safe_llt(p.cov(), "kl_divergence: p");
  double trace = lq.solve(p.cov()).trace();
  VectorXd dm = q.mean() - p.mean();
  double quad = dm.dot(lq.solve(dm));
  double logdet_q = 0.0, logdet_p = 0.0;
  for (int i = 0; i < d; ++i) {
    logdet_q += 2.0 * std::log(lq.matrixL()(i, i));
    logdet_p += 2.0 * std::log(lp.matrixL()(i, i));
  }
  return 0.5 * (trace + quad - d + logdet_q - logdet_p);
}

JointGaussian::JointGaussian(VectorXd mean_a, VectorXd mean_b, MatrixXd cov_aa,
                             MatrixXd cov_bb, MatrixXd cov_ab)
    : mean_a_(std::move(mean_a)),
      mean_b_(std::move(mean_b)),
      cov_aa_(symmetrize(cov_aa)),
      cov_bb_(symmetrize(cov_bb)),
      cov_ab_(std::move(cov_ab)) {
  if (cov_aa_.rows() != mean_a_.size() || cov_bb_.rows() != mean_b_.size() ||
      cov_ab_.rows() != mean_a_.size() || cov_ab_.cols() != mean_b_.size())
    throw std::invalid_argument("JointGaussian: block shape mismatch");
  if (!all_finite(mean_a_) || !all_finite(mean_b_) || !all_finite(cov_aa_) ||
      !all_finite(cov_bb_) || !all_finite(cov_ab_))
    throw std::invalid_argument("JointGaussian: non-finite moments");
}

Gaussian JointGaussian::assemble() const {
  const int na = dim_a(), nb = dim_b();
  VectorXd mean(na + nb);
  mean << mean_a_, mean_b_;
  MatrixXd cov(na + nb, na + nb);
  cov.topLeftCorner(na, na) = cov_aa_;
  cov.topRightCorner(na, nb) = cov_ab_;
  cov.bottomLeftCorner(nb, na) = cov_ab_.transpose();
  cov.bottomRightCorner(nb, nb) = cov_bb_;
  return Gaussian(mean, cov);
}

JointGaussian JointGaussian::split(const Gaussian& joint, int na) {
  const int nb = joint.dim() - na;
  if (na < 0 || nb < 0) throw std::invalid_argument("JointGaussian::split");
  return JointGaussian(joint.mean().head(na), joint.mean().tail(nb),
                       joint.cov().topLeftCorner(na, na),
                       joint.cov().bottomRightCorner(nb, nb),
                       joint.cov().topRightCorner(na, nb));
}

Gaussian JointGaussian::condition_on_b(const VectorXd& value) const {
  auto llt = safe_llt(cov_bb_, "JointGaussian::condition_on_b");
  MatrixXd gain = llt.solve(cov_ab_.transpose()).transpose();
  VectorXd mean = mean_a_ + gain * (value - mean_b_);
  MatrixXd cov = symmetrize(cov_aa_ - gain * cov_ab_.transpose());
  return Gaussian(mean, cov);
}

JointGaussian::Regression JointGaussian::regression_on_b() const {
  auto llt = safe_llt(cov_bb_, "JointGaussian::regression_on_b");
  Regression r;
  r.gain = llt.solve(cov_ab_.transpose()).transpose();
  r.offset = mean_a_ - r.gain * mean_b_;
  r.cov = symmetrize(cov_aa_ - r.gain * cov_ab_.transpose());
  return r;
}

}  // namespace i2c
