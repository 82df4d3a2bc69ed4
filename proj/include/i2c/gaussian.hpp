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

#ifndef I2C_GAUSSIAN_HPP
#define I2C_GAUSSIAN_HPP

#include <cstdint>

#include "i2c/common.hpp"

namespace i2c {

/// Multivariate normal in moment form. The covariance is symmetrized on
/// construction; positive definiteness is demanded lazily by the operations
/// that need to invert it (they throw SingularCovariance via safe_llt).
class Gaussian {
 public:
  Gaussian() = default;
  Gaussian(VectorXd mean, MatrixXd cov);

  int dim() const { return static_cast<int>(mean_.size()); }
  const VectorXd& mean() const { return mean_; }
  const MatrixXd& cov() const { return cov_; }

  /// Natural parameters (Lambda = cov^-1, eta = Lambda * mean).
  struct Canonical {
    VectorXd eta;
    MatrixXd lambda;
  };
  Canonical canonical() const;
  static Gaussian from_canonical(const VectorXd& eta, const MatrixXd& lambda);

  /// Squared Mahalanobis distance (x - mean)^T cov^-1 (x - mean).
  double mahalanobis_squared(const VectorXd& x) const;

  double log_density(const VectorXd& x) const;

  /// Seeded draws; deterministic for a fixed seed on a fixed platform.
  std::vector<VectorXd> sample(int n, std::uint64_t seed) const;

 private:
  VectorXd mean_;
  MatrixXd cov_;
};

/// Product of two Gaussian densities over the same variable, renormalized.
/// Computed in information form; both covariances must be invertible.
Gaussian fuse(const Gaussian& a, const Gaussian& b);

/// KL(p || q) in nats.
double kl_divergence(const Gaussian& p, const Gaussian& q);

/// Block Gaussian over a pair (a, b) with an explicit cross covariance.
/// cov_ab has dim(a) rows and dim(b) columns.
class JointGaussian {
 public:
  JointGaussian() = default;
  JointGaussian(VectorXd mean_a, VectorXd mean_b, MatrixXd cov_aa,
                MatrixXd cov_bb, MatrixXd cov_ab);

  int dim_a() const { return static_cast<int>(mean_a_.size()); }
  int dim_b() const { return static_cast<int>(mean_b_.size()); }

  const VectorXd& mean_a() const { return mean_a_; }
  const VectorXd& mean_b() const { return mean_b_; }
  const MatrixXd& cov_aa() const { return cov_aa_; }
  const MatrixXd& cov_bb() const { return cov_bb_; }
  const MatrixXd& cov_ab() const { return cov_ab_; }

  Gaussian marginal_a() const { return Gaussian(mean_a_, cov_aa_); }
  Gaussian marginal_b() const { return Gaussian(mean_b_, cov_bb_); }

  /// Stacked Gaussian over (a, b).
  Gaussian assemble() const;

  /// Splits a stacked Gaussian into blocks of size (na, nb).
  static JointGaussian split(const Gaussian& joint, int na);

  /// p(a | b = value): mean_a + C Sigma_b^-1 (value - mean_b) with the Schur
  /// complement covariance. Requires cov_bb to be invertible.
  Gaussian condition_on_b(const VectorXd& value) const;

  /// Regression coefficients of a on b: gain G = C Sigma_b^-1, offset
  /// g = mean_a - G mean_b, and the conditional covariance.
  struct Regression {
    MatrixXd gain;
    VectorXd offset;
    MatrixXd cov;
  };
  Regression regression_on_b() const;

 private:
  VectorXd mean_a_, mean_b_;
  MatrixXd cov_aa_, cov_bb_, cov_ab_;
};

}  // namespace i2c

#endif  // I2C_GAUSSIAN_HPP
