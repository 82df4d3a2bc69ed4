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

#ifndef I2C_COMMON_HPP
#define I2C_COMMON_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace i2c {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Covariance (or other SPD matrix) failed a Cholesky factorization even
/// after one jitter retry.
struct SingularCovariance : std::runtime_error {
  explicit SingularCovariance(const std::string& what)
      : std::runtime_error("singular covariance: " + what) {}
};

/// A state or control became NaN/Inf during simulation.
struct NonFiniteState : std::runtime_error {
  explicit NonFiniteState(const std::string& what)
      : std::runtime_error("non-finite state: " + what) {}
};

/// A moment propagation produced NaN/Inf at an evaluation point.
struct NonFinitePropagation : std::runtime_error {
  explicit NonFinitePropagation(const std::string& what)
      : std::runtime_error("non-finite propagation: " + what) {}
};

/// Q_uu lost positive definiteness beyond the regularization cap.
struct IndefiniteQuu : std::runtime_error {
  explicit IndefiniteQuu(const std::string& what)
      : std::runtime_error("indefinite Q_uu: " + what) {}
};

/// Cost weight matrix is not symmetric positive definite.
struct DegenerateCost : std::runtime_error {
  explicit DegenerateCost(const std::string& what)
      : std::runtime_error("degenerate cost: " + what) {}
};

/// Risk-adjusted value regularizer lost positive definiteness (risk-averse
/// setting infeasible for the given noise level).
struct RiskInfeasible : std::runtime_error {
  explicit RiskInfeasible(const std::string& what)
      : std::runtime_error("risk-sensitive recursion infeasible: " + what) {}
};

/// Quadrature degree outside the supported range.
struct UnsupportedDegree : std::runtime_error {
  explicit UnsupportedDegree(const std::string& what)
      : std::runtime_error("unsupported quadrature degree: " + what) {}
};

/// Malformed configuration (unknown key, bad value, missing section).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what)
      : std::runtime_error("config error: " + what) {}
};

inline MatrixXd symmetrize(const MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

/// Cholesky with the project-wide jitter policy: one retry with
/// 1e-9 * tr(S)/d added to the diagonal, then SingularCovariance.
/// `jittered`, when given, reports whether the retry path was taken.
inline Eigen::LLT<MatrixXd> safe_llt(const MatrixXd& s, const char* what,
                                     bool* jittered = nullptr) {
  if (jittered) *jittered = false;
  Eigen::LLT<MatrixXd> llt(s);
  if (llt.info() == Eigen::Success) return llt;
  const double d = static_cast<double>(s.rows());
  const double eps = 1e-9 * s.trace() / d;
  llt.compute(s + eps * MatrixXd::Identity(s.rows(), s.cols()));
  if (llt.info() == Eigen::Success) {
    if (jittered) *jittered = true;
    return llt;
  }
  throw SingularCovariance(what);
}

/// S^{-1} B through Cholesky; never forms the explicit inverse.
inline MatrixXd solve_spd(const MatrixXd& s, const MatrixXd& b,
                          const char* what) {
  return safe_llt(s, what).solve(b);
}

inline bool all_finite(const VectorXd& v) { return v.allFinite(); }
inline bool all_finite(const MatrixXd& m) { return m.allFinite(); }

/// ||a - b||_F / max(||b||_F, floor); used by diagnostics and tests.
inline double relative_error(const MatrixXd& a, const MatrixXd& b,
                             double floor = 1e-12) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

}  // namespace i2c

#endif  // I2C_COMMON_HPP
