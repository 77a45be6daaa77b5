// Copyright 2026 The maglab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>

namespace maglab::lsq {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct Options {
  int max_iterations = 200;
  /// Relative step tolerance.
  double xtol = 1e-10;
  /// Relative cost-decrease tolerance.
  double ftol = 1e-15;
  double gtol = 1e-14;
  double lambda0 = 1e-3;
  /// Forward-difference step, relative to max(|x|, 1), when no Jacobian is supplied.
  double fd_step = 1e-7;
  /// If true the covariance is (J^T J)^-1; otherwise it is scaled by the
  /// reduced chi-square.
  bool absolute_sigma = false;
  std::optional<Eigen::VectorXd> lower;
  std::optional<Eigen::VectorXd> upper;
};

struct Result {
  Eigen::VectorXd params;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd covariance;
  /// Sum of squared residuals.
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
  /// J^T J was numerically singular at the solution.
  bool singular = false;

  double sigma(int i) const;
};

/// Damped Gauss-Newton (Levenberg-Marquardt with Marquardt diagonal scaling)
/// minimizing |f(x)|^2. Bounds, when present, are enforced by projection.
Result levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd x0, const Options& opts = {},
                           const JacobianFn& jacobian = {});

Eigen::MatrixXd numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& x, const Eigen::VectorXd& fx,
                                 double rel_step);

/// Golden-section minimization of a unimodal scalar function on [a, b].
struct GoldenResult {
  double x;
  double fx;
  int evaluations;
};
GoldenResult golden_section(const std::function<double(double)>& f, double a, double b, double tol, int max_evals);

}  // namespace maglab::lsq
