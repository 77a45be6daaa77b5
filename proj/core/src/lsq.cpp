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

#include "maglab/lsq.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace maglab::lsq {
namespace {

void project(Eigen::VectorXd& x, const Options& opts) {
  if (opts.lower) x = x.cwiseMax(*opts.lower);
  if (opts.upper) x = x.cwiseMin(*opts.upper);
}

}  // namespace

double Result::sigma(int i) const {
  const double v = covariance(i, i);
  return v > 0.0 && std::isfinite(v) ? std::sqrt(v) : std::numeric_limits<double>::infinity();
}

Eigen::MatrixXd numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& x, const Eigen::VectorXd& fx,
                                 double rel_step) {
  Eigen::MatrixXd jac(fx.size(), x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = rel_step * std::max(std::abs(x[j]), 1.0);
    xp[j] = x[j] + h;
    jac.col(j) = (f(xp) - fx) / h;
    xp[j] = x[j];
  }
  return jac;
}

Result levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd x0, const Options& opts, const JacobianFn& jacobian) {
  Result out;
  project(x0, opts);
  Eigen::VectorXd x = x0;
  Eigen::VectorXd r = f(x);
  if (!r.allFinite()) {
    out.params = x;
    out.residuals = r;
    out.chi2 = std::numeric_limits<double>::infinity();
    out.covariance = Eigen::MatrixXd::Constant(x.size(), x.size(), std::numeric_limits<double>::infinity());
    return out;
  }
  double cost = r.squaredNorm();
  double lambda = opts.lambda0;
  const auto jac_at = [&](const Eigen::VectorXd& p, const Eigen::VectorXd& rp) {
    return jacobian ? jacobian(p) : numeric_jacobian(f, p, rp, opts.fd_step);
  };
  Eigen::MatrixXd J = jac_at(x, r);

  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() <= opts.gtol * std::max(1.0, cost)) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd diag = JtJ.diagonal().cwiseMax(1e-12 * std::max(1.0, JtJ.diagonal().maxCoeff()));

    bool accepted = false;
    bool tiny_step = false;
    for (int inner = 0; inner < 40; ++inner) {
      Eigen::MatrixXd A = JtJ;
      A.diagonal() += lambda * diag;
      const Eigen::VectorXd dx = A.ldlt().solve(-g);
      Eigen::VectorXd xn = x + dx;
      project(xn, opts);
      const Eigen::VectorXd step = xn - x;
      if (step.norm() <= opts.xtol * (x.norm() + opts.xtol)) {
        tiny_step = true;
        break;
      }
      const Eigen::VectorXd rn = f(xn);
      const double cn = rn.allFinite() ? rn.squaredNorm() : std::numeric_limits<double>::infinity();
      if (cn < cost) {
        const double rel = (cost - cn) / std::max(cost, std::numeric_limits<double>::min());
        x = xn;
        r = rn;
        cost = cn;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (rel <= opts.ftol) tiny_step = true;
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e16) break;
    }
    if (tiny_step) {
      out.converged = true;
      ++it;
      break;
    }
    if (!accepted) {
      // No descent direction left: we are at a (possibly flat) minimum.
      out.converged = true;
      ++it;
      break;
    }
    J = jac_at(x, r);
  }

  J = jac_at(x, r);
  const Eigen::MatrixXd JtJ = J.transpose() * J;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(JtJ);
  out.params = x;
  out.residuals = r;
  out.chi2 = cost;
  out.iterations = it;
  if (!lu.isInvertible()) {
    out.singular = true;
    out.covariance = Eigen::MatrixXd::Constant(x.size(), x.size(), std::numeric_limits<double>::infinity());
  } else {
    out.covariance = lu.inverse();
    const auto dof = static_cast<double>(r.size() - x.size());
    if (!opts.absolute_sigma && dof > 0) out.covariance *= cost / dof;
  }
  return out;
}

GoldenResult golden_section(const std::function<double(double)>& f, double a, double b, double tol, int max_evals) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  if (a > b) std::swap(a, b);
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  int evals = 2;
  while (b - a > tol && evals < max_evals) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    ++evals;
  }
  return fc < fd ? GoldenResult{c, fc, evals} : GoldenResult{d, fd, evals};
}

}  // namespace maglab::lsq
