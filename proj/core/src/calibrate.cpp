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

#include "maglab/calibrate.hpp"

#include "maglab/lsq.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace maglab::calibrate {

using virtlab::Lab;

virtlab::SpectroscopySweep SpectroscopyPlan::sweep() const {
  auto s = virtlab::SpectroscopySweep::linear(f_start_hz, f_stop_hz, f_step_hz);
  s.pulse_duration_s = pulse_s;
  s.drive_decay_s = decay_s;
  s.drive_amplitude = amplitude;
  s.shots_per_point = shots;
  return s;
}

std::optional<double> measure_larmor(Lab& lab, const SpectroscopyPlan& plan, const virtlab::ResonanceOptions& opts,
                                     virtlab::ResonanceFit* fit) {
  const auto rec = lab.spectroscopy(plan.sweep());
  auto rf = virtlab::fit_resonance(rec, opts);
  std::optional<double> f;
  if (rf.detected && rf.fit.usable()) f = rf.f_l();
  if (fit) *fit = std::move(rf);
  return f;
}

namespace {

constexpr double kInvPhi = 0.6180339887498949;

std::optional<Eigen::Vector3d> fit_parabola(const std::vector<double>& x, const std::vector<double>& y, double x0,
                                            const std::vector<bool>& keep) {
  std::size_t n = 0;
  for (bool k : keep) n += k ? 1 : 0;
  if (n < 3) return std::nullopt;
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  for (std::size_t i = 0, r = 0; i < x.size(); ++i) {
    if (!keep[i]) continue;
    const double u = x[i] - x0;
    a.row(r) << u * u, u, 1.0;
    b[r++] = y[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 3) return std::nullopt;
  return Eigen::Vector3d(qr.solve(b));
}

}  // namespace

std::optional<double> parabola_vertex(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 3 || x.size() != y.size()) return std::nullopt;
  const double x0 = x.front();
  std::vector<bool> keep(x.size(), true);
  auto c = fit_parabola(x, y, x0, keep);
  if (c && x.size() >= 6) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double u = x[i] - x0;
      r[i] = y[i] - ((*c)[0] * u * u + (*c)[1] * u + (*c)[2]);
    }
    std::vector<double> ar(r.size());
    std::transform(r.begin(), r.end(), ar.begin(), [](double v) { return std::abs(v); });
    std::nth_element(ar.begin(), ar.begin() + ar.size() / 2, ar.end());
    const double scale = 1.4826 * ar[ar.size() / 2];
    bool dropped = false;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (scale > 0.0 && std::abs(r[i]) > 5.0 * scale) {
        keep[i] = false;
        dropped = true;
      }
    }
    if (dropped) c = fit_parabola(x, y, x0, keep);
  }
  if (!c || !((*c)[0] > 0.0)) return std::nullopt;
  return x0 - (*c)[1] / (2.0 * (*c)[0]);
}

SweetSpotResult find_sweet_spot(Lab& lab, const SweetSpotOptions& opts, const ProbeCallback& progress) {
  if (!(opts.lo_mm < opts.hi_mm)) throw ValidationError("sweet-spot range must satisfy lo < hi");
  if (opts.coarse_points < 3) throw ValidationError("coarse scan needs at least 3 points");
  if (opts.budget < opts.coarse_points) throw ValidationError("probe budget smaller than the coarse scan");
  if (opts.approach_direction != 1 && opts.approach_direction != -1)
    throw ValidationError("approach direction must be +1 or -1");
  if (!(opts.tol_mm > 0.0)) throw ValidationError("tolerance must be positive");

  const int ax = axis_index(opts.axis);
  const int dir = opts.approach_direction;
  SweetSpotResult res;
  double best = std::numeric_limits<double>::infinity();
  double bracket_lo = opts.lo_mm, bracket_hi = opts.hi_mm;
  int failures = 0;

  auto go_to = [&](double x) {
    StagePosition target = lab.world().stage.state().commanded;
    const double cur = target[ax];
    target[ax] = x;
    if ((x - cur) * dir <= 0.0) {
      // Overshoot against the approach direction, clipped to the range.
      StagePosition pre = target;
      pre[ax] = std::clamp(x - dir * 2.0, opts.lo_mm, opts.hi_mm);
      if (pre[ax] != x) lab.move_to(pre);
    }
    lab.move_to(target);
  };

  auto probe = [&](double x) -> std::optional<double> {
    go_to(x);
    Probe p{x, measure_larmor(lab, opts.spectroscopy, opts.resonance)};
    if (!p.f_l_hz) ++failures;
    if (p.f_l_hz) best = std::min(best, *p.f_l_hz);
    res.probes.push_back(p);
    res.best_so_far_hz.push_back(best);
    if (progress) progress(p, bracket_lo, bracket_hi);
    return p.f_l_hz;
  };
  auto too_many_failures = [&] { return failures > 0.3 * static_cast<double>(res.probes.size()); };
  auto value = [](const std::optional<double>& f) { return f ? *f : std::numeric_limits<double>::infinity(); };

  // Coarse scan in the approach direction.
  std::vector<double> grid = virtlab::linspace(opts.lo_mm, opts.hi_mm, opts.coarse_points);
  if (dir < 0) std::reverse(grid.begin(), grid.end());
  std::vector<double> coarse_f;
  for (double x : grid) coarse_f.push_back(value(probe(x)));
  if (too_many_failures()) throw CalibrationError("spectroscopy fits failed at more than 30% of probes");

  std::vector<std::size_t> order(grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] < grid[b]; });
  std::size_t imin = 0;
  for (std::size_t k = 1; k < order.size(); ++k)
    if (coarse_f[order[k]] < coarse_f[order[imin]]) imin = k;
  if (imin == 0 || imin + 1 == order.size())
    throw BracketError("no interior minimum of f_L in [" + std::to_string(opts.lo_mm) + ", " +
                       std::to_string(opts.hi_mm) + "] mm");
  bracket_lo = grid[order[imin - 1]];
  bracket_hi = grid[order[imin + 1]];
  const double fit_lo = bracket_lo, fit_hi = bracket_hi;

  // Golden section on the bracket; one probe is kept in reserve for x_star.
  double a = bracket_lo, b = bracket_hi;
  double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
  const int reserve = 1;
  auto room = [&] { return static_cast<int>(res.probes.size()) + reserve < opts.budget; };
  double fc = 0.0, fd = 0.0;
  if (room()) fc = value(probe(c));
  if (room()) fd = value(probe(d));
  while (b - a > opts.tol_mm && room()) {
    ++res.iterations;
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = value(probe(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = value(probe(d));
    }
    bracket_lo = a;
    bracket_hi = b;
  }
  if (too_many_failures()) throw CalibrationError("spectroscopy fits failed at more than 30% of probes");

  std::vector<double> xs, ys;
  double best_x = 0.5 * (a + b);
  for (const auto& p : res.probes) {
    if (!p.f_l_hz) continue;
    if (*p.f_l_hz <= best) best_x = p.position_mm;
    if (p.position_mm < fit_lo || p.position_mm > fit_hi) continue;
    xs.push_back(p.position_mm);
    ys.push_back(*p.f_l_hz * *p.f_l_hz);
  }
  double x_star = best_x;
  if (auto v = parabola_vertex(xs, ys); v && *v >= fit_lo && *v <= fit_hi) x_star = *v;
  res.x_star_mm = x_star;
  res.bracket_lo_mm = bracket_lo;
  res.bracket_hi_mm = bracket_hi;

  if (static_cast<int>(res.probes.size()) < opts.budget) probe(x_star);
  else go_to(x_star);
  res.f_l_min_hz = best;
  res.residual_angle_deg = lab.world().larmor().theta_deg;
  return res;
}

// --- g-tensor ----------------------------------------------------------------

spin::GTensor canonical(const spin::GTensor& g) {
  const Eigen::Matrix3d& r = g.orientation;
  std::array<int, 3> col_for_row{-1, -1, -1};
  std::array<bool, 3> row_used{}, col_used{};
  for (int k = 0; k < 3; ++k) {
    int br = -1, bc = -1;
    double bv = -1.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (!row_used[i] && !col_used[j] && std::abs(r(i, j)) > bv) {
          bv = std::abs(r(i, j));
          br = i;
          bc = j;
        }
    row_used[br] = col_used[bc] = true;
    col_for_row[br] = bc;
  }
  spin::GTensor out;
  for (int i = 0; i < 3; ++i) {
    out.principal[i] = g.principal[col_for_row[i]];
    Eigen::Vector3d v = r.col(col_for_row[i]);
    if (i < 2 && v[i] < 0.0) v = -v;
    out.orientation.col(i) = v;
  }
  if (out.orientation.determinant() < 0.0) out.orientation.col(2) = -out.orientation.col(2);
  return out;
}

namespace {

Eigen::Matrix3d rotation_from(const Eigen::Vector3d& r) {
  const double angle = r.norm();
  if (angle < 1e-300) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, r / angle).toRotationMatrix();
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

struct Start {
  Eigen::Matrix3d frame;
  Eigen::Vector3d g;
};

}  // namespace

GTensorFit fit_gtensor(const std::vector<MapPoint>& map, const FieldModel& model, const GTensorFitOptions& opts) {
  if (map.size() < 20) throw ValidationError("g-tensor fit needs at least 20 map points");
  if (opts.orientation_seeds < 1) throw ValidationError("need at least one orientation seed");
  const std::size_t n = map.size();
  constexpr double k = spin::kMuBOverH;

  std::vector<Eigen::Vector3d> fields(n);
  Eigen::VectorXd f(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(map[i].f_l_hz > 0.0) || !map[i].position.finite()) throw ValidationError("map frequencies must be positive");
    fields[i] = model.at(map[i].position).vec();
    f[i] = map[i].f_l_hz;
  }

  int axes_moved = 0;
  for (int a = 0; a < 3; ++a) {
    double lo = map[0].position[a], hi = lo;
    for (const auto& p : map) {
      lo = std::min(lo, p.position[a]);
      hi = std::max(hi, p.position[a]);
    }
    if (hi - lo > 1e-6) ++axes_moved;
  }

  // Linear problem for M = G^2: (f/k)^2 = B^T M B, rows weighted by 1/f^2.
  Eigen::MatrixXd design(n, 6);
  Eigen::VectorXd rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d& b = fields[i];
    const double w = 1.0 / (f[i] / k) / (f[i] / k);
    design.row(i) << b.x() * b.x(), b.y() * b.y(), b.z() * b.z(), 2 * b.x() * b.y(), 2 * b.x() * b.z(),
        2 * b.y() * b.z();
    design.row(i) *= w;
    rhs[i] = 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const bool rank_deficient = sv[5] <= 1e-9 * sv[0];

  GTensorFit out;
  out.underdetermined = rank_deficient || axes_moved < 2;

  auto predict = [&](const Eigen::Matrix3d& gm, std::size_t i) { return k * (gm * fields[i]).norm(); };

  if (out.underdetermined) {
    // Orientation fixed; fit principal values only.
    const Eigen::Matrix3d frame = opts.fallback_orientation;
    Eigen::MatrixXd d3(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d bp = frame.transpose() * fields[i];
      d3.row(i) = bp.cwiseProduct(bp).transpose() / ((f[i] / k) * (f[i] / k));
    }
    Eigen::Vector3d g2 = d3.colPivHouseholderQr().solve(Eigen::VectorXd::Ones(n));
    Eigen::VectorXd x0(3);
    for (int i = 0; i < 3; ++i) x0[i] = 0.5 * std::log(std::max(g2[i], 1e-6));
    auto resid = [&](const Eigen::VectorXd& p) {
      const Eigen::Matrix3d gm = frame * p.array().exp().matrix().asDiagonal() * frame.transpose();
      Eigen::VectorXd r(n);
      for (std::size_t i = 0; i < n; ++i) r[i] = (predict(gm, i) - f[i]) / f[i];
      return r;
    };
    const auto r = lsq::levenberg_marquardt(resid, x0);
    out.g.principal = r.params.array().exp();
    out.g.orientation = frame;
    for (int i = 0; i < 3; ++i) out.principal_sigma[i] = out.g.principal[i] * r.sigma(i);
    out.objective = r.chi2;
    out.seed_objectives = {r.chi2};
    out.misalignment_deg = spin::misalignment_deg(out.g);
    out.note = axes_moved < 2 ? "map spans fewer than two axes; orientation held fixed"
                              : "map does not determine the full tensor; orientation held fixed";
    return out;
  }

  Eigen::VectorXd m6 = svd.solve(rhs);
  Eigen::Matrix3d m;
  m << m6[0], m6[3], m6[4], m6[3], m6[1], m6[5], m6[4], m6[5], m6[2];
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
  Eigen::Matrix3d frame0 = es.eigenvectors();
  if (frame0.determinant() < 0.0) frame0.col(2) = -frame0.col(2);

  std::mt19937_64 rng(opts.seed);
  std::vector<Start> starts;
  for (int s = 0; s < opts.orientation_seeds; ++s) {
    Start st;
    st.frame = s == 0 ? frame0 : random_rotation(rng);
    const Eigen::Matrix3d mp = st.frame.transpose() * m * st.frame;
    for (int i = 0; i < 3; ++i) st.g[i] = std::sqrt(std::max(mp(i, i), 1e-8));
    starts.push_back(st);
  }

  lsq::Result best_r;
  Eigen::Matrix3d best_frame;
  double best_obj = std::numeric_limits<double>::infinity();
  for (const auto& st : starts) {
    auto gm_of = [&](const Eigen::VectorXd& p) {
      const Eigen::Matrix3d rot = rotation_from(p.tail<3>()) * st.frame;
      return Eigen::Matrix3d(rot * p.head<3>().array().exp().matrix().asDiagonal() * rot.transpose());
    };
    auto resid = [&](const Eigen::VectorXd& p) {
      const Eigen::Matrix3d gm = gm_of(p);
      Eigen::VectorXd r(n);
      for (std::size_t i = 0; i < n; ++i) r[i] = (predict(gm, i) - f[i]) / f[i];
      return r;
    };
    Eigen::VectorXd x0(6);
    x0 << st.g.array().log().matrix(), Eigen::Vector3d::Zero();
    lsq::Options lo;
    lo.max_iterations = 300;
    const auto r = lsq::levenberg_marquardt(resid, x0, lo);
    out.seed_objectives.push_back(r.chi2);
    if (r.chi2 < best_obj) {
      best_obj = r.chi2;
      best_r = r;
      best_frame = st.frame;
    }
  }

  auto tensor_of = [&](const Eigen::VectorXd& p) {
    spin::GTensor g;
    g.principal = p.head<3>().array().exp();
    g.orientation = rotation_from(p.tail<3>()) * best_frame;
    return canonical(g);
  };
  out.g = tensor_of(best_r.params);
  out.objective = best_obj;
  out.misalignment_deg = spin::misalignment_deg(out.g);

  // Uncertainties by propagating the parameter covariance numerically.
  auto derived = [&](const Eigen::VectorXd& p) {
    const spin::GTensor g = tensor_of(p);
    Eigen::Vector4d v;
    v << g.principal, spin::misalignment_deg(g);
    return v;
  };
  Eigen::Matrix<double, 4, 6> jac;
  const Eigen::Vector4d v0 = derived(best_r.params);
  for (int j = 0; j < 6; ++j) {
    Eigen::VectorXd p = best_r.params;
    const double h = 1e-6;
    p[j] += h;
    jac.col(j) = (derived(p) - v0) / h;
  }
  const Eigen::Matrix4d cov = jac * best_r.covariance * jac.transpose();
  auto sd = [](double v) { return std::isfinite(v) ? std::sqrt(std::max(v, 0.0)) : std::numeric_limits<double>::infinity(); };
  for (int i = 0; i < 3; ++i) out.principal_sigma[i] = sd(cov(i, i));
  out.misalignment_sigma_deg = sd(cov(3, 3));
  return out;
}

}  // namespace maglab::calibrate
