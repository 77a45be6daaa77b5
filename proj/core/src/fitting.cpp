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

#include "maglab/fitting.hpp"

#include "maglab/experiments.hpp"
#include "maglab/lsq.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace maglab::virtlab {

double FitResult::value(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p.value;
  throw NotFoundError("fit has no parameter '" + name + "'");
}

double FitResult::sigma(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p.sigma;
  throw NotFoundError("fit has no parameter '" + name + "'");
}

bool FitResult::has(const std::string& name) const {
  return std::any_of(params.begin(), params.end(), [&](const Param& p) { return p.name == name; });
}

Trace Trace::from_record(const RunRecord& r) {
  r.validate();
  Trace t;
  t.x = r.sweep;
  t.y = r.probabilities();
  t.sigma.resize(t.y.size());
  const double n = static_cast<double>(r.shots);
  const double floor_p = 0.5 / n;
  for (std::size_t i = 0; i < t.y.size(); ++i) {
    const double p = std::clamp(t.y[i], floor_p, 1.0 - floor_p);
    t.sigma[i] = std::sqrt(p * (1.0 - p) / n);
  }
  return t;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) {
    const double lo = *std::max_element(v.begin(), mid);
    m = 0.5 * (m + lo);
  }
  return m;
}

double rms(const Eigen::VectorXd& weighted_resid, const std::vector<double>& sigma) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < weighted_resid.size(); ++i) {
    const double r = weighted_resid[i] * sigma[static_cast<std::size_t>(i)];
    s += r * r;
  }
  return weighted_resid.size() ? std::sqrt(s / static_cast<double>(weighted_resid.size())) : 0.0;
}

// Weighted linear least squares y ~ c0 + c1 * col; returns (c0, c1, chi2).
struct Linear2 {
  double c0, c1, chi2;
};
Linear2 solve_linear2(const std::vector<double>& y, const std::vector<double>& w, const std::vector<double>& col) {
  double s = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    s += w[i];
    sx += w[i] * col[i];
    sxx += w[i] * col[i] * col[i];
    sy += w[i] * y[i];
    sxy += w[i] * col[i] * y[i];
  }
  const double det = s * sxx - sx * sx;
  Linear2 out{sy / s, 0.0, 0.0};
  if (std::abs(det) > 1e-14 * s * std::max(sxx, 1e-300)) {
    out.c1 = (s * sxy - sx * sy) / det;
    out.c0 = (sy - out.c1 * sx) / s;
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - out.c0 - out.c1 * col[i];
    out.chi2 += w[i] * r * r;
  }
  return out;
}

// ---- resonance -------------------------------------------------------------

struct LineContext {
  Lineshape shape;
  double t_p;
  double tau;
};

double line_profile(const LineContext& c, double width, double delta) {
  if (c.shape == Lineshape::Lorentzian) return 1.0 / (1.0 + (delta / width) * (delta / width));
  return detuned_rabi(width, delta, c.t_p, c.tau);
}

Peak fit_single_peak(const Trace& tr, std::size_t lo, std::size_t hi, double f0, double hwhm, double height,
                     double baseline, const LineContext& ctx) {
  std::vector<double> x(tr.x.begin() + static_cast<std::ptrdiff_t>(lo), tr.x.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
  std::vector<double> y(tr.y.begin() + static_cast<std::ptrdiff_t>(lo), tr.y.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
  std::vector<double> s(tr.sigma.begin() + static_cast<std::ptrdiff_t>(lo),
                        tr.sigma.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
  const double step = x.size() > 1 ? (x.back() - x.front()) / static_cast<double>(x.size() - 1) : 1.0;

  // Work in MHz-scale units relative to the window so the solver sees O(1) numbers.
  const double scale = std::max(hwhm, step);
  const auto residual = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(x.size()));
    const double c = f0 + q[0] * scale;
    const double w = q[1] * scale;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double m = q[3] + q[2] * line_profile(ctx, w, x[i] - c);
      r[static_cast<Eigen::Index>(i)] = (m - y[i]) / s[i];
    }
    return r;
  };

  const double peak_unit = std::max(line_profile(ctx, hwhm, 0.0), 1e-3);
  Eigen::VectorXd q0(4);
  q0 << 0.0, hwhm / scale, height / peak_unit, baseline;
  lsq::Options opts;
  opts.lower = Eigen::VectorXd(4);
  opts.upper = Eigen::VectorXd(4);
  const double span = (x.back() - x.front()) / scale;
  *opts.lower << (x.front() - f0) / scale, 0.05 * step / scale, 0.0, -0.5;
  *opts.upper << (x.back() - f0) / scale, span, 2.0, 1.5;
  (void)span;

  // The coherent lineshape has side lobes; start from a couple of widths.
  lsq::Result best;
  best.chi2 = std::numeric_limits<double>::infinity();
  for (double wmul : {1.0, 0.6, 1.6}) {
    Eigen::VectorXd q = q0;
    q[1] *= wmul;
    q[2] = height / std::max(line_profile(ctx, q[1] * scale, 0.0), 1e-3);
    q[2] = std::min(q[2], 2.0);
    lsq::Result res = lsq::levenberg_marquardt(residual, q, opts);
    if (res.chi2 < best.chi2) best = res;
  }

  Peak p;
  p.center_hz = f0 + best.params[0] * scale;
  p.center_sigma_hz = best.sigma(0) * scale;
  p.width_hz = best.params[1] * scale;
  p.amplitude = best.params[2] * line_profile(ctx, p.width_hz, 0.0);
  p.baseline = best.params[3];
  p.converged = best.converged && p.amplitude > 0.0 && p.center_hz > x.front() && p.center_hz < x.back();
  return p;
}

}  // namespace

std::optional<double> ResonanceFit::f_l() const {
  if (!detected || !selected) return std::nullopt;
  return peaks[*selected].center_hz;
}

ResonanceFit fit_resonance(const RunRecord& record, const ResonanceOptions& opts) {
  if (record.kind != RunKind::Spectroscopy) throw ValidationError("fit_resonance needs a spectroscopy record");
  const Trace tr = Trace::from_record(record);
  ResonanceFit out;
  const std::size_t n = tr.size();
  if (n < 5) return out;

  const double base = median(tr.y);
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) dev[i] = std::abs(tr.y[i] - base);
  const double mad_noise = 1.4826 * median(dev);
  const double binom = std::sqrt(std::clamp(base, 0.5 / record.shots, 1.0 - 0.5 / record.shots) *
                                 (1.0 - std::clamp(base, 0.5 / record.shots, 1.0 - 0.5 / record.shots)) /
                                 static_cast<double>(record.shots));
  const double noise = std::max(mad_noise, binom);
  out.noise_floor = noise;

  std::vector<double> sm(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = std::min(n - 1, i + 1);
    double acc = 0.0;
    for (std::size_t k = a; k <= b; ++k) acc += tr.y[k];
    sm[i] = acc / static_cast<double>(b - a + 1);
  }
  const double thresh = base + opts.threshold_sigma * noise / std::sqrt(3.0);

  struct Region {
    std::size_t arg;
    double height;
  };
  std::vector<Region> regions;
  for (std::size_t i = 0; i < n;) {
    if (sm[i] <= thresh) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::size_t arg = i;
    while (j < n && sm[j] > thresh) {
      if (sm[j] > sm[arg]) arg = j;
      ++j;
    }
    regions.push_back({arg, sm[arg] - base});
    i = j;
  }
  if (regions.empty()) return out;
  std::sort(regions.begin(), regions.end(), [](const Region& a, const Region& b) { return a.height > b.height; });
  if (static_cast<int>(regions.size()) > opts.max_peaks) regions.resize(static_cast<std::size_t>(opts.max_peaks));

  LineContext ctx{opts.lineshape, 0.0, std::numeric_limits<double>::infinity()};
  if (ctx.shape == Lineshape::DetunedRabi) {
    if (!record.params.contains("pulse_duration_s")) {
      ctx.shape = Lineshape::Lorentzian;
    } else {
      ctx.t_p = record.params.at("pulse_duration_s").get<double>();
      const auto& d = record.params.value("drive_decay_s", nlohmann::json());
      if (d.is_number()) ctx.tau = d.get<double>();
    }
  }

  const double step = (tr.x.back() - tr.x.front()) / static_cast<double>(n - 1);
  for (const Region& reg : regions) {
    const double half = base + 0.5 * reg.height;
    std::size_t l = reg.arg;
    while (l > 0 && sm[l] > half) --l;
    std::size_t r = reg.arg;
    while (r + 1 < n && sm[r] > half) ++r;
    const double hwhm = std::max(0.5 * (tr.x[r] - tr.x[l]), step);
    const double reach = 6.0 * hwhm + 3.0 * step;
    const double f0 = tr.x[reg.arg];
    const auto lo_it = std::lower_bound(tr.x.begin(), tr.x.end(), f0 - reach);
    const auto hi_it = std::upper_bound(tr.x.begin(), tr.x.end(), f0 + reach);
    const auto lo = static_cast<std::size_t>(lo_it - tr.x.begin());
    const auto hi = static_cast<std::size_t>(hi_it - tr.x.begin()) - 1;
    if (hi <= lo + 3) continue;
    Peak p = fit_single_peak(tr, lo, hi, f0, hwhm, reg.height, base, ctx);
    if (p.converged) out.peaks.push_back(p);
  }
  std::sort(out.peaks.begin(), out.peaks.end(), [](const Peak& a, const Peak& b) { return a.amplitude > b.amplitude; });
  // A broad line can cross the threshold more than once; keep one fit per line.
  std::vector<Peak> unique;
  for (const Peak& p : out.peaks) {
    const bool dup = std::any_of(unique.begin(), unique.end(), [&](const Peak& q) {
      return std::abs(p.center_hz - q.center_hz) <= std::max({q.width_hz, p.width_hz, step});
    });
    if (!dup) unique.push_back(p);
  }
  out.peaks = std::move(unique);
  out.detected = !out.peaks.empty();

  for (std::size_t i = 0; i < out.peaks.size(); ++i) {
    const bool excluded = std::any_of(opts.exclude_hz.begin(), opts.exclude_hz.end(), [&](double f) {
      return std::abs(out.peaks[i].center_hz - f) <= opts.exclude_tolerance_hz;
    });
    if (!excluded) {
      out.selected = i;
      break;
    }
  }
  if (out.selected) {
    const Peak& p = out.peaks[*out.selected];
    out.fit.params = {{"f_l", p.center_hz, p.center_sigma_hz},
                      {"width", p.width_hz, 0.0},
                      {"amplitude", p.amplitude, 0.0},
                      {"baseline", p.baseline, 0.0}};
    out.fit.converged = p.converged;
    out.fit.residual_rms = noise;
  } else {
    out.fit.note = "no qubit line outside excluded frequencies";
  }
  return out;
}

std::vector<std::optional<double>> track_moving_peak(const std::vector<ResonanceFit>& fits, double stability_tol_hz) {
  const std::size_t n = fits.size();
  const std::size_t need = std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(n))));
  std::vector<double> fixed;
  for (const auto& f : fits) {
    for (const auto& p : f.peaks) {
      std::size_t hits = 0;
      for (const auto& g : fits)
        hits += std::any_of(g.peaks.begin(), g.peaks.end(),
                            [&](const Peak& q) { return std::abs(q.center_hz - p.center_hz) <= stability_tol_hz; });
      if (hits >= need && n >= 3) fixed.push_back(p.center_hz);
    }
  }
  std::vector<std::optional<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& p : fits[i].peaks) {
      const bool is_fixed = std::any_of(fixed.begin(), fixed.end(),
                                        [&](double f) { return std::abs(f - p.center_hz) <= stability_tol_hz; });
      if (!is_fixed) {
        out[i] = p.center_hz;
        break;
      }
    }
  }
  return out;
}

// ---- decays ----------------------------------------------------------------

FitResult fit_decay(const Trace& tr, DecayModel model, const DecayOptions& opts) {
  FitResult out;
  const std::size_t n = tr.size();
  if (n < 8) throw FitError("decay fit needs at least 8 points");
  const bool ramsey = model == DecayModel::Ramsey;
  const bool free_exp = opts.free_exponent.value_or(!ramsey);
  const double exp0 = opts.exponent.value_or(ramsey ? 2.0 : 1.5);

  const double tmax = *std::max_element(tr.x.begin(), tr.x.end());
  const double tmin = *std::min_element(tr.x.begin(), tr.x.end());
  if (!(tmax > tmin)) throw FitError("decay fit needs distinct wait times");
  const double dt = (tmax - tmin) / static_cast<double>(n - 1);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / (tr.sigma[i] * tr.sigma[i]);

  // Coarse grid over the nonlinear parameters with the linear ones solved exactly.
  std::vector<double> f_grid{0.0};
  if (ramsey) {
    const double f_nyq = 0.5 / dt;
    const double df = 0.25 / (tmax - tmin);
    for (double f = df; f <= f_nyq; f += df) f_grid.push_back(f);
  }
  std::vector<double> t_grid;
  for (int i = 0; i < 40; ++i) t_grid.push_back(std::max(dt, 1e-15) * 0.5 * std::pow(40.0 * tmax / dt, i / 39.0));
  std::vector<double> e_grid{exp0};
  if (free_exp) e_grid = {1.0, 1.5, 2.0, 3.0};

  double best_chi = std::numeric_limits<double>::infinity();
  double bT = t_grid.front(), bF = 0.0, bE = exp0, bc0 = 0.0, bc1 = 0.0;
  std::vector<double> col(n);
  for (double f : f_grid)
    for (double T : t_grid)
      for (double e : e_grid) {
        for (std::size_t i = 0; i < n; ++i)
          col[i] = std::cos(2.0 * kPi * f * tr.x[i]) * std::exp(-std::pow(tr.x[i] / T, e));
        const Linear2 l = solve_linear2(tr.y, w, col);
        if (l.c1 > 0.0 && l.chi2 < best_chi) {
          best_chi = l.chi2;
          bT = T, bF = f, bE = e, bc0 = l.c0, bc1 = l.c1;
        }
      }
  if (!std::isfinite(best_chi)) {
    const Linear2 l = solve_linear2(tr.y, w, std::vector<double>(n, 0.0));
    bc0 = l.c0;
    bc1 = 0.0;
  }

  // Parameter layout: T, [exponent], [frequency], A, B. T is fitted in units of tmax.
  std::vector<std::string> names{"T2"};
  if (free_exp) names.push_back("exponent");
  if (ramsey) names.push_back("frequency");
  names.push_back("visibility");
  names.push_back("baseline");
  const int np = static_cast<int>(names.size());
  const int iE = free_exp ? 1 : -1;
  const int iF = ramsey ? (free_exp ? 2 : 1) : -1;
  const int iA = np - 2;
  const int iB = np - 1;
  const double fscale = ramsey ? 1.0 / (tmax - tmin) : 1.0;

  const auto unpack = [&](const Eigen::VectorXd& q, double& T, double& e, double& f, double& A, double& B) {
    T = q[0] * tmax;
    e = iE >= 0 ? q[iE] : exp0;
    f = iF >= 0 ? q[iF] * fscale : 0.0;
    A = q[iA];
    B = q[iB];
  };
  const auto residual = [&](const Eigen::VectorXd& q) {
    double T, e, f, A, B;
    unpack(q, T, e, f, A, B);
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double env = std::exp(-std::pow(tr.x[i] / T, e));
      const double osc = ramsey ? std::cos(2.0 * kPi * f * tr.x[i]) : 1.0;
      r[static_cast<Eigen::Index>(i)] = (B + 0.5 * A * (1.0 + osc * env) - tr.y[i]) / tr.sigma[i];
    }
    return r;
  };

  Eigen::VectorXd q0(np);
  q0[0] = bT / tmax;
  if (iE >= 0) q0[iE] = bE;
  if (iF >= 0) q0[iF] = bF / fscale;
  q0[iA] = 2.0 * bc1;
  q0[iB] = bc0 - bc1;
  lsq::Options lo;
  lo.max_iterations = opts.max_iterations;
  lo.lower = Eigen::VectorXd::Constant(np, -std::numeric_limits<double>::infinity());
  lo.upper = Eigen::VectorXd::Constant(np, std::numeric_limits<double>::infinity());
  (*lo.lower)[0] = 1e-3 * dt / tmax;
  (*lo.upper)[0] = 1e3;
  if (iE >= 0) {
    (*lo.lower)[iE] = 0.5;
    (*lo.upper)[iE] = 4.0;
  }
  if (iF >= 0) (*lo.lower)[iF] = 0.0;
  const lsq::Result res = lsq::levenberg_marquardt(residual, q0, lo);

  double T, e, f, A, B;
  unpack(res.params, T, e, f, A, B);
  const double sT = res.sigma(0) * tmax;
  for (int i = 0; i < np; ++i) {
    double v = res.params[i];
    double s = res.sigma(i);
    if (i == 0) v = T, s = sT;
    if (i == iF) v = f, s = s * fscale;
    out.params.push_back({names[static_cast<std::size_t>(i)], v, s});
  }
  if (!free_exp) out.params.insert(out.params.begin() + 1, FitResult::Param{"exponent", exp0, 0.0});
  if (!ramsey) out.params.push_back({"frequency", 0.0, 0.0});
  out.residual_rms = rms(res.residuals, tr.sigma);

  const double sA = res.sigma(iA);
  const bool amplitude_resolved = std::abs(A) > 3.0 * sA && std::isfinite(sA);
  const bool time_bounded = T < 20.0 * tmax && std::isfinite(sT) && sT < T;
  out.converged = res.converged && amplitude_resolved && time_bounded;
  if (!amplitude_resolved) out.note = "no resolvable decay amplitude";
  else if (!time_bounded) out.note = "decay time unbounded by the sampled window";
  else if (!res.converged) out.note = "solver did not converge";
  return out;
}

FitResult fit_decay(const RunRecord& record, DecayModel model, const DecayOptions& opts) {
  const bool ok = (model == DecayModel::Ramsey && record.kind == RunKind::Ramsey) ||
                  (model == DecayModel::Hahn && record.kind == RunKind::Hahn);
  if (!ok) throw ValidationError("record kind does not match the decay model");
  return fit_decay(Trace::from_record(record), model, opts);
}

FitResult fit_rabi(const Trace& tr) {
  const std::size_t n = tr.size();
  if (n < 6) throw FitError("Rabi fit needs at least 6 points");
  const double tmax = *std::max_element(tr.x.begin(), tr.x.end());
  const double tmin = *std::min_element(tr.x.begin(), tr.x.end());
  const double dt = (tmax - tmin) / static_cast<double>(n - 1);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / (tr.sigma[i] * tr.sigma[i]);
  const double df = 0.1 / (tmax - tmin);
  const double fmax = 0.5 / dt;
  double best = std::numeric_limits<double>::infinity();
  double bf = 0.0, b0 = 0.0, b1 = 0.0;
  std::vector<double> col(n);
  for (double f = df; f <= fmax; f += df) {
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::sin(kPi * f * tr.x[i]);
      col[i] = s * s;
    }
    const Linear2 l = solve_linear2(tr.y, w, col);
    if (l.chi2 < best) best = l.chi2, bf = f, b0 = l.c0, b1 = l.c1;
  }
  const double fs = 1.0 / (tmax - tmin);
  const auto residual = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::sin(kPi * q[0] * fs * tr.x[i]);
      r[static_cast<Eigen::Index>(i)] = (q[2] + q[1] * s * s - tr.y[i]) / tr.sigma[i];
    }
    return r;
  };
  Eigen::VectorXd q0(3);
  q0 << bf / fs, b1, b0;
  const lsq::Result res = lsq::levenberg_marquardt(residual, q0);
  FitResult out;
  out.params = {{"frequency", res.params[0] * fs, res.sigma(0) * fs},
                {"visibility", res.params[1], res.sigma(1)},
                {"baseline", res.params[2], res.sigma(2)}};
  out.residual_rms = rms(res.residuals, tr.sigma);
  out.converged = res.converged && std::abs(res.params[1]) > 3.0 * res.sigma(1);
  if (!out.converged) out.note = "no resolvable oscillation";
  return out;
}

FitResult fit_rabi(const RunRecord& record) {
  if (record.kind != RunKind::Rabi) throw ValidationError("fit_rabi needs a Rabi record");
  return fit_rabi(Trace::from_record(record));
}

}  // namespace maglab::virtlab
