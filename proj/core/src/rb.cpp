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

#include "maglab/rb.hpp"

#include "maglab/experiments.hpp"
#include "maglab/lsq.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace maglab::virtlab {
namespace {

using cd = std::complex<double>;

std::vector<NativeGate> parse_pulses(const std::string& s) {
  std::vector<NativeGate> out;
  for (char c : s) out.push_back(c == 'X' ? NativeGate::X90 : NativeGate::Y90);
  return out;
}

Matrix2c product(const std::vector<NativeGate>& seq) {
  Matrix2c u = Matrix2c::Identity();
  for (NativeGate g : seq) u = native_unitary(g) * u;
  return u;
}

std::vector<CliffordElement> build_table() {
  // Pulses listed in temporal order. Families follow the usual grouping.
  struct Row {
    const char* family;
    const char* pulses;
  };
  static constexpr Row rows[] = {
      {"Pauli I", ""},
      {"Pauli pi", "XX"},
      {"Pauli pi", "YY"},
      {"Pauli pi", "YYXX"},
      {"2pi/3", "XY"},
      {"2pi/3", "XYYY"},
      {"2pi/3", "XXXY"},
      {"2pi/3", "YYXY"},
      {"2pi/3", "YX"},
      {"2pi/3", "YXXX"},
      {"2pi/3", "YYYX"},
      {"2pi/3", "YXYY"},
      {"pi/2", "X"},
      {"pi/2", "XXX"},
      {"pi/2", "Y"},
      {"pi/2", "YYY"},
      {"pi/2", "YXYYY"},
      {"pi/2", "YYYXY"},
      {"Hadamard-like", "XXY"},
      {"Hadamard-like", "YXX"},
      {"Hadamard-like", "YYX"},
      {"Hadamard-like", "XYY"},
      {"Hadamard-like", "YXY"},
      {"Hadamard-like", "YXXXY"},
  };
  std::vector<CliffordElement> table;
  for (const Row& r : rows) {
    CliffordElement e;
    e.family = r.family;
    e.sequence = parse_pulses(r.pulses);
    e.unitary = product(e.sequence);
    table.push_back(std::move(e));
  }
  return table;
}

std::vector<std::size_t> build_inverse() {
  const auto& t = clifford_table();
  std::vector<std::size_t> inv(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto j = find_clifford(t[i].unitary.adjoint());
    if (!j) throw std::logic_error("Clifford table is not closed under inversion");
    inv[i] = *j;
  }
  return inv;
}

}  // namespace

Matrix2c native_unitary(NativeGate g) {
  const double s = 1.0 / std::sqrt(2.0);
  Matrix2c u;
  if (g == NativeGate::X90)
    u << cd(s, 0), cd(0, -s), cd(0, -s), cd(s, 0);
  else
    u << cd(s, 0), cd(-s, 0), cd(s, 0), cd(s, 0);
  return u;
}

std::string CliffordElement::label() const {
  if (sequence.empty()) return "I";
  std::string s;
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    if (i) s += ' ';
    s += sequence[i] == NativeGate::X90 ? "X90" : "Y90";
  }
  return s;
}

const std::vector<CliffordElement>& clifford_table() {
  static const std::vector<CliffordElement> table = build_table();
  return table;
}

double table_mean_native_gates() {
  const auto& t = clifford_table();
  double n = 0.0;
  for (const auto& e : t) n += static_cast<double>(e.sequence.size());
  return n / static_cast<double>(t.size());
}

bool equal_up_to_phase(const Matrix2c& a, const Matrix2c& b, double tol) {
  return std::abs(std::abs((a.adjoint() * b).trace()) / 2.0 - 1.0) <= tol;
}

std::optional<std::size_t> find_clifford(const Matrix2c& u) {
  const auto& t = clifford_table();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (equal_up_to_phase(t[i].unitary, u, 1e-9)) return i;
  return std::nullopt;
}

std::size_t clifford_inverse(std::size_t i) {
  static const std::vector<std::size_t> inv = build_inverse();
  return inv.at(i);
}

std::vector<NativeGate> RbSequence::native_gates() const {
  std::vector<NativeGate> out;
  const auto& t = clifford_table();
  for (std::size_t c : cliffords) out.insert(out.end(), t[c].sequence.begin(), t[c].sequence.end());
  return out;
}

RbSequence rb_generate(std::uint64_t seed, int n_clifford) {
  if (n_clifford < 1) throw ValidationError("RB sequence needs at least one Clifford");
  const auto& t = clifford_table();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, t.size() - 1);
  RbSequence seq;
  Matrix2c total = Matrix2c::Identity();
  for (int i = 0; i < n_clifford; ++i) {
    const std::size_t c = pick(rng);
    seq.cliffords.push_back(c);
    total = t[c].unitary * total;
  }
  const auto idx = find_clifford(total);
  if (!idx) throw std::logic_error("sequence product left the Clifford group");
  seq.cliffords.push_back(clifford_inverse(*idx));
  return seq;
}

double depolarizing_from_fidelity(double f_native) { return 2.0 * (1.0 - f_native); }

RbShot rb_simulate(const RbSequence& seq, double p_dep, long shots, double visibility, std::mt19937_64& rng,
                   double baseline) {
  if (!(p_dep >= 0.0 && p_dep <= 1.0)) throw ValidationError("depolarizing strength must lie in [0, 1]");
  if (shots < 1) throw ValidationError("shots must be >= 1");
  Matrix2c rho = Matrix2c::Zero();
  rho(0, 0) = 1.0;
  const Matrix2c x90 = native_unitary(NativeGate::X90);
  const Matrix2c y90 = native_unitary(NativeGate::Y90);
  const Matrix2c mixed = 0.5 * Matrix2c::Identity();
  for (NativeGate g : seq.native_gates()) {
    const Matrix2c& u = g == NativeGate::X90 ? x90 : y90;
    rho = u * rho * u.adjoint();
    rho = (1.0 - p_dep) * rho + p_dep * mixed;
  }
  RbShot out;
  out.survival = std::clamp(rho(0, 0).real(), 0.0, 1.0);
  out.p_blockade = std::clamp(baseline + visibility * out.survival, 0.0, 1.0);
  std::binomial_distribution<long> dist(shots, out.p_blockade);
  out.counts = dist(rng);
  return out;
}

RbFit rb_fit(const std::vector<double>& lengths, const std::vector<double>& survivals, const RbFitOptions& opts) {
  const std::size_t n = lengths.size();
  if (n != survivals.size()) throw ValidationError("lengths and survivals differ in size");
  std::vector<double> distinct = lengths;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 4) throw FitError("RB fit needs at least 4 distinct lengths");
  std::vector<double> sig = opts.sigmas.empty() ? std::vector<double>(n, 1.0) : opts.sigmas;
  if (sig.size() != n) throw ValidationError("sigmas must match lengths");
  for (double& s : sig) s = std::max(s, 1e-9);
  const bool fixed_b = opts.fixed_asymptote.has_value();
  const double b_fixed = opts.fixed_asymptote.value_or(0.0);

  // Grid over alpha with the linear parameters solved exactly; alpha = 1 wins ties.
  std::vector<double> alphas{1.0};
  for (int k = 0; k < 240; ++k) alphas.push_back(1.0 - std::exp(std::log(1e-8) + k * (std::log(0.6) - std::log(1e-8)) / 239.0));
  double best_chi = std::numeric_limits<double>::infinity();
  double bA = 0.0, bAlpha = 1.0, bB = b_fixed;
  for (double a : alphas) {
    double s = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 1.0 / (sig[i] * sig[i]);
      const double x = std::pow(a, lengths[i]);
      const double y = survivals[i] - (fixed_b ? b_fixed : 0.0);
      s += w, sx += w * x, sxx += w * x * x, sy += w * y, sxy += w * x * y;
    }
    double A, B = b_fixed;
    if (fixed_b) {
      A = sxy / sxx;
    } else {
      const double det = s * sxx - sx * sx;
      if (std::abs(det) < 1e-12 * s * sxx) {
        A = 0.0;
        B = sy / s;
      } else {
        A = (s * sxy - sx * sy) / det;
        B = (sy - A * sx) / s;
      }
    }
    double chi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = (A * std::pow(a, lengths[i]) + B - survivals[i]) / sig[i];
      chi += r * r;
    }
    if (chi < best_chi * (1.0 - 1e-12) - 1e-300) best_chi = chi, bA = A, bAlpha = a, bB = B;
  }

  const int np = fixed_b ? 2 : 3;
  const auto residual = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    const double B = fixed_b ? b_fixed : q[2];
    for (std::size_t i = 0; i < n; ++i)
      r[static_cast<Eigen::Index>(i)] = (q[0] * std::pow(q[1], lengths[i]) + B - survivals[i]) / sig[i];
    return r;
  };
  const auto jacobian = [&](const Eigen::VectorXd& q) {
    Eigen::MatrixXd J(static_cast<Eigen::Index>(n), np);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double L = lengths[i];
      J(ii, 0) = std::pow(q[1], L) / sig[i];
      J(ii, 1) = L == 0.0 ? 0.0 : q[0] * L * std::pow(q[1], L - 1.0) / sig[i];
      if (!fixed_b) J(ii, 2) = 1.0 / sig[i];
    }
    return J;
  };
  Eigen::VectorXd q0(np);
  q0[0] = bA;
  q0[1] = bAlpha;
  if (!fixed_b) q0[2] = bB;
  lsq::Options lo;
  lo.lower = Eigen::VectorXd::Constant(np, -std::numeric_limits<double>::infinity());
  lo.upper = Eigen::VectorXd::Constant(np, std::numeric_limits<double>::infinity());
  (*lo.lower)[1] = 1e-6;
  (*lo.upper)[1] = 1.5;
  lo.absolute_sigma = !opts.sigmas.empty();
  const lsq::Result res = lsq::levenberg_marquardt(residual, q0, lo, jacobian);

  RbFit out;
  out.alpha = res.params[1];
  out.alpha_sigma = res.singular ? 0.0 : res.sigma(1);
  if (!std::isfinite(out.alpha_sigma)) out.alpha_sigma = 0.0;
  out.f_clifford = 1.0 - (1.0 - out.alpha) / 2.0;
  out.f_clifford_sigma = out.alpha_sigma / 2.0;
  out.f_native = 1.0 - (1.0 - out.f_clifford) / opts.native_gates_per_clifford;
  out.f_native_sigma = out.f_clifford_sigma / opts.native_gates_per_clifford;
  out.physical = out.alpha > 0.0 && out.alpha <= 1.0;
  out.fit.params = {{"A", res.params[0], res.singular ? 0.0 : res.sigma(0)},
                    {"alpha", out.alpha, out.alpha_sigma},
                    {"B", fixed_b ? b_fixed : res.params[2], fixed_b || res.singular ? 0.0 : res.sigma(2)},
                    {"F_C", out.f_clifford, out.f_clifford_sigma},
                    {"F_N", out.f_native, out.f_native_sigma}};
  double ss = 0.0;
  for (Eigen::Index i = 0; i < res.residuals.size(); ++i) {
    const double r = res.residuals[i] * sig[static_cast<std::size_t>(i)];
    ss += r * r;
  }
  out.fit.residual_rms = std::sqrt(ss / static_cast<double>(n));
  out.fit.converged = res.converged;
  if (!out.physical) out.fit.note = "alpha outside (0, 1]: unphysical";
  return out;
}

RbData run_rb(const RbExperiment& exp, std::uint64_t seed) {
  if (exp.lengths.empty()) throw ValidationError("RB needs at least one length");
  if (exp.randomizations < 1) throw ValidationError("RB needs at least one randomization");
  RbData d;
  for (std::size_t li = 0; li < exp.lengths.size(); ++li) {
    const int L = exp.lengths[li];
    std::vector<long> counts;
    double sum = 0.0, sum2 = 0.0;
    for (int r = 0; r < exp.randomizations; ++r) {
      const std::uint64_t s = derive_seed(seed, "rb", static_cast<std::uint64_t>(li) * 100003u + static_cast<std::uint64_t>(r));
      const RbSequence seq = rb_generate(s, L);
      std::mt19937_64 rng(splitmix64(s));
      const RbShot shot = rb_simulate(seq, exp.p_dep, exp.shots, exp.visibility, rng, exp.baseline);
      counts.push_back(shot.counts);
      const double p = static_cast<double>(shot.counts) / static_cast<double>(exp.shots);
      sum += p;
      sum2 += p * p;
    }
    const double R = exp.randomizations;
    const double mean = sum / R;
    const double var = R > 1 ? std::max(0.0, (sum2 - R * mean * mean) / (R - 1.0)) : mean * (1 - mean) / exp.shots;
    d.lengths.push_back(L);
    d.mean_p.push_back(mean);
    const double binom = std::sqrt(std::max(mean * (1.0 - mean), 0.25 / static_cast<double>(exp.shots)) /
                                   (static_cast<double>(exp.shots) * R));
    d.sem_p.push_back(std::max(std::sqrt(var / R), binom));
    d.counts.push_back(std::move(counts));
  }
  return d;
}

}  // namespace maglab::virtlab
