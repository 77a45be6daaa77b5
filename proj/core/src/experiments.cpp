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

#include "maglab/experiments.hpp"

#include <algorithm>
#include <cmath>

namespace maglab::virtlab {

FieldVector World::field_at(const StagePosition& true_pos) const {
  return magnetics::total_field(solenoid, magnet.at(true_pos));
}

FieldVector World::field() const { return field_at(stage.state().true_pos); }

spin::LarmorPoint World::larmor() const { return spin::larmor_point(qubit, field()); }

void SpectroscopySweep::validate() const {
  if (drive_hz.empty()) throw ValidationError("spectroscopy sweep needs a non-empty frequency grid");
  if (!std::is_sorted(drive_hz.begin(), drive_hz.end())) throw ValidationError("frequency grid must be ascending");
  if (shots_per_point < 1) throw ValidationError("shots per point must be >= 1");
  if (!(pulse_duration_s > 0.0)) throw ValidationError("pulse duration must be positive");
  if (!(drive_amplitude >= 0.0)) throw ValidationError("drive amplitude must be non-negative");
  if (!(drive_decay_s > 0.0)) throw ValidationError("drive decay time must be positive");
}

SpectroscopySweep SpectroscopySweep::linear(double f_start_hz, double f_stop_hz, double step_hz) {
  if (!(step_hz > 0.0) || !(f_stop_hz > f_start_hz)) throw ValidationError("invalid spectroscopy grid");
  SpectroscopySweep s;
  const auto n = static_cast<int>(std::floor((f_stop_hz - f_start_hz) / step_hz + 1e-9)) + 1;
  s.drive_hz.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) s.drive_hz.push_back(f_start_hz + step_hz * i);
  return s;
}

double detuned_rabi(double f_r_hz, double delta_hz, double t_p_s, double tau_s) {
  const double omega2 = f_r_hz * f_r_hz + delta_hz * delta_hz;
  if (omega2 == 0.0) return 0.0;
  const double omega = std::sqrt(omega2);
  const double weight = f_r_hz * f_r_hz / omega2;
  if (!std::isfinite(tau_s)) {
    const double s = std::sin(kPi * omega * t_p_s);
    return weight * s * s;
  }
  return weight * 0.5 * (1.0 - std::cos(2.0 * kPi * omega * t_p_s) * std::exp(-t_p_s / tau_s));
}

std::vector<long> sample_counts(const std::vector<double>& p, long shots, std::mt19937_64& rng) {
  std::vector<long> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::binomial_distribution<long> dist(shots, std::clamp(p[i], 0.0, 1.0));
    out[i] = dist(rng);
  }
  return out;
}

namespace {

RunRecord base_record(const World& world, RunKind kind, long shots, std::uint64_t seed) {
  if (shots < 1) throw ValidationError("shots must be >= 1");
  RunRecord r;
  r.kind = kind;
  r.commanded = world.stage.state().commanded;
  r.true_pos = world.stage.state().true_pos;
  r.shots = shots;
  r.seed = seed;
  r.timestamp = iso8601_utc_now();
  return r;
}

void finish(RunRecord& r, const std::vector<double>& p, std::uint64_t seed, const PointSink& sink) {
  std::mt19937_64 rng(seed);
  r.counts = sample_counts(p, r.shots, rng);
  if (sink)
    for (std::size_t i = 0; i < r.counts.size(); ++i) sink(i, r.sweep[i], r.counts[i]);
}

void require_points(const std::vector<double>& xs, const char* what) {
  if (xs.empty()) throw ValidationError(std::string(what) + " must not be empty");
  for (double x : xs)
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError(std::string(what) + " must be finite and >= 0");
}

}  // namespace

RunRecord run_spectroscopy(const World& world, const SpectroscopySweep& sweep, std::uint64_t seed,
                           const PointSink& sink) {
  sweep.validate();
  RunRecord r = base_record(world, RunKind::Spectroscopy, sweep.shots_per_point, seed);
  const spin::LarmorPoint lp = world.larmor();
  const double f_r = spin::rabi_frequency(world.qubit, lp.f_l_hz, sweep.drive_amplitude, lp.theta_deg);
  const spin::Visibility vis = spin::readout_visibility(world.qubit, lp.theta_deg);
  r.sweep = sweep.drive_hz;
  std::vector<double> p(sweep.drive_hz.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double f = sweep.drive_hz[i];
    double v = vis.baseline + vis.amplitude * detuned_rabi(f_r, f - lp.f_l_hz, sweep.pulse_duration_s, sweep.drive_decay_s);
    if (world.resonator.enabled) {
      const double d = (f - world.resonator.frequency_hz) / world.resonator.hwhm_hz;
      v += world.resonator.amplitude / (1.0 + d * d);
    }
    p[i] = std::clamp(v, 0.0, 1.0);
  }
  r.params = {{"pulse_duration_s", sweep.pulse_duration_s},
              {"drive_amplitude", sweep.drive_amplitude},
              {"drive_decay_s", std::isfinite(sweep.drive_decay_s) ? nlohmann::json(sweep.drive_decay_s) : nlohmann::json()}};
  finish(r, p, seed, sink);
  return r;
}

RunRecord run_rabi(const World& world, const std::vector<double>& durations_s, double amplitude, long shots,
                   std::uint64_t seed, const PointSink& sink) {
  require_points(durations_s, "Rabi durations");
  RunRecord r = base_record(world, RunKind::Rabi, shots, seed);
  const spin::LarmorPoint lp = world.larmor();
  const double f_r = spin::rabi_frequency(world.qubit, lp.f_l_hz, amplitude, lp.theta_deg);
  const spin::Visibility vis = spin::readout_visibility(world.qubit, lp.theta_deg);
  r.sweep = durations_s;
  std::vector<double> p(durations_s.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double s = std::sin(kPi * f_r * durations_s[i]);
    p[i] = vis.baseline + vis.amplitude * s * s;
  }
  r.params = {{"amplitude", amplitude}, {"f_larmor_hz", lp.f_l_hz}};
  finish(r, p, seed, sink);
  return r;
}

RunRecord run_ramsey(const World& world, const std::vector<double>& t_wait_s, double detuning_hz, long shots,
                     std::uint64_t seed, double exponent, const PointSink& sink) {
  require_points(t_wait_s, "Ramsey wait times");
  RunRecord r = base_record(world, RunKind::Ramsey, shots, seed);
  const spin::LarmorPoint lp = world.larmor();
  const auto ct = spin::coherence_times(world.qubit, lp.theta_deg);
  const spin::Visibility vis = spin::readout_visibility(world.qubit, lp.theta_deg);
  r.sweep = t_wait_s;
  std::vector<double> p(t_wait_s.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double t = t_wait_s[i];
    const double env = std::exp(-std::pow(t / ct.t2_star_s, exponent));
    p[i] = vis.baseline + 0.5 * vis.amplitude * (1.0 + std::cos(2.0 * kPi * detuning_hz * t) * env);
  }
  r.params = {{"detuning_hz", detuning_hz}, {"exponent", exponent}};
  finish(r, p, seed, sink);
  return r;
}

RunRecord run_hahn_echo(const World& world, const std::vector<double>& t_wait_s, long shots, std::uint64_t seed,
                        double exponent, const PointSink& sink) {
  require_points(t_wait_s, "echo wait times");
  RunRecord r = base_record(world, RunKind::Hahn, shots, seed);
  const spin::LarmorPoint lp = world.larmor();
  const auto ct = spin::coherence_times(world.qubit, lp.theta_deg);
  const spin::Visibility vis = spin::readout_visibility(world.qubit, lp.theta_deg);
  r.sweep = t_wait_s;
  std::vector<double> p(t_wait_s.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double env = std::exp(-std::pow(t_wait_s[i] / ct.t2_hahn_s, exponent));
    p[i] = vis.baseline + 0.5 * vis.amplitude * (1.0 + env);
  }
  r.params = {{"exponent", exponent}};
  finish(r, p, seed, sink);
  return r;
}

std::vector<double> linspace(double a, double b, int n) {
  if (n < 1) return {};
  if (n == 1) return {a};
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  out.back() = b;
  return out;
}

std::vector<int> logspace_int(int a, int b, int n) {
  std::vector<int> out;
  if (a < 1 || b < a || n < 1) return out;
  for (int i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    const int v = static_cast<int>(std::lround(std::exp(std::log(a) + t * (std::log(b) - std::log(a)))));
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(master ^ h) + index);
}

}  // namespace maglab::virtlab
