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

#include "maglab/run_record.hpp"

#include <optional>
#include <string>
#include <vector>

namespace maglab::virtlab {

/// Parameter estimates with 1-sigma uncertainties.
///
/// `converged == false` means the estimates must not be used; callers check
/// `usable()` rather than inspecting individual numbers.
struct FitResult {
  struct Param {
    std::string name;
    double value;
    double sigma;
  };
  std::vector<Param> params;
  double residual_rms = 0.0;
  bool converged = false;
  std::string note;

  bool usable() const { return converged; }
  double value(const std::string& name) const;
  double sigma(const std::string& name) const;
  bool has(const std::string& name) const;
};

/// A sampled trace prepared for fitting: x, y and per-point standard errors.
struct Trace {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> sigma;

  /// Binomial standard errors from shot counts, floored at half a count.
  static Trace from_record(const RunRecord& r);
  std::size_t size() const { return x.size(); }
};

// --- Resonance -------------------------------------------------------------

enum class Lineshape { DetunedRabi, Lorentzian };

struct ResonanceOptions {
  Lineshape lineshape = Lineshape::DetunedRabi;
  /// Detection threshold in units of the smoothed noise floor.
  double threshold_sigma = 6.0;
  int max_peaks = 3;
  /// Known fixed lines (e.g. the readout resonator) never selected as f_L.
  std::vector<double> exclude_hz;
  double exclude_tolerance_hz = 1.0e6;
};

struct Peak {
  double center_hz;
  double center_sigma_hz;
  double width_hz;
  double amplitude;
  double baseline;
  bool converged;
};

struct ResonanceFit {
  bool detected = false;
  /// Peaks sorted by descending amplitude.
  std::vector<Peak> peaks;
  /// Index into `peaks` of the qubit line, if any.
  std::optional<std::size_t> selected;
  /// Parameters of the selected peak: f_l, width, amplitude, baseline.
  FitResult fit;
  double noise_floor = 0.0;

  std::optional<double> f_l() const;
};

/// Detects peaks above the noise floor and fits each with the lineshape.
/// Returns detected == false (not an exception) when nothing stands out.
ResonanceFit fit_resonance(const RunRecord& record, const ResonanceOptions& opts = {});

/// For a series of spectroscopy fits taken at different magnet positions,
/// discards lines whose centre does not move and returns the moving (qubit)
/// line at each position.
std::vector<std::optional<double>> track_moving_peak(const std::vector<ResonanceFit>& fits,
                                                     double stability_tol_hz = 0.5e6);

// --- Decays ----------------------------------------------------------------

enum class DecayModel { Ramsey, Hahn };

struct DecayOptions {
  /// Free the envelope exponent. Defaults: fixed at 2 for Ramsey, free for Hahn.
  std::optional<bool> free_exponent;
  std::optional<double> exponent;
  int max_iterations = 200;
};

/// Weighted fit of
///   Ramsey: P = B + (A/2) [1 + cos(2 pi df t) exp(-(t/T)^p)]
///   Hahn:   P = B + (A/2) [1 + exp(-(t/T)^q)]
/// Parameter names: T2, exponent, frequency (Ramsey), visibility, baseline.
FitResult fit_decay(const Trace& trace, DecayModel model, const DecayOptions& opts = {});
FitResult fit_decay(const RunRecord& record, DecayModel model, const DecayOptions& opts = {});

// --- Rabi ------------------------------------------------------------------

/// Fit P = B + V sin^2(pi f t). Parameter names: frequency, visibility, baseline.
FitResult fit_rabi(const Trace& trace);
FitResult fit_rabi(const RunRecord& record);

}  // namespace maglab::virtlab
