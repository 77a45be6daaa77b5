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

#include "maglab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace maglab::calibrate {

using nlohmann::json;
using virtlab::format_double;
using virtlab::Lab;

// --- checks ------------------------------------------------------------------

bool Check::evaluate(double v) const {
  if (!std::isfinite(v)) return false;
  if (op == "near_rel") return std::abs(v - target) <= tol * std::abs(target);
  if (op == "near_abs") return std::abs(v - target) <= tol;
  if (op == "le") return v <= target;
  if (op == "ge") return v >= target;
  if (op == "eq") return std::abs(v - target) <= tol;
  throw ValidationError("unknown check operator '" + op + "'");
}

std::string Check::describe() const {
  std::ostringstream os;
  os << metric << ' ' << op << ' ' << format_double(target);
  if (op == "near_rel" || op == "near_abs" || (op == "eq" && tol > 0.0)) os << " tol " << format_double(tol);
  return os.str();
}

// --- JSON --------------------------------------------------------------------

namespace {

json plan_json(const SpectroscopyPlan& p) {
  return {{"f_start_hz", p.f_start_hz}, {"f_stop_hz", p.f_stop_hz}, {"f_step_hz", p.f_step_hz},
          {"pulse_s", p.pulse_s},       {"decay_s", p.decay_s},     {"amplitude", p.amplitude},
          {"shots", p.shots}};
}

json time_json(const TimePlan& p) {
  return {{"t_max_s", p.t_max_s},
          {"points", p.points},
          {"shots", p.shots},
          {"detuning_hz", p.detuning_hz},
          {"amplitude", p.amplitude}};
}

template <class T>
void take(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("bad value for '") + key + "' in " + where);
  }
}

void plan_from(const json& j, SpectroscopyPlan& p, const std::string& where) {
  require_known_keys(j, {"f_start_hz", "f_stop_hz", "f_step_hz", "pulse_s", "decay_s", "amplitude", "shots"}, where);
  take(j, "f_start_hz", p.f_start_hz, where);
  take(j, "f_stop_hz", p.f_stop_hz, where);
  take(j, "f_step_hz", p.f_step_hz, where);
  take(j, "pulse_s", p.pulse_s, where);
  if (j.contains("decay_s") && j["decay_s"].is_null()) p.decay_s = std::numeric_limits<double>::infinity();
  else take(j, "decay_s", p.decay_s, where);
  take(j, "amplitude", p.amplitude, where);
  take(j, "shots", p.shots, where);
}

void time_from(const json& j, TimePlan& p, const std::string& where) {
  require_known_keys(j, {"t_max_s", "points", "shots", "detuning_hz", "amplitude"}, where);
  take(j, "t_max_s", p.t_max_s, where);
  take(j, "points", p.points, where);
  take(j, "shots", p.shots, where);
  take(j, "detuning_hz", p.detuning_hz, where);
  take(j, "amplitude", p.amplitude, where);
}

Axis axis_from(const json& j, const char* key, Axis fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) throw ValidationError(std::string("bad value for '") + key + "' in " + where);
  return parse_axis(j[key].get<std::string>());
}

}  // namespace

json to_json(const ScenarioDef& s) {
  json checks = json::array();
  for (const auto& c : s.checks)
    checks.push_back({{"metric", c.metric}, {"op", c.op}, {"target", c.target}, {"tol", c.tol}});
  return {{"kind", s.kind},
          {"description", s.description},
          {"qubit", s.qubit},
          {"solenoid_t", s.solenoid_t},
          {"base_mm", {s.base.x, s.base.y, s.base.z}},
          {"compensate", s.compensate},
          {"axis", axis_name(s.axis)},
          {"start_mm", s.start_mm},
          {"stop_mm", s.stop_mm},
          {"points", s.points},
          {"axis2", axis_name(s.axis2)},
          {"start2_mm", s.start2_mm},
          {"stop2_mm", s.stop2_mm},
          {"points2", s.points2},
          {"radius_mm", s.radius_mm},
          {"circle_points", s.circle_points},
          {"range_mm", {s.range_lo_mm, s.range_hi_mm}},
          {"budget", s.budget},
          {"half_width_mm", s.half_width_mm},
          {"repeats", s.repeats},
          {"spectroscopy", plan_json(s.spectroscopy)},
          {"ramsey", time_json(s.ramsey)},
          {"hahn", time_json(s.hahn)},
          {"rabi", time_json(s.rabi)},
          {"rb",
           {{"lengths", s.rb.lengths},
            {"randomizations", s.rb.randomizations},
            {"shots", s.rb.shots},
            {"f_native", s.rb.f_native},
            {"fixed_asymptote", s.rb.fixed_asymptote}}},
          {"profile_z_mm", s.profile_z_mm},
          {"profile_csv", s.profile_csv},
          {"checks", checks}};
}

ScenarioDef scenario_from_json(const json& j, ScenarioDef s) {
  const std::string where = "scenario " + (s.name.empty() ? std::string("<unnamed>") : s.name);
  require_known_keys(j,
                     {"kind", "description", "qubit", "solenoid_t", "base_mm", "compensate", "axis", "start_mm",
                      "stop_mm", "points", "axis2", "start2_mm", "stop2_mm", "points2", "radius_mm", "circle_points",
                      "range_mm", "budget", "half_width_mm", "repeats", "spectroscopy", "ramsey", "hahn", "rabi", "rb",
                      "profile_z_mm", "profile_csv", "checks"},
                     where);
  take(j, "kind", s.kind, where);
  take(j, "description", s.description, where);
  take(j, "qubit", s.qubit, where);
  take(j, "solenoid_t", s.solenoid_t, where);
  if (j.contains("base_mm")) {
    std::vector<double> b;
    take(j, "base_mm", b, where);
    if (b.size() != 3) throw ValidationError(where + ": base_mm needs three values");
    s.base = {b[0], b[1], b[2]};
  }
  take(j, "compensate", s.compensate, where);
  s.axis = axis_from(j, "axis", s.axis, where);
  take(j, "start_mm", s.start_mm, where);
  take(j, "stop_mm", s.stop_mm, where);
  take(j, "points", s.points, where);
  s.axis2 = axis_from(j, "axis2", s.axis2, where);
  take(j, "start2_mm", s.start2_mm, where);
  take(j, "stop2_mm", s.stop2_mm, where);
  take(j, "points2", s.points2, where);
  take(j, "radius_mm", s.radius_mm, where);
  take(j, "circle_points", s.circle_points, where);
  if (j.contains("range_mm")) {
    std::vector<double> r;
    take(j, "range_mm", r, where);
    if (r.size() != 2) throw ValidationError(where + ": range_mm needs two values");
    s.range_lo_mm = std::min(r[0], r[1]);
    s.range_hi_mm = std::max(r[0], r[1]);
  }
  take(j, "budget", s.budget, where);
  take(j, "half_width_mm", s.half_width_mm, where);
  take(j, "repeats", s.repeats, where);
  if (j.contains("spectroscopy")) plan_from(j["spectroscopy"], s.spectroscopy, where + ".spectroscopy");
  if (j.contains("ramsey")) time_from(j["ramsey"], s.ramsey, where + ".ramsey");
  if (j.contains("hahn")) time_from(j["hahn"], s.hahn, where + ".hahn");
  if (j.contains("rabi")) time_from(j["rabi"], s.rabi, where + ".rabi");
  if (j.contains("rb")) {
    const json& r = j["rb"];
    require_known_keys(r, {"lengths", "randomizations", "shots", "f_native", "fixed_asymptote"}, where + ".rb");
    take(r, "lengths", s.rb.lengths, where);
    take(r, "randomizations", s.rb.randomizations, where);
    take(r, "shots", s.rb.shots, where);
    take(r, "f_native", s.rb.f_native, where);
    take(r, "fixed_asymptote", s.rb.fixed_asymptote, where);
  }
  take(j, "profile_z_mm", s.profile_z_mm, where);
  take(j, "profile_csv", s.profile_csv, where);
  if (j.contains("checks")) {
    if (!j["checks"].is_array()) throw ValidationError(where + ": checks must be an array");
    s.checks.clear();
    for (const auto& c : j["checks"]) {
      require_known_keys(c, {"metric", "op", "target", "tol"}, where + ".checks");
      Check ck;
      take(c, "metric", ck.metric, where);
      take(c, "op", ck.op, where);
      take(c, "target", ck.target, where);
      take(c, "tol", ck.tol, where);
      s.checks.push_back(ck);
    }
  }
  return s;
}

void ScenarioDef::validate() const {
  static const char* kinds[] = {"field_profile",   "line",       "map",      "circle",           "sweet_spot",
                                "coherence_sweep", "coherence_point", "hysteresis", "drive_efficiency", "rb"};
  if (std::find_if(std::begin(kinds), std::end(kinds), [&](const char* k) { return kind == k; }) == std::end(kinds))
    throw ValidationError("scenario " + name + ": unknown kind '" + kind + "'");
  magnetics::SolenoidSpec sol;
  sol.setpoint_t = solenoid_t;
  sol.validate();
  if (points < 2 || (kind == "map" && points2 < 2)) throw ValidationError("scenario " + name + ": too few points");
  if (kind == "circle" && (circle_points < 3 || !(radius_mm > 0.0)))
    throw ValidationError("scenario " + name + ": circle needs radius > 0 and at least 3 points");
  if (repeats < 1) throw ValidationError("scenario " + name + ": repeats must be positive");
  if (spectroscopy.f_step_hz <= 0.0 || spectroscopy.f_stop_hz <= spectroscopy.f_start_hz)
    throw ValidationError("scenario " + name + ": bad spectroscopy window");
  for (const auto& c : checks) {
    if (c.metric.empty()) throw ValidationError("scenario " + name + ": check without metric");
    if (c.op != "near_rel" && c.op != "near_abs" && c.op != "le" && c.op != "ge" && c.op != "eq")
      throw ValidationError("scenario " + name + ": unknown check operator '" + c.op + "'");
  }
}

// --- registry ----------------------------------------------------------------

namespace {

json chk(const char* metric, const char* op, double target, double tol = 0.0) {
  return {{"metric", metric}, {"op", op}, {"target", target}, {"tol", tol}};
}

std::map<std::string, json> make_builtins() {
  std::map<std::string, json> m;
  const json q8_window = {{"f_start_hz", 40e6}, {"f_stop_hz", 140e6}, {"f_step_hz", 0.05e6}, {"amplitude", 1.0}};
  const json q3_window = {{"f_start_hz", 4e6}, {"f_stop_hz", 60e6}, {"f_step_hz", 0.05e6}, {"amplitude", 2.0}};

  m["fig1d_profile"] = {{"kind", "field_profile"},
                        {"description", "axial field profile and remanence calibration"},
                        {"checks", {chk("b_160_mt", "near_rel", 6.2, 0.02)}}};

  m["fig2_bin5mT"] = {{"kind", "line"},
                      {"description", "x sweep at 5 mT internal field"},
                      {"solenoid_t", 0.005},
                      {"start_mm", 0.0},
                      {"stop_mm", -250.0},
                      {"points", 26},
                      {"spectroscopy", {{"f_start_hz", 5e6}, {"f_stop_hz", 140e6}, {"f_step_hz", 0.05e6}, {"amplitude", 2.0}}},
                      {"checks",
                       {chk("n_detected", "eq", 26), chk("n_minima", "eq", 1), chk("n_maxima", "eq", 1),
                        chk("interior_min", "eq", 1)}}};

  m["fig2_bin50mT"] = {{"kind", "line"},
                       {"description", "x sweep at 50 mT internal field"},
                       {"solenoid_t", 0.05},
                       {"start_mm", 0.0},
                       {"stop_mm", -250.0},
                       {"points", 26},
                       {"spectroscopy", {{"f_start_hz", 100e6}, {"f_stop_hz", 280e6}, {"f_step_hz", 0.1e6}}},
                       {"checks",
                        {chk("n_detected", "eq", 26), chk("n_minima", "eq", 1), chk("n_maxima", "eq", 0),
                         chk("interior_min", "eq", 1)}}};

  m["fig3_xz"] = {{"kind", "map"},
                  {"description", "Larmor map over x and z at 25 mT"},
                  {"start_mm", 0.0},
                  {"stop_mm", -250.0},
                  {"points", 26},
                  {"axis2", "z"},
                  {"start2_mm", -160.0},
                  {"stop2_mm", -300.0},
                  {"points2", 15},
                  {"spectroscopy", {{"f_start_hz", 40e6}, {"f_stop_hz", 170e6}, {"f_step_hz", 0.1e6}}},
                  {"checks",
                   {chk("n_detected", "eq", 390), chk("f_max_mhz", "near_rel", 150.0, 0.1),
                    chk("f_min_mhz", "ge", 45.0)}}};

  m["fig3_xy"] = {{"kind", "map"},
                  {"description", "Larmor map over x and y at 25 mT, with g-tensor fit"},
                  {"start_mm", 0.0},
                  {"stop_mm", -250.0},
                  {"points", 26},
                  {"axis2", "y"},
                  {"start2_mm", 100.0},
                  {"stop2_mm", -100.0},
                  {"points2", 21},
                  {"spectroscopy", {{"f_start_hz", 40e6}, {"f_stop_hz", 170e6}, {"f_step_hz", 0.1e6}}},
                  {"checks",
                   {chk("n_detected", "eq", 546), chk("f_min_mhz", "near_rel", 50.0, 0.1),
                    chk("f_max_mhz", "le", 165.0), chk("gfit_underdetermined", "eq", 0),
                    chk("gfit_rel_rms", "le", 0.005)}}};

  m["fig4_sweet_spot"] = {{"kind", "sweet_spot"},
                          {"description", "sweet-spot search and coherence around it at 25 mT"},
                          {"range_mm", {-120.0, 0.0}},
                          {"budget", 60},
                          {"half_width_mm", 6.0},
                          {"points", 25},
                          {"ramsey", {{"shots", 4000}}},
                          {"spectroscopy", q8_window},
                          {"checks",
                           {chk("probes", "le", 60), chk("abs_residual_angle_deg", "le", 0.1),
                            chk("x_star_fmin_error_mm", "le", 1.0), chk("t2_star_us", "near_rel", 13.41, 0.1),
                            chk("t2_hahn_us", "near_rel", 88.77, 0.15), chk("colocation_mm", "le", 2.0),
                            chk("t2_star_truth_ratio", "ge", 0.95)}}};

  m["supp1_q3"] = {{"kind", "coherence_sweep"},
                   {"description", "coherence of the second qubit along x at 25 mT"},
                   {"qubit", "Q3"},
                   {"start_mm", -44.0},
                   {"stop_mm", -84.0},
                   {"points", 21},
                   {"spectroscopy", {{"f_start_hz", 20e6}, {"f_stop_hz", 120e6}, {"f_step_hz", 0.05e6}, {"amplitude", 2.0}}},
                   {"checks", {chk("n_detected", "eq", 21), chk("colocation_mm", "le", 2.0)}}};

  m["supp2_no_magnet"] = {{"kind", "coherence_point"},
                          {"description", "coherence with the magnet retracted to 700 mm"},
                          {"base_mm", {0.0, 0.0, -700.0}},
                          {"spectroscopy", {{"f_start_hz", 100e6}, {"f_stop_hz", 160e6}, {"f_step_hz", 0.05e6}}},
                          {"ramsey", {{"t_max_s", 8e-6}, {"points", 161}, {"shots", 500}, {"detuning_hz", 1.5e6}}},
                          {"hahn", {{"t_max_s", 20e-6}, {"points", 81}, {"shots", 500}}},
                          {"checks",
                           {chk("t2_star_us", "near_rel", 1.70, 0.15), chk("t2_hahn_us", "near_rel", 4.23, 0.15)}}};

  m["supp3_drive_efficiency"] = {{"kind", "drive_efficiency"},
                                 {"description", "Rabi drive efficiency and T2* along x at 25 mT"},
                                 {"start_mm", -20.0},
                                 {"stop_mm", -110.0},
                                 {"points", 19},
                                 {"spectroscopy", q8_window},
                                 {"checks", {chk("n_detected", "eq", 19), chk("colocation_mm", "le", 5.0)}}};

  m["fig5_zero_field_z"] = {{"kind", "line"},
                            {"description", "z sweep with the internal field off"},
                            {"qubit", "Q3"},
                            {"solenoid_t", 0.0},
                            {"base_mm", {0.0, 0.0, -160.0}},
                            {"axis", "z"},
                            {"start_mm", -160.0},
                            {"stop_mm", -260.0},
                            {"points", 26},
                            {"spectroscopy", q3_window},
                            {"checks",
                             {chk("n_detected", "eq", 26), chk("f_start_mhz", "near_rel", 40.0, 0.2),
                              chk("f_end_mhz", "near_rel", 10.0, 0.2)}}};

  m["fig5_zero_field_x"] = {{"kind", "line"},
                            {"description", "x sweep with the internal field off"},
                            {"qubit", "Q3"},
                            {"solenoid_t", 0.0},
                            {"base_mm", {0.0, 0.0, -160.0}},
                            {"start_mm", 0.0},
                            {"stop_mm", -10.0},
                            {"points", 51},
                            {"spectroscopy", q3_window},
                            {"checks",
                             {chk("n_detected", "eq", 51), chk("f_start_mhz", "near_rel", 40.0, 0.2),
                              chk("f_min_mhz", "near_rel", 10.0, 0.2), chk("interior_min", "eq", 1),
                              chk("n_minima", "eq", 1)}}};

  m["fig5c_circle"] = {{"kind", "circle"},
                       {"description", "circular xy path with the internal field off"},
                       {"qubit", "Q3"},
                       {"solenoid_t", 0.0},
                       {"base_mm", {0.0, 0.0, -200.0}},
                       {"radius_mm", 5.0},
                       {"circle_points", 37},
                       {"spectroscopy", q3_window},
                       {"checks",
                        {chk("n_detected", "eq", 37), chk("start_x_mm", "near_abs", 5.0, 1e-9),
                         chk("closure_mhz", "le", 0.2)}}};

  m["supp6_hysteresis"] = {{"kind", "hysteresis"},
                           {"description", "three uncompensated 51-point runs plus a compensated control"},
                           {"compensate", false},
                           {"start_mm", -10.0},
                           {"stop_mm", -60.0},
                           {"points", 51},
                           {"repeats", 3},
                           {"spectroscopy", q8_window},
                           {"checks",
                            {chk("offset_per_run_mm", "near_abs", 2.5, 0.05), chk("compensated_residual_mm", "le", 0.1),
                             chk("shift_run2_mm", "ge", 1.0), chk("shift_run3_mm", "ge", 1.0),
                             chk("n_detected", "eq", 204)}}};

  m["rb_sweet_spot"] = {{"kind", "rb"},
                        {"description", "randomized benchmarking at the sweet spot of the second qubit"},
                        {"qubit", "Q3"},
                        {"range_mm", {-120.0, 0.0}},
                        {"spectroscopy", {{"f_start_hz", 20e6}, {"f_stop_hz", 120e6}, {"f_step_hz", 0.05e6}, {"amplitude", 2.0}}},
                        {"rb", {{"fixed_asymptote", true}, {"lengths", {1, 2, 4, 8, 16, 32, 48, 64, 80, 96, 112, 128}}}},
                        {"checks", {chk("abs_residual_angle_deg", "le", 0.1), chk("f_clifford_pct", "near_abs", 99.936, 0.01)}}};
  return m;
}

}  // namespace

const std::map<std::string, json>& builtin_scenarios() {
  static const std::map<std::string, json> m = make_builtins();
  return m;
}

std::vector<std::string> scenario_names(const LabConfig& config) {
  std::vector<std::string> names;
  for (const auto& [k, _] : builtin_scenarios()) names.push_back(k);
  for (const auto& [k, _] : config.scenarios.items())
    if (!builtin_scenarios().count(k)) names.push_back(k);
  std::sort(names.begin(), names.end());
  return names;
}

ScenarioDef find_scenario(const LabConfig& config, const std::string& name) {
  json j;
  auto it = builtin_scenarios().find(name);
  const bool builtin = it != builtin_scenarios().end();
  if (builtin) j = it->second;
  if (config.scenarios.contains(name)) {
    if (builtin) j.merge_patch(config.scenarios[name]);
    else j = config.scenarios[name];
  } else if (!builtin) {
    throw NotFoundError("unknown scenario '" + name + "'");
  }
  ScenarioDef base;
  base.name = name;
  ScenarioDef def = scenario_from_json(j, base);
  def.validate();
  config.qubit(def.qubit);
  return def;
}

void validate_scenarios(const LabConfig& config) {
  for (const auto& name : scenario_names(config)) {
    try {
      find_scenario(config, name);
    } catch (const NotFoundError& e) {
      throw ValidationError("scenario " + name + ": " + e.what());
    }
  }
}

// --- analysis helpers ----------------------------------------------------------

std::pair<int, int> count_turning_points(const std::vector<double>& v, double threshold) {
  int minima = 0, maxima = 0;
  if (v.size() < 3) return {0, 0};
  // Zig-zag filter: a reversal counts once the sequence retreats from the
  // running extreme by more than the threshold.
  int trend = 0;
  double ext = v[0];
  std::size_t ext_i = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double x = v[i];
    if (trend == 0) {
      if (x > ext + threshold) trend = 1;
      else if (x < ext - threshold) trend = -1;
      if (trend != 0) {
        ext = x;
        ext_i = i;
      }
      continue;
    }
    if (trend > 0) {
      if (x >= ext) {
        ext = x;
        ext_i = i;
      } else if (x < ext - threshold) {
        if (ext_i > 0) ++maxima;
        trend = -1;
        ext = x;
        ext_i = i;
      }
    } else {
      if (x <= ext) {
        ext = x;
        ext_i = i;
      } else if (x > ext + threshold) {
        if (ext_i > 0) ++minima;
        trend = 1;
        ext = x;
        ext_i = i;
      }
    }
  }
  return {minima, maxima};
}

double estimate_shift(const std::vector<double>& x, const std::vector<double>& a, const std::vector<double>& b,
                      double max_shift) {
  if (x.size() != a.size() || x.size() != b.size() || x.size() < 3)
    throw ValidationError("shift estimation needs matching series of at least 3 points");
  std::vector<std::size_t> idx(x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> xs, as;
  for (auto i : idx) {
    xs.push_back(x[i]);
    as.push_back(a[i]);
  }
  auto interp = [&](double q, bool& ok) {
    ok = q >= xs.front() && q <= xs.back();
    if (!ok) return 0.0;
    auto hi = std::upper_bound(xs.begin(), xs.end(), q);
    if (hi == xs.end()) return as.back();
    const std::size_t k = static_cast<std::size_t>(hi - xs.begin());
    if (k == 0) return as.front();
    const double t = (q - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return as[k - 1] + t * (as[k] - as[k - 1]);
  };
  auto cost = [&](double d) {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      bool ok = false;
      const double v = interp(x[i] + d, ok);
      if (!ok) continue;
      s += (b[i] - v) * (b[i] - v);
      ++n;
    }
    return n >= 3 ? s / n : std::numeric_limits<double>::infinity();
  };
  double best_d = 0.0, best_c = std::numeric_limits<double>::infinity();
  const double step = 0.01;
  for (double d = -max_shift; d <= max_shift + 1e-12; d += step) {
    const double c = cost(d);
    if (c < best_c) {
      best_c = c;
      best_d = d;
    }
  }
  return best_d;
}

// --- runner ------------------------------------------------------------------

namespace {

constexpr const char* kMapHeader =
    "index,run,x_mm,y_mm,z_mm,f_l_hz,f_l_sigma_hz,detected,truth_x_mm,truth_y_mm,truth_z_mm,truth_f_l_hz,"
    "truth_theta_deg\n";
constexpr const char* kFitsHeader = "index,run,experiment,parameter,value,sigma,converged\n";

std::string fd(double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); }

struct PointResult {
  StagePosition commanded;
  std::optional<double> f_l;
  double f_sigma = 0.0;
};

class Runner {
 public:
  Runner(const LabConfig& cfg, ScenarioDef def, std::uint64_t seed, const virtlab::RunObserver& obs)
      : cfg_(cfg), def_(std::move(def)), lab_(make_world(cfg, def_), seed, def_.name) {
    lab_.set_scenario(def_.name);
    lab_.set_compensation(def_.compensate);
    if (obs) lab_.set_observer(obs);
    res_.name = def_.name;
    res_.seed = seed;
    map_ << kMapHeader;
    fits_ << kFitsHeader;
  }

  ScenarioResult run();

 private:
  static virtlab::World make_world(const LabConfig& cfg, const ScenarioDef& def) {
    virtlab::World w = cfg.make_world();
    w.qubit = cfg.qubit(def.qubit);
    w.solenoid.setpoint_t = def.solenoid_t;
    w.solenoid.validate();
    w.stage.reset(stage::StageState::at(def.base, cfg.stage.backlash, cfg.stage.limits));
    return w;
  }

  void fail(const std::string& what) {
    res_.partial = true;
    res_.errors.push_back(what);
  }
  void metric(const std::string& k, double v) { res_.metrics[k] = v; }

  void fit_rows(int index, int run, const char* experiment, const virtlab::FitResult& f) {
    for (const auto& p : f.params)
      fits_ << index << ',' << run << ',' << experiment << ',' << p.name << ',' << fd(p.value) << ',' << fd(p.sigma)
            << ',' << (f.converged ? 1 : 0) << '\n';
  }

  /// Moves, runs spectroscopy, fits and records one map row.
  PointResult measure(int index, int run, const StagePosition& target) {
    PointResult pr;
    pr.commanded = target;
    try {
      lab_.move_to(target);
    } catch (const std::exception& e) {
      fail("point " + std::to_string(index) + ": " + e.what());
      return pr;
    }
    virtlab::ResonanceFit rf;
    try {
      pr.f_l = measure_larmor(lab_, def_.spectroscopy, resonance_options(), &rf);
    } catch (const std::exception& e) {
      fail("point " + std::to_string(index) + ": " + e.what());
    }
    if (pr.f_l) pr.f_sigma = rf.fit.sigma("f_l");
    fit_rows(index, run, "spectroscopy", rf.fit);
    const auto& st = lab_.world().stage.state();
    const auto lp = lab_.world().larmor();
    map_ << index << ',' << run << ',' << fd(st.commanded.x) << ',' << fd(st.commanded.y) << ','
         << fd(st.commanded.z) << ',' << (pr.f_l ? fd(*pr.f_l) : "") << ',' << (pr.f_l ? fd(pr.f_sigma) : "") << ','
         << (pr.f_l ? 1 : 0) << ',' << fd(st.true_pos.x) << ',' << fd(st.true_pos.y) << ',' << fd(st.true_pos.z)
         << ',' << fd(lp.f_l_hz) << ',' << fd(lp.theta_deg) << '\n';
    return pr;
  }

  virtlab::ResonanceOptions resonance_options() const {
    virtlab::ResonanceOptions o;
    if (cfg_.resonator.enabled) o.exclude_hz.push_back(cfg_.resonator.frequency_hz);
    return o;
  }

  std::optional<double> ramsey_t2(int index, int run) {
    const auto t = virtlab::linspace(0.0, def_.ramsey.t_max_s, def_.ramsey.points);
    const auto rec = lab_.ramsey(t, def_.ramsey.detuning_hz, def_.ramsey.shots);
    const auto f = virtlab::fit_decay(rec, virtlab::DecayModel::Ramsey);
    fit_rows(index, run, "ramsey", f);
    if (!f.usable()) return std::nullopt;
    return f.value("T2");
  }

  std::optional<double> hahn_t2(int index, int run) {
    const auto t = virtlab::linspace(0.0, def_.hahn.t_max_s, def_.hahn.points);
    const auto rec = lab_.hahn(t, def_.hahn.shots);
    const auto f = virtlab::fit_decay(rec, virtlab::DecayModel::Hahn);
    fit_rows(index, run, "hahn", f);
    if (!f.usable()) return std::nullopt;
    return f.value("T2");
  }

  std::vector<StagePosition> line_positions() const {
    std::vector<StagePosition> out;
    for (double v : virtlab::linspace(def_.start_mm, def_.stop_mm, def_.points))
      out.push_back(stage::with_axis(def_.base, def_.axis, v));
    return out;
  }

  /// Truth: position along the axis where the field lies in-plane, from a
  /// dense 10 um sweep over [lo, hi].
  double truth_inplane(double lo, double hi) const {
    const virtlab::World& w = lab_.world();
    double best = lo, best_abs = std::numeric_limits<double>::infinity();
    for (double x = lo; x <= hi + 1e-9; x += 0.01) {
      const auto b = w.field_at(stage::with_axis(def_.base, def_.axis, x));
      const double th = std::abs(spin::out_of_plane_angle(b, w.qubit.plane_normal));
      if (th < best_abs) {
        best_abs = th;
        best = x;
      }
    }
    return best;
  }

  /// Truth: position along the axis of the smallest f_L over [lo, hi].
  double truth_fmin(double lo, double hi) const {
    const virtlab::World& w = lab_.world();
    double best = lo, best_f = std::numeric_limits<double>::infinity();
    for (double x = lo; x <= hi + 1e-9; x += 0.01) {
      const double f = spin::larmor_point(w.qubit, w.field_at(stage::with_axis(def_.base, def_.axis, x))).f_l_hz;
      if (f < best_f) {
        best_f = f;
        best = x;
      }
    }
    return best;
  }

  double truth_t2star(double x) const {
    const virtlab::World& w = lab_.world();
    const auto lp = spin::larmor_point(w.qubit, w.field_at(stage::with_axis(def_.base, def_.axis, x)));
    return spin::coherence_times(w.qubit, lp.theta_deg).t2_star_s;
  }

  void line_metrics(const std::vector<PointResult>& pts) {
    std::vector<double> f;
    int detected = 0;
    double fmin = std::numeric_limits<double>::infinity(), fmax = 0.0;
    std::size_t imin = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (!pts[i].f_l) continue;
      ++detected;
      f.push_back(*pts[i].f_l);
      if (*pts[i].f_l < fmin) {
        fmin = *pts[i].f_l;
        imin = i;
      }
      fmax = std::max(fmax, *pts[i].f_l);
    }
    metric("n_points", static_cast<double>(pts.size()));
    metric("n_detected", detected);
    if (f.empty()) return;
    metric("f_min_mhz", fmin / 1e6);
    metric("f_max_mhz", fmax / 1e6);
    if (pts.front().f_l) metric("f_start_mhz", *pts.front().f_l / 1e6);
    if (pts.back().f_l) metric("f_end_mhz", *pts.back().f_l / 1e6);
    metric("argmin_mm", pts[imin].commanded[axis_index(def_.axis)]);
    metric("interior_min", (imin > 0 && imin + 1 < pts.size()) ? 1.0 : 0.0);
    const auto [mins, maxs] = count_turning_points(f, 0.5e6);
    metric("n_minima", mins);
    metric("n_maxima", maxs);
  }

  void run_field_profile();
  void run_line();
  void run_map();
  void run_circle();
  void run_sweet_spot();
  void run_coherence_sweep(double center, bool from_def);
  void run_coherence_point();
  void run_hysteresis();
  void run_drive_efficiency();
  void run_rb();

  const LabConfig& cfg_;
  ScenarioDef def_;
  Lab lab_;
  ScenarioResult res_;
  std::ostringstream map_;
  std::ostringstream fits_;
  bool custom_map_ = false;
};

void Runner::run_field_profile() {
  std::vector<magnetics::ProfilePoint> measured;
  if (!def_.profile_csv.empty()) {
    measured = magnetics::read_profile_csv(def_.profile_csv);
  } else {
    for (double z : def_.profile_z_mm) measured.push_back({z, magnetics::axial_profile(cfg_.magnet, z)});
  }
  const auto fit = magnetics::calibrate_remanence(measured, cfg_.magnet);
  custom_map_ = true;
  map_.str("");
  map_.clear();
  map_ << "z_mm,b_tesla\n";
  for (const auto& p : measured) map_ << fd(p.z_mm) << ',' << fd(magnetics::axial_profile(fit.spec, p.z_mm)) << '\n';
  fits_ << "0,0,profile,remanence_t," << fd(fit.spec.remanence_t) << ",0,1\n";
  fits_ << "0,0,profile,residual_rms_t," << fd(fit.residual_rms_t) << ",0,1\n";
  metric("remanence_t", fit.spec.remanence_t);
  metric("residual_rms_t", fit.residual_rms_t);
  metric("b_160_mt", magnetics::axial_profile(fit.spec, -160.0) * 1e3);
}

void Runner::run_line() {
  std::vector<PointResult> pts;
  int i = 0;
  for (const auto& p : line_positions()) pts.push_back(measure(i++, 0, p));
  line_metrics(pts);
}

void Runner::run_map() {
  std::vector<MapPoint> map;
  int i = 0, detected = 0;
  double fmin = std::numeric_limits<double>::infinity(), fmax = 0.0;
  const auto outer = virtlab::linspace(def_.start2_mm, def_.stop2_mm, def_.points2);
  const auto inner = virtlab::linspace(def_.start_mm, def_.stop_mm, def_.points);
  for (std::size_t r = 0; r < outer.size(); ++r) {
    for (std::size_t c = 0; c < inner.size(); ++c) {
      // Serpentine raster keeps moves short.
      const double v = (r % 2 == 0) ? inner[c] : inner[inner.size() - 1 - c];
      StagePosition p = stage::with_axis(stage::with_axis(def_.base, def_.axis2, outer[r]), def_.axis, v);
      const auto pr = measure(i++, 0, p);
      if (!pr.f_l) continue;
      ++detected;
      fmin = std::min(fmin, *pr.f_l);
      fmax = std::max(fmax, *pr.f_l);
      map.push_back({pr.commanded, *pr.f_l});
    }
  }
  metric("n_points", i);
  metric("n_detected", detected);
  if (detected == 0) return;
  metric("f_min_mhz", fmin / 1e6);
  metric("f_max_mhz", fmax / 1e6);
  if (map.size() < 20) return;
  FieldModel fm{cfg_.magnet, lab_.world().solenoid};
  const auto g = fit_gtensor(map, fm);
  double ss = 0.0;
  for (const auto& m : map) {
    const double model = spin::larmor_frequency(g.g, fm.at(m.position));
    ss += std::pow((model - m.f_l_hz) / m.f_l_hz, 2);
  }
  metric("gfit_underdetermined", g.underdetermined ? 1.0 : 0.0);
  metric("gfit_rel_rms", std::sqrt(ss / static_cast<double>(map.size())));
  metric("gfit_misalignment_deg", g.misalignment_deg);
  for (int k = 0; k < 3; ++k) {
    metric("gfit_g" + std::to_string(k), g.g.principal[k]);
    fits_ << "0,0,gtensor,g" << k << ',' << fd(g.g.principal[k]) << ',' << fd(g.principal_sigma[k]) << ','
          << (g.underdetermined ? 0 : 1) << '\n';
  }
  fits_ << "0,0,gtensor,misalignment_deg," << fd(g.misalignment_deg) << ',' << fd(g.misalignment_sigma_deg) << ','
        << (g.underdetermined ? 0 : 1) << '\n';
}

void Runner::run_circle() {
  std::vector<PointResult> pts;
  for (int k = 0; k < def_.circle_points; ++k) {
    const double phi = 2.0 * kPi * k / (def_.circle_points - 1);
    StagePosition p = def_.base;
    p.x += def_.radius_mm * std::cos(phi);
    p.y += def_.radius_mm * std::sin(phi);
    pts.push_back(measure(k, 0, p));
  }
  line_metrics(pts);
  metric("start_x_mm", pts.front().commanded.x);
  if (pts.front().f_l && pts.back().f_l) metric("closure_mhz", std::abs(*pts.front().f_l - *pts.back().f_l) / 1e6);
}

void Runner::run_coherence_sweep(double center, bool from_def) {
  std::vector<double> xs;
  if (from_def) xs = virtlab::linspace(def_.start_mm, def_.stop_mm, def_.points);
  else xs = virtlab::linspace(center + def_.half_width_mm, center - def_.half_width_mm, def_.points);
  std::vector<double> fx, ff, tx, tv;
  int detected = 0;
  int i = 0;
  for (double x : xs) {
    const int idx = i++;
    const auto pr = measure(idx, 1, stage::with_axis(def_.base, def_.axis, x));
    if (!pr.f_l) continue;
    ++detected;
    fx.push_back(x);
    ff.push_back(*pr.f_l * *pr.f_l);
    try {
      if (auto t2 = ramsey_t2(idx, 1)) {
        tx.push_back(x);
        tv.push_back(1.0 / (*t2 * *t2));
      }
      hahn_t2(idx, 1);
    } catch (const std::exception& e) {
      fail("coherence point " + std::to_string(idx) + ": " + e.what());
    }
  }
  metric("n_detected", detected);
  const auto xf = parabola_vertex(fx, ff);
  const auto xt = parabola_vertex(tx, tv);
  if (xf) metric("x_fmin_mm", *xf);
  if (xt) metric("x_t2max_mm", *xt);
  if (xf && xt) metric("colocation_mm", std::abs(*xf - *xt));
  const double lo = std::min(xs.front(), xs.back()), hi = std::max(xs.front(), xs.back());
  metric("truth_x_inplane_mm", truth_inplane(lo, hi));
}

void Runner::run_sweet_spot() {
  SweetSpotOptions o;
  o.axis = def_.axis;
  o.lo_mm = def_.range_lo_mm;
  o.hi_mm = def_.range_hi_mm;
  o.budget = def_.budget;
  o.spectroscopy = def_.spectroscopy;
  o.resonance = resonance_options();
  lab_.move_to(def_.base);
  const auto ss = find_sweet_spot(lab_, o);
  int i = 0;
  for (const auto& p : ss.probes) {
    fits_ << i << ",0,probe,position_mm," << fd(p.position_mm) << ",0," << (p.f_l_hz ? 1 : 0) << '\n';
    if (p.f_l_hz) fits_ << i << ",0,probe,f_l," << fd(*p.f_l_hz) << ",0,1\n";
    ++i;
  }
  metric("x_star_mm", ss.x_star_mm);
  metric("f_l_min_mhz", ss.f_l_min_hz / 1e6);
  metric("probes", static_cast<double>(ss.probes.size()));
  metric("iterations", ss.iterations);
  metric("abs_residual_angle_deg", std::abs(ss.residual_angle_deg));
  const double truth = truth_inplane(def_.range_lo_mm, def_.range_hi_mm);
  metric("truth_x_inplane_mm", truth);
  metric("x_star_error_mm", std::abs(ss.x_star_mm - truth));
  const double truth_f = truth_fmin(def_.range_lo_mm, def_.range_hi_mm);
  metric("truth_x_fmin_mm", truth_f);
  metric("x_star_fmin_error_mm", std::abs(ss.x_star_mm - truth_f));

  // Coherence at x_star (the stage is already there).
  const int at = static_cast<int>(ss.probes.size());
  if (auto t2 = ramsey_t2(at, 0)) metric("t2_star_us", *t2 * 1e6);
  if (auto t2 = hahn_t2(at, 0)) metric("t2_hahn_us", *t2 * 1e6);
  double best_truth = 0.0;
  for (double x = def_.range_lo_mm; x <= def_.range_hi_mm + 1e-9; x += 0.01) best_truth = std::max(best_truth, truth_t2star(x));
  metric("t2_star_truth_ratio", truth_t2star(ss.x_star_mm) / best_truth);

  if (def_.points >= 3) {
    auto saved = res_.metrics;
    run_coherence_sweep(ss.x_star_mm, false);
    res_.metrics["truth_x_inplane_mm"] = saved["truth_x_inplane_mm"];
  }
}

void Runner::run_coherence_point() {
  lab_.move_to(def_.base);
  const auto pr = measure(0, 0, def_.base);
  metric("n_detected", pr.f_l ? 1 : 0);
  if (pr.f_l) metric("f_l_mhz", *pr.f_l / 1e6);
  metric("truth_theta_deg", lab_.world().larmor().theta_deg);
  if (auto t2 = ramsey_t2(0, 0)) metric("t2_star_us", *t2 * 1e6);
  if (auto t2 = hahn_t2(0, 0)) metric("t2_hahn_us", *t2 * 1e6);
}

void Runner::run_hysteresis() {
  const auto positions = line_positions();
  const int ax = axis_index(def_.axis);
  std::vector<std::vector<double>> curves;
  std::vector<double> xs;
  for (const auto& p : positions) xs.push_back(p[ax]);
  int detected = 0;
  auto one_run = [&](int run, bool compensate) {
    lab_.set_compensation(compensate);
    std::vector<double> f;
    double first_err = 0.0, last_err = 0.0, worst = 0.0;
    for (std::size_t k = 0; k < positions.size(); ++k) {
      const auto pr = measure(static_cast<int>(k), run, positions[k]);
      const auto& st = lab_.world().stage.state();
      const double err = st.true_pos[ax] - st.commanded[ax];
      if (k == 0) first_err = err;
      last_err = err;
      worst = std::max(worst, (st.true_pos.vec() - positions[k].vec()).norm());
      if (pr.f_l) ++detected;
      f.push_back(pr.f_l ? *pr.f_l : std::numeric_limits<double>::quiet_NaN());
    }
    return std::tuple{f, last_err - first_err, worst};
  };
  for (int r = 0; r < def_.repeats; ++r) {
    auto [f, offset, worst] = one_run(r, def_.compensate);
    curves.push_back(f);
    if (r == 0) metric("offset_per_run_mm", std::abs(offset));
    metric("end_offset_run" + std::to_string(r + 1) + "_mm", lab_.world().stage.state().true_pos[ax] -
                                                               lab_.world().stage.state().commanded[ax]);
    (void)worst;
  }
  auto [fc, offset_c, worst_c] = one_run(def_.repeats, true);
  (void)fc;
  (void)offset_c;
  metric("compensated_residual_mm", worst_c);
  metric("n_detected", detected);
  for (int r = 1; r < def_.repeats; ++r) {
    std::vector<double> x, a, b;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      if (std::isnan(curves[0][k]) || std::isnan(curves[r][k])) continue;
      x.push_back(xs[k]);
      a.push_back(curves[0][k]);
      b.push_back(curves[r][k]);
    }
    if (x.size() >= 3) metric("shift_run" + std::to_string(r + 1) + "_mm", std::abs(estimate_shift(x, a, b, 15.0)));
  }
  lab_.set_compensation(def_.compensate);
}

void Runner::run_drive_efficiency() {
  std::vector<double> ex, ev, tx, tv;
  int detected = 0, i = 0;
  for (const auto& p : line_positions()) {
    const int idx = i++;
    const auto pr = measure(idx, 0, p);
    if (!pr.f_l) continue;
    ++detected;
    const double x = p[axis_index(def_.axis)];
    const auto t = virtlab::linspace(0.0, def_.rabi.t_max_s, def_.rabi.points);
    const auto rec = lab_.rabi(t, def_.rabi.amplitude, def_.rabi.shots);
    const auto rf = virtlab::fit_rabi(rec);
    fit_rows(idx, 0, "rabi", rf);
    if (rf.usable()) {
      const double eta = rf.value("frequency") / (def_.rabi.amplitude * *pr.f_l);
      fits_ << idx << ",0,rabi,efficiency," << fd(eta) << ",0,1\n";
      ex.push_back(x);
      ev.push_back(-std::log(eta));
    }
    if (auto t2 = ramsey_t2(idx, 0)) {
      tx.push_back(x);
      tv.push_back(1.0 / (*t2 * *t2));
    }
  }
  metric("n_detected", detected);
  const auto xe = parabola_vertex(ex, ev);
  const auto xt = parabola_vertex(tx, tv);
  if (xe) metric("x_eta_max_mm", *xe);
  if (xt) metric("x_t2max_mm", *xt);
  if (xe && xt) metric("colocation_mm", std::abs(*xe - *xt));
}

void Runner::run_rb() {
  SweetSpotOptions o;
  o.axis = def_.axis;
  o.lo_mm = def_.range_lo_mm;
  o.hi_mm = def_.range_hi_mm;
  o.budget = def_.budget;
  o.spectroscopy = def_.spectroscopy;
  o.resonance = resonance_options();
  lab_.move_to(def_.base);
  const auto ss = find_sweet_spot(lab_, o);
  metric("x_star_mm", ss.x_star_mm);
  metric("abs_residual_angle_deg", std::abs(ss.residual_angle_deg));

  const auto lp = lab_.world().larmor();
  const auto vis = spin::readout_visibility(lab_.world().qubit, lp.theta_deg);
  virtlab::RbExperiment exp;
  exp.lengths = def_.rb.lengths;
  exp.randomizations = def_.rb.randomizations;
  exp.shots = def_.rb.shots;
  exp.p_dep = virtlab::depolarizing_from_fidelity(def_.rb.f_native);
  exp.visibility = vis.amplitude;
  exp.baseline = vis.baseline;
  virtlab::RbData data;
  lab_.rb(exp, &data);

  custom_map_ = true;
  map_.str("");
  map_.clear();
  map_ << "length,mean_p,sem_p\n";
  for (std::size_t k = 0; k < data.lengths.size(); ++k)
    map_ << fd(data.lengths[k]) << ',' << fd(data.mean_p[k]) << ',' << fd(data.sem_p[k]) << '\n';

  virtlab::RbFitOptions fo;
  fo.sigmas = data.sem_p;
  if (def_.rb.fixed_asymptote) fo.fixed_asymptote = vis.baseline + 0.5 * vis.amplitude;
  const auto fit = virtlab::rb_fit(data.lengths, data.mean_p, fo);
  fit_rows(0, 0, "rb", fit.fit);
  fits_ << "0,0,rb,f_clifford," << fd(fit.f_clifford) << ',' << fd(fit.f_clifford_sigma) << ','
        << (fit.fit.converged ? 1 : 0) << '\n';
  fits_ << "0,0,rb,f_native," << fd(fit.f_native) << ',' << fd(fit.f_native_sigma) << ','
        << (fit.fit.converged ? 1 : 0) << '\n';
  metric("f_clifford_pct", fit.f_clifford * 100.0);
  metric("f_native_pct", fit.f_native * 100.0);
}

ScenarioResult Runner::run() {
  try {
    const std::string& k = def_.kind;
    if (k == "field_profile") run_field_profile();
    else if (k == "line") run_line();
    else if (k == "map") run_map();
    else if (k == "circle") run_circle();
    else if (k == "sweet_spot") run_sweet_spot();
    else if (k == "coherence_sweep") run_coherence_sweep(0.0, true);
    else if (k == "coherence_point") run_coherence_point();
    else if (k == "hysteresis") run_hysteresis();
    else if (k == "drive_efficiency") run_drive_efficiency();
    else if (k == "rb") run_rb();
  } catch (const std::exception& e) {
    fail(e.what());
  }

  bool all = !res_.partial;
  for (const auto& c : def_.checks) {
    auto it = res_.metrics.find(c.metric);
    const double v = it == res_.metrics.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
    const bool ok = c.evaluate(v);
    all = all && ok;
    res_.outcomes.push_back({c, v, ok});
  }
  res_.passed = all;

  std::ostringstream v;
  v << "scenario " << def_.name << '\n';
  v << "kind " << def_.kind << '\n';
  v << "seed " << res_.seed << '\n';
  v << "status " << (res_.partial ? "partial" : "complete") << '\n';
  for (const auto& e : res_.errors) v << "error " << e << '\n';
  for (const auto& [name, value] : res_.metrics) v << "metric " << name << ' ' << fd(value) << '\n';
  for (const auto& o : res_.outcomes)
    v << (o.passed ? "PASS " : "FAIL ") << o.check.describe() << " (value " << fd(o.value) << ")\n";
  v << "verdict " << (res_.passed ? "PASS" : "FAIL") << '\n';
  res_.verdict = v.str();
  res_.map_csv = map_.str();
  res_.fits_csv = fits_.str();
  return std::move(res_);
}

std::string compact_timestamp() {
  std::string ts = virtlab::iso8601_utc_now();
  ts.erase(std::remove_if(ts.begin(), ts.end(), [](char c) { return c == '-' || c == ':'; }), ts.end());
  std::replace(ts.begin(), ts.end(), '.', '_');
  return ts;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

}  // namespace

ScenarioResult run_scenario(const LabConfig& config, const ScenarioDef& def, const ScenarioRunOptions& opts) {
  def.validate();
  config.qubit(def.qubit);
  const std::uint64_t seed = virtlab::derive_seed(opts.seed.value_or(config.seed), def.name);
  Runner runner(config, def, seed, opts.observer);
  ScenarioResult res = runner.run();
  if (opts.write_bundle) {
    const auto root = opts.out_root.value_or(config.data_dir);
    const std::string ts = opts.timestamp.empty() ? compact_timestamp() : opts.timestamp;
    auto dir = root / def.name / ts;
    for (int k = 2; std::filesystem::exists(dir); ++k) dir = root / def.name / (ts + "-" + std::to_string(k));
    std::filesystem::create_directories(dir);
    write_file(dir / "map.csv", res.map_csv);
    write_file(dir / "fits.csv", res.fits_csv);
    write_file(dir / "verdict.txt", res.verdict);
    res.bundle_dir = dir;
  }
  return res;
}

ScenarioResult run_scenario(const LabConfig& config, const std::string& name, const ScenarioRunOptions& opts) {
  return run_scenario(config, find_scenario(config, name), opts);
}

}  // namespace maglab::calibrate
