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

#include "maglab/config.hpp"

#include "maglab/scenario.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace maglab {

using nlohmann::json;

namespace device {

magnetics::MagnetSpec default_magnet() {
  magnetics::MagnetSpec m;
  m.remanence_t = kAnchorRemanence;
  return m;
}

spin::QubitModel make_qubit(const Eigen::Vector3d& g_principal, double misalignment_deg) {
  spin::QubitModel q;
  q.g.principal = g_principal;
  q.g.orientation = spin::misaligned_frame(misalignment_deg);
  q.plane_normal = -q.g.axis(0);
  q.sigma_par_hz = spin::sigma_from_t2star(13.41e-6);
  q.sigma_perp_hz = spin::solve_sigma_perp(q.sigma_par_hz, misalignment_deg, 1.70e-6);
  q.echo_gain.angle_dependent = true;
  q.eta0 = 1e-2;
  q.eta_width_deg = 5.0;
  q.vis0 = 0.9;
  q.vis_slope = 0.5;
  q.baseline = 0.05;
  return q;
}

spin::QubitModel default_q8() { return make_qubit({6.710050, 0.170775, 0.142312}, kMisalignmentDeg); }

spin::QubitModel default_q3() { return make_qubit({10.232157, 1.2 * 0.115363, 0.115363}, kMisalignmentDeg); }

}  // namespace device

void require_known_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError("unknown key '" + key + "' in " + where);
  }
}

namespace {

json vec_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

json mat_json(const Eigen::Matrix3d& m) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i) rows.push_back(json::array({m(i, 0), m(i, 1), m(i, 2)}));
  return rows;
}

Eigen::Vector3d vec3(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(what + " must be an array of three numbers");
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ValidationError(what + " must be an array of three numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

Eigen::Matrix3d mat3(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(what + " must be a 3x3 array");
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i) m.row(i) = vec3(j[i], what).transpose();
  return m;
}

template <class T>
void get(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("bad value for '") + key + "' in " + where);
  }
}

json magnet_json(const magnetics::MagnetSpec& m) {
  return {{"dims_mm", vec_json(m.dims_mm)},
          {"remanence_t", m.remanence_t},
          {"magnetization_axis", vec_json(m.magnetization_axis)},
          {"orientation", mat_json(m.orientation)},
          {"stage_rotation", mat_json(m.transform.rotation)},
          {"stage_offset_mm", vec_json(m.transform.offset_mm)},
          {"screening", m.screening}};
}

magnetics::MagnetSpec magnet_from(const json& j) {
  require_known_keys(j,
                     {"dims_mm", "remanence_t", "magnetization_axis", "orientation", "stage_rotation",
                      "stage_offset_mm", "screening"},
                     "magnet");
  magnetics::MagnetSpec m = device::default_magnet();
  if (j.contains("dims_mm")) m.dims_mm = vec3(j["dims_mm"], "magnet.dims_mm");
  get(j, "remanence_t", m.remanence_t, "magnet");
  if (j.contains("magnetization_axis")) m.magnetization_axis = vec3(j["magnetization_axis"], "magnet.magnetization_axis");
  if (j.contains("orientation")) m.orientation = mat3(j["orientation"], "magnet.orientation");
  if (j.contains("stage_rotation")) m.transform.rotation = mat3(j["stage_rotation"], "magnet.stage_rotation");
  if (j.contains("stage_offset_mm")) m.transform.offset_mm = vec3(j["stage_offset_mm"], "magnet.stage_offset_mm");
  get(j, "screening", m.screening, "magnet");
  return m;
}

json qubit_json(const spin::QubitModel& q) {
  return {{"g_principal", vec_json(q.g.principal)},
          {"g_orientation", mat_json(q.g.orientation)},
          {"plane_normal", vec_json(q.plane_normal)},
          {"sigma_perp_hz", q.sigma_perp_hz},
          {"sigma_par_hz", q.sigma_par_hz},
          {"echo_gain",
           {{"at_zero", q.echo_gain.at_zero},
            {"angle_dependent", q.echo_gain.angle_dependent},
            {"at_reference", q.echo_gain.at_reference},
            {"reference_deg", q.echo_gain.reference_deg}}},
          {"eta0", q.eta0},
          {"eta_width_deg", q.eta_width_deg},
          {"vis0", q.vis0},
          {"vis_slope", q.vis_slope},
          {"baseline", q.baseline}};
}

spin::QubitModel qubit_from(const json& j, spin::QubitModel q, const std::string& where) {
  require_known_keys(j,
                     {"g_principal", "g_orientation", "misalignment_deg", "plane_normal", "sigma_perp_hz",
                      "sigma_par_hz", "echo_gain", "eta0", "eta_width_deg", "vis0", "vis_slope", "baseline"},
                     where);
  if (j.contains("g_orientation") && j.contains("misalignment_deg"))
    throw ValidationError(where + ": give g_orientation or misalignment_deg, not both");
  if (j.contains("g_principal")) q.g.principal = vec3(j["g_principal"], where + ".g_principal");
  if (j.contains("g_orientation")) q.g.orientation = mat3(j["g_orientation"], where + ".g_orientation");
  if (j.contains("misalignment_deg")) {
    double phi = 0.0;
    get(j, "misalignment_deg", phi, where);
    q.g.orientation = spin::misaligned_frame(phi);
    if (!j.contains("plane_normal")) q.plane_normal = -q.g.axis(0);
  }
  if (j.contains("plane_normal")) q.plane_normal = vec3(j["plane_normal"], where + ".plane_normal");
  get(j, "sigma_perp_hz", q.sigma_perp_hz, where);
  get(j, "sigma_par_hz", q.sigma_par_hz, where);
  if (j.contains("echo_gain")) {
    const json& e = j["echo_gain"];
    require_known_keys(e, {"at_zero", "angle_dependent", "at_reference", "reference_deg"}, where + ".echo_gain");
    get(e, "at_zero", q.echo_gain.at_zero, where);
    get(e, "angle_dependent", q.echo_gain.angle_dependent, where);
    get(e, "at_reference", q.echo_gain.at_reference, where);
    get(e, "reference_deg", q.echo_gain.reference_deg, where);
  }
  get(j, "eta0", q.eta0, where);
  get(j, "eta_width_deg", q.eta_width_deg, where);
  get(j, "vis0", q.vis0, where);
  get(j, "vis_slope", q.vis_slope, where);
  get(j, "baseline", q.baseline, where);
  return q;
}

}  // namespace

void LabConfig::validate() const {
  magnet.validate();
  solenoid.validate();
  if (!stage.limits.contains(stage.initial)) throw ValidationError("initial stage position lies outside travel limits");
  if ((stage.limits.min_mm.array() >= stage.limits.max_mm.array()).any())
    throw ValidationError("travel limits must satisfy min < max");
  if ((stage.backlash.eps_per_event_mm.array() < 0.0).any() || (stage.backlash.eps_per_mm.array() < 0.0).any() ||
      (stage.backlash.eps_per_mm.array() >= 1.0).any())
    throw ValidationError("backlash parameters must be non-negative (per-mm below 1)");
  if (qubits.empty()) throw ValidationError("at least one qubit must be configured");
  for (const auto& [name, q] : qubits) {
    try {
      q.g.validate();
      q.validate();
    } catch (const ValidationError& e) {
      throw ValidationError("qubit " + name + ": " + e.what());
    }
  }
  if (!qubits.count(active_qubit)) throw ValidationError("active qubit '" + active_qubit + "' is not configured");
  if (server.port < 0 || server.port > 65535) throw ValidationError("server port must lie in [0, 65535]");
  if (!scenarios.is_object()) throw ValidationError("scenarios must be a JSON object");
  calibrate::validate_scenarios(*this);
}

const spin::QubitModel& LabConfig::qubit(const std::string& name) const {
  auto it = qubits.find(name);
  if (it == qubits.end()) throw NotFoundError("unknown qubit '" + name + "'");
  return it->second;
}

virtlab::World LabConfig::make_world() const {
  virtlab::World w;
  w.magnet = magnet;
  w.solenoid = solenoid;
  w.qubit = qubit(active_qubit);
  w.resonator = resonator;
  w.stage = stage::Stage(stage::StageState::at(stage.initial, stage.backlash, stage.limits));
  return w;
}

LabConfig config_from_json(const json& j) {
  require_known_keys(j,
                     {"magnet", "solenoid", "stage", "qubits", "active_qubit", "resonator", "seed", "data_dir",
                      "run_log", "fsync", "server", "scenarios"},
                     "config");
  LabConfig c;
  if (j.contains("magnet")) c.magnet = magnet_from(j["magnet"]);
  if (j.contains("solenoid")) {
    const json& s = j["solenoid"];
    require_known_keys(s, {"axis", "setpoint_t"}, "solenoid");
    if (s.contains("axis")) c.solenoid.axis = vec3(s["axis"], "solenoid.axis");
    get(s, "setpoint_t", c.solenoid.setpoint_t, "solenoid");
  }
  if (j.contains("stage")) {
    const json& s = j["stage"];
    require_known_keys(
        s, {"initial_mm", "limits_min_mm", "limits_max_mm", "backlash_per_event_mm", "backlash_per_mm", "compensate"},
        "stage");
    if (s.contains("initial_mm")) c.stage.initial = StagePosition::from(vec3(s["initial_mm"], "stage.initial_mm"));
    if (s.contains("limits_min_mm")) c.stage.limits.min_mm = vec3(s["limits_min_mm"], "stage.limits_min_mm");
    if (s.contains("limits_max_mm")) c.stage.limits.max_mm = vec3(s["limits_max_mm"], "stage.limits_max_mm");
    if (s.contains("backlash_per_event_mm"))
      c.stage.backlash.eps_per_event_mm = vec3(s["backlash_per_event_mm"], "stage.backlash_per_event_mm");
    if (s.contains("backlash_per_mm")) c.stage.backlash.eps_per_mm = vec3(s["backlash_per_mm"], "stage.backlash_per_mm");
    get(s, "compensate", c.stage.compensate, "stage");
  }
  if (j.contains("qubits")) {
    const json& qs = j["qubits"];
    if (!qs.is_object()) throw ValidationError("qubits must be a JSON object");
    for (const auto& [name, qj] : qs.items()) {
      auto it = c.qubits.find(name);
      const spin::QubitModel base = it != c.qubits.end() ? it->second : device::default_q8();
      c.qubits[name] = qubit_from(qj, base, "qubits." + name);
    }
  }
  get(j, "active_qubit", c.active_qubit, "config");
  if (j.contains("resonator")) {
    const json& r = j["resonator"];
    require_known_keys(r, {"enabled", "frequency_hz", "hwhm_hz", "amplitude"}, "resonator");
    get(r, "enabled", c.resonator.enabled, "resonator");
    get(r, "frequency_hz", c.resonator.frequency_hz, "resonator");
    get(r, "hwhm_hz", c.resonator.hwhm_hz, "resonator");
    get(r, "amplitude", c.resonator.amplitude, "resonator");
  }
  get(j, "seed", c.seed, "config");
  if (j.contains("data_dir")) c.data_dir = j["data_dir"].get<std::string>();
  if (j.contains("run_log")) c.run_log = j["run_log"].get<std::string>();
  else if (j.contains("data_dir")) c.run_log = c.data_dir / "runlog.jsonl";
  get(j, "fsync", c.fsync, "config");
  if (j.contains("server")) {
    const json& s = j["server"];
    require_known_keys(s, {"host", "port"}, "server");
    get(s, "host", c.server.host, "server");
    get(s, "port", c.server.port, "server");
  }
  if (j.contains("scenarios")) c.scenarios = j["scenarios"];
  c.validate();
  return c;
}

json to_json(const LabConfig& c) {
  json qubits = json::object();
  for (const auto& [name, q] : c.qubits) qubits[name] = qubit_json(q);
  return {{"magnet", magnet_json(c.magnet)},
          {"solenoid", {{"axis", vec_json(c.solenoid.axis)}, {"setpoint_t", c.solenoid.setpoint_t}}},
          {"stage",
           {{"initial_mm", vec_json(c.stage.initial.vec())},
            {"limits_min_mm", vec_json(c.stage.limits.min_mm)},
            {"limits_max_mm", vec_json(c.stage.limits.max_mm)},
            {"backlash_per_event_mm", vec_json(c.stage.backlash.eps_per_event_mm)},
            {"backlash_per_mm", vec_json(c.stage.backlash.eps_per_mm)},
            {"compensate", c.stage.compensate}}},
          {"qubits", qubits},
          {"active_qubit", c.active_qubit},
          {"resonator",
           {{"enabled", c.resonator.enabled},
            {"frequency_hz", c.resonator.frequency_hz},
            {"hwhm_hz", c.resonator.hwhm_hz},
            {"amplitude", c.resonator.amplitude}}},
          {"seed", c.seed},
          {"data_dir", c.data_dir.string()},
          {"run_log", c.run_log.string()},
          {"fsync", c.fsync},
          {"server", {{"host", c.server.host}, {"port", c.server.port}}},
          {"scenarios", c.scenarios}};
}

LabConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  LabConfig c = config_from_json(j);
  // Relative data paths resolve against the config file's directory.
  const auto base = path.parent_path();
  if (c.data_dir.is_relative() && j.contains("data_dir")) c.data_dir = base / c.data_dir;
  if (c.run_log.is_relative() && (j.contains("run_log") || j.contains("data_dir")))
    c.run_log = j.contains("run_log") ? base / c.run_log : c.data_dir / "runlog.jsonl";
  return c;
}

LabConfig resolve_config(const std::optional<std::filesystem::path>& explicit_path, std::string* source) {
  std::optional<std::filesystem::path> path = explicit_path;
  if (!path) {
    if (const char* env = std::getenv("MAGLAB_CONFIG"); env && *env) path = env;
  }
  if (!path && std::filesystem::exists("maglab.json")) path = "maglab.json";
  if (!path) {
    if (source) *source = "<defaults>";
    return LabConfig{};
  }
  if (source) *source = path->string();
  return load_config(*path);
}

}  // namespace maglab
