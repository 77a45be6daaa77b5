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

#include "maglab/experiments.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace maglab {

namespace device {

/// Remanence that reproduces the 6.2 mT anchor at stage z = -160 mm.
inline constexpr double kAnchorRemanence = 1.1636954395;
inline constexpr double kMisalignmentDeg = 2.5;

magnetics::MagnetSpec default_magnet();
/// Qubit used for the maps, sweet spot and RB.
spin::QubitModel default_q8();
/// Qubit used for the zero-internal-field experiments.
spin::QubitModel default_q3();

/// A qubit whose out-of-plane axis is tilted by `misalignment_deg`, with the
/// plane normal chosen so solenoid fields along +z sit at +misalignment.
spin::QubitModel make_qubit(const Eigen::Vector3d& g_principal, double misalignment_deg);

}  // namespace device

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
};

struct StageConfig {
  StagePosition initial{0.0, 0.0, -200.0};
  stage::TravelLimits limits;
  stage::BacklashModel backlash;
  bool compensate = true;
};

/// Everything the lab daemon and the calibration CLI need. Loaded from JSON
/// with unknown keys rejected.
struct LabConfig {
  magnetics::MagnetSpec magnet = device::default_magnet();
  magnetics::SolenoidSpec solenoid;
  StageConfig stage;
  std::map<std::string, spin::QubitModel> qubits{{"Q8", device::default_q8()}, {"Q3", device::default_q3()}};
  std::string active_qubit = "Q8";
  virtlab::ResonatorLine resonator;
  std::uint64_t seed = 20240917;
  std::filesystem::path data_dir = "runs";
  std::filesystem::path run_log = "runs/runlog.jsonl";
  bool fsync = false;
  ServerConfig server;
  /// Scenario overrides and additions keyed by scenario name.
  nlohmann::json scenarios = nlohmann::json::object();

  void validate() const;
  const spin::QubitModel& qubit(const std::string& name) const;
  /// World with the active qubit and the stage at its initial position.
  virtlab::World make_world() const;
};

LabConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LabConfig& c);
LabConfig load_config(const std::filesystem::path& path);

/// Resolution order: explicit path, MAGLAB_CONFIG, ./maglab.json, built-in
/// defaults. Sets `source` to the file used or "<defaults>".
LabConfig resolve_config(const std::optional<std::filesystem::path>& explicit_path, std::string* source = nullptr);

/// Throws ValidationError naming the first key of `j` not in `allowed`.
void require_known_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where);

}  // namespace maglab
