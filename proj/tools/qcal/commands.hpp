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

#include "maglab/config.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qcal {

struct Common {
  maglab::LabConfig config;
  std::string source;
  std::optional<std::uint64_t> seed;
};

int list_scenarios(const Common& c, std::ostream& out);
int run_scenario(const Common& c, const std::string& name, const std::optional<std::filesystem::path>& out_root,
                 std::ostream& out);
int sweet_spot(const Common& c, double lo, double hi, const std::string& axis, int budget, double solenoid_t,
               const std::string& qubit, std::ostream& out);
int rb(const Common& c, const std::vector<int>& lengths, int randomizations, long shots, double f_native,
       std::ostream& out);
int export_run(const Common& c, std::uint64_t id, const std::filesystem::path& path, std::ostream& out);
int plot_run(const Common& c, std::uint64_t id, const std::optional<std::filesystem::path>& path, std::ostream& out);
int plot_bundle(const std::filesystem::path& dir, std::ostream& out);

}  // namespace qcal
