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

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

using namespace maglab;
using nlohmann::json;

namespace {

void write_json(const std::filesystem::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

std::string error_of(const json& j) {
  try {
    config_from_json(j).validate();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

class CwdGuard {
 public:
  explicit CwdGuard(const std::filesystem::path& p) : old_(std::filesystem::current_path()) {
    std::filesystem::current_path(p);
  }
  ~CwdGuard() { std::filesystem::current_path(old_); }

 private:
  std::filesystem::path old_;
};

class EnvGuard {
 public:
  EnvGuard(const char* name, const std::string& value) : name_(name) {
    if (const char* v = std::getenv(name)) old_ = v;
    setenv(name, value.c_str(), 1);
  }
  ~EnvGuard() {
    if (old_) setenv(name_, old_->c_str(), 1);
    else unsetenv(name_);
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

}  // namespace

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(LabConfig{}.validate()); }

TEST(Config, JsonRoundTrip) {
  LabConfig c;
  c.seed = 99;
  c.solenoid.setpoint_t = 0.05;
  c.stage.backlash.eps_per_event_mm = {0.05, 0.01, 0.02};
  c.active_qubit = "Q3";
  c.resonator.enabled = true;
  c.server.port = 9123;
  c.scenarios = {{"my_line", {{"kind", "line"}, {"points", 5}}}};
  const json j = to_json(c);
  const LabConfig back = config_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_NO_THROW(back.validate());
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.active_qubit, "Q3");
}

TEST(Config, UnknownKeysRejected) {
  json j = to_json(LabConfig{});
  j["colour"] = "blue";
  EXPECT_NE(error_of(j).find("colour"), std::string::npos);
  j = to_json(LabConfig{});
  j["magnet"]["flux"] = 1;
  EXPECT_NE(error_of(j).find("flux"), std::string::npos);
  j = to_json(LabConfig{});
  j["qubits"]["Q8"]["spin"] = 0.5;
  EXPECT_NE(error_of(j).find("spin"), std::string::npos);
}

TEST(Config, SolenoidAboveLimitFailsToLoad) {
  tst::TempDir dir;
  json j = to_json(LabConfig{});
  j["solenoid"]["setpoint_t"] = 3.5;
  write_json(dir / "c.json", j);
  try {
    load_config(dir / "c.json").validate();
    FAIL() << "expected rejection";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("3 T limit"), std::string::npos) << e.what();
  }
}

TEST(Config, BadValuesRejected) {
  json j = to_json(LabConfig{});
  j["active_qubit"] = "Q99";
  EXPECT_FALSE(error_of(j).empty());
  j = to_json(LabConfig{});
  j["stage"]["initial_mm"] = {0.0, 0.0, 500.0};
  EXPECT_FALSE(error_of(j).empty());
  j = to_json(LabConfig{});
  j["seed"] = "many";
  EXPECT_FALSE(error_of(j).empty());
  j = to_json(LabConfig{});
  j["magnet"]["dims_mm"] = {1.0, 2.0};
  EXPECT_FALSE(error_of(j).empty());
}

TEST(Config, ScenarioReferencesResolve) {
  json j = to_json(LabConfig{});
  j["scenarios"] = {{"q_missing", {{"kind", "line"}, {"qubit", "Q42"}}}};
  EXPECT_FALSE(error_of(j).empty());
  j["scenarios"] = {{"bad_kind", {{"kind", "teleport"}}}};
  EXPECT_FALSE(error_of(j).empty());
}

TEST(Config, MalformedFile) {
  tst::TempDir dir;
  std::ofstream(dir / "c.json") << "{ not json";
  EXPECT_THROW(load_config(dir / "c.json"), ValidationError);
  EXPECT_THROW(load_config(dir / "missing.json"), NotFoundError);
}

TEST(Config, RelativePathsFollowConfigFile) {
  tst::TempDir dir;
  std::filesystem::create_directories(dir / "etc");
  write_json(dir / "etc/c.json", {{"data_dir", "../data"}});
  const auto c = load_config(dir / "etc/c.json");
  EXPECT_EQ(c.data_dir, dir / "etc/../data");
  EXPECT_EQ(c.run_log, dir / "etc/../data/runlog.jsonl");
}

TEST(Config, ResolutionOrder) {
  tst::TempDir dir;
  write_json(dir / "env.json", {{"seed", 1}});
  write_json(dir / "explicit.json", {{"seed", 2}});
  write_json(dir / "maglab.json", {{"seed", 3}});
  CwdGuard cwd(dir.path());
  std::string source;
  {
    EnvGuard env("MAGLAB_CONFIG", (dir / "env.json").string());
    EXPECT_EQ(resolve_config(dir / "explicit.json", &source).seed, 2u);
    EXPECT_EQ(source, (dir / "explicit.json").string());
    EXPECT_EQ(resolve_config(std::nullopt, &source).seed, 1u);
    EXPECT_EQ(source, (dir / "env.json").string());
  }
  {
    EnvGuard env("MAGLAB_CONFIG", "");
    EXPECT_EQ(resolve_config(std::nullopt, &source).seed, 3u);
    std::filesystem::remove(dir / "maglab.json");
    EXPECT_EQ(resolve_config(std::nullopt, &source).seed, LabConfig{}.seed);
    EXPECT_EQ(source, "<defaults>");
  }
}

TEST(Config, ShippedConfigLoads) {
  const auto c = load_config(std::filesystem::path(MAGLAB_SOURCE_DIR) / "config/maglab.json");
  EXPECT_NO_THROW(c.validate());
  EXPECT_NEAR(c.magnet.remanence_t, device::kAnchorRemanence, 1e-9);
  for (const auto& n : calibrate::scenario_names(c)) EXPECT_NO_THROW(calibrate::find_scenario(c, n)) << n;
}
