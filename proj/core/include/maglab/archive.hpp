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
#include "maglab/lab.hpp"
#include "maglab/runlog.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace maglab::labd {

/// Run payloads as JSON files under <data_dir>/payloads/.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path data_dir);

  /// Writes the record atomically and returns its path relative to data_dir.
  std::string save(const virtlab::RunRecord& r) const;
  /// Throws NotFoundError for an unknown id.
  virtlab::RunRecord load(std::uint64_t id) const;
  bool contains(std::uint64_t id) const;
  /// Stored ids in ascending order.
  std::vector<std::uint64_t> ids() const;
  std::uint64_t max_id() const;

  /// Trace CSV of a stored run. Throws NotFoundError for an unknown id.
  void export_csv(std::uint64_t id, const std::filesystem::path& out) const;

  static std::string payload_name(std::uint64_t id);
  const std::filesystem::path& data_dir() const { return data_dir_; }

 private:
  std::filesystem::path data_dir_;
};

/// Run log plus payload store: the persistent record of a lab.
class Archive {
 public:
  Archive(std::filesystem::path data_dir, std::filesystem::path run_log, bool fsync = false);
  explicit Archive(const LabConfig& config);

  RunLog& log() { return *log_; }
  const RunLog& log() const { return *log_; }
  RunStore& store() { return store_; }
  const RunStore& store() const { return store_; }

  std::uint64_t reserve_run_id() { return next_id_++; }

  /// Persists the payload, then appends a log entry pointing at it. Assigns
  /// r.id when it is zero. Returns the log seq.
  std::uint64_t record(virtlab::RunRecord& r, nlohmann::json extra = nlohmann::json::object());
  /// Log entry without a payload (stage moves, solenoid changes, ...).
  std::uint64_t note(const std::string& kind, const StagePosition& position, nlohmann::json extra = nlohmann::json::object(),
                     std::uint64_t seed = 0);

  /// Observer that records every run a Lab emits.
  virtlab::RunObserver observer();

 private:
  RunStore store_;
  std::unique_ptr<RunLog> log_;
  std::atomic<std::uint64_t> next_id_{1};
};

}  // namespace maglab::labd
