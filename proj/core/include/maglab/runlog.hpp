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

#include "maglab/common.hpp"
#include "maglab/run_record.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace maglab::labd {

/// Raised when the log cannot be written; the log is read-only afterwards.
struct LogWriteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One line of the run log.
///
/// Core fields are {seq, iso8601_utc, kind, position, seed, payload_path};
/// `extra` carries optional context (run_id, scenario, ticket, ...) and is
/// merged into the same JSON object.
struct LogEntry {
  std::uint64_t seq = 0;
  std::string iso8601_utc;
  std::string kind;
  StagePosition position;
  std::uint64_t seed = 0;
  std::optional<std::string> payload_path;
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json to_json(const LogEntry& e);
LogEntry log_entry_from_json(const nlohmann::json& j);

struct LogReadResult {
  std::vector<LogEntry> entries;
  /// Byte length of the valid prefix.
  std::uintmax_t valid_bytes = 0;
  bool truncated_tail = false;
};

/// Parses a log file. A final line that is incomplete or unparsable is
/// reported as a truncated tail; a bad interior line throws ValidationError.
LogReadResult read_run_log(const std::filesystem::path& path);

/// Append-only JSON-lines log with strictly increasing, gapless sequence
/// numbers. Thread-safe.
class RunLog {
 public:
  struct Options {
    bool fsync = false;
  };

  /// Opens (creating if needed) and recovers: a truncated final line is cut
  /// off and numbering continues after the last complete entry.
  explicit RunLog(std::filesystem::path path);
  RunLog(std::filesystem::path path, Options opts);
  ~RunLog();
  RunLog(const RunLog&) = delete;
  RunLog& operator=(const RunLog&) = delete;

  /// Assigns seq (and the timestamp when empty), writes one line and returns
  /// the seq. Throws LogWriteError on failure and stays read-only after it.
  std::uint64_t append(LogEntry e);

  bool read_only() const;
  std::string error() const;
  std::uint64_t next_seq() const;
  bool recovered_truncated_tail() const { return recovered_tail_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  Options opts_;
  mutable std::mutex mu_;
  int fd_ = -1;
  std::uint64_t next_seq_ = 1;
  bool read_only_ = false;
  bool recovered_tail_ = false;
  std::string error_;
};

}  // namespace maglab::labd
