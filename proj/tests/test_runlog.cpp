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

#include "maglab/archive.hpp"
#include "maglab/runlog.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <thread>

using namespace maglab;
using namespace maglab::labd;

namespace {

LogEntry entry(const std::string& kind) {
  LogEntry e;
  e.kind = kind;
  e.position = {1.0, 2.0, -200.0};
  e.seed = 42;
  return e;
}

virtlab::RunRecord record(std::uint64_t id) {
  virtlab::RunRecord r;
  r.id = id;
  r.kind = virtlab::RunKind::Ramsey;
  r.commanded = {-10.0, 0.0, -200.0};
  r.true_pos = r.commanded;
  r.sweep = {0.0, 1e-6, 2e-6, 3.3e-6};
  r.counts = {100, 73, 51, 0};
  r.shots = 200;
  r.seed = 99;
  r.timestamp = "2026-01-01T00:00:00Z";
  r.params = {{"detuning_hz", 250000.0}};
  return r;
}

void append_raw(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::app);
  out << s;
}

}  // namespace

TEST(RunLog, SequenceStartsAtOneAndIncrements) {
  tst::TempDir dir;
  RunLog log(dir / "log.jsonl");
  EXPECT_EQ(log.append(entry("move")), 1u);
  EXPECT_EQ(log.append(entry("run")), 2u);
  EXPECT_EQ(log.next_seq(), 3u);
  const auto r = read_run_log(dir / "log.jsonl");
  ASSERT_EQ(r.entries.size(), 2u);
  EXPECT_EQ(r.entries[1].seq, 2u);
  EXPECT_EQ(r.entries[1].kind, "run");
  EXPECT_FALSE(r.truncated_tail);
}

TEST(RunLog, LineCarriesCoreFields) {
  tst::TempDir dir;
  {
    RunLog log(dir / "log.jsonl");
    auto e = entry("run");
    e.payload_path = "payloads/run-000001.json";
    e.extra = {{"run_id", 1}, {"scenario", "fig2_bin5mT"}};
    log.append(e);
  }
  const auto text = tst::slurp(dir / "log.jsonl");
  ASSERT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  const auto j = nlohmann::json::parse(text);
  for (const char* k : {"seq", "iso8601_utc", "kind", "position", "seed", "payload_path"}) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["payload_path"], "payloads/run-000001.json");
  EXPECT_EQ(j["scenario"], "fig2_bin5mT");
  EXPECT_EQ(j["seed"], 42);
  EXPECT_EQ(j["iso8601_utc"].get<std::string>().back(), 'Z');
  const auto back = log_entry_from_json(j);
  EXPECT_EQ(back.position.z, -200.0);
  EXPECT_EQ(back.extra["run_id"], 1);
}

TEST(RunLog, ReopenContinuesNumbering) {
  tst::TempDir dir;
  { RunLog log(dir / "log.jsonl"); for (int i = 0; i < 5; ++i) log.append(entry("x")); }
  RunLog log(dir / "log.jsonl");
  EXPECT_FALSE(log.recovered_truncated_tail());
  EXPECT_EQ(log.append(entry("x")), 6u);
}

TEST(RunLog, TruncatedTailIsCutAndNumberingResumes) {
  tst::TempDir dir;
  { RunLog log(dir / "log.jsonl"); for (int i = 0; i < 3; ++i) log.append(entry("x")); }
  const auto good = std::filesystem::file_size(dir / "log.jsonl");
  append_raw(dir / "log.jsonl", R"({"seq":4,"iso8601_utc":"2026-)");
  const auto r = read_run_log(dir / "log.jsonl");
  EXPECT_TRUE(r.truncated_tail);
  EXPECT_EQ(r.entries.size(), 3u);
  EXPECT_EQ(r.valid_bytes, good);

  RunLog log(dir / "log.jsonl");
  EXPECT_TRUE(log.recovered_truncated_tail());
  EXPECT_EQ(std::filesystem::file_size(dir / "log.jsonl"), good);
  EXPECT_EQ(log.append(entry("x")), 4u);
  const auto after = read_run_log(dir / "log.jsonl");
  EXPECT_FALSE(after.truncated_tail);
  ASSERT_EQ(after.entries.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(after.entries[i].seq, i + 1);
}

TEST(RunLog, CorruptInteriorLineThrows) {
  tst::TempDir dir;
  { RunLog log(dir / "log.jsonl"); log.append(entry("x")); }
  append_raw(dir / "log.jsonl", "garbage\n");
  append_raw(dir / "log.jsonl", R"({"seq":2,"iso8601_utc":"2026-01-01T00:00:00Z","kind":"x","position":[0,0,0],"seed":0,"payload_path":null})" "\n");
  EXPECT_THROW(read_run_log(dir / "log.jsonl"), ValidationError);
}

TEST(RunLog, MissingFileReadsEmpty) {
  tst::TempDir dir;
  RunLog log(dir / "sub" / "log.jsonl");
  EXPECT_EQ(log.next_seq(), 1u);
  EXPECT_TRUE(read_run_log(dir / "sub" / "log.jsonl").entries.empty());
}

TEST(RunLog, WriteFailureMakesLogReadOnly) {
  if (!std::filesystem::exists("/dev/full")) GTEST_SKIP() << "no /dev/full";
  RunLog log("/dev/full");
  EXPECT_FALSE(log.read_only());
  EXPECT_THROW(log.append(entry("x")), LogWriteError);
  EXPECT_TRUE(log.read_only());
  EXPECT_FALSE(log.error().empty());
  EXPECT_THROW(log.append(entry("x")), LogWriteError);
  EXPECT_TRUE(log.read_only());
  EXPECT_EQ(log.next_seq(), 1u);
}

TEST(RunLog, UnopenableLogIsReadOnly) {
  tst::TempDir dir;
  std::filesystem::create_directories(dir / "adir");
  RunLog log(dir / "adir");
  EXPECT_TRUE(log.read_only());
  EXPECT_THROW(log.append(entry("x")), LogWriteError);
}

TEST(RunLog, ConcurrentAppendsAreGapless) {
  tst::TempDir dir;
  RunLog log(dir / "log.jsonl");
  constexpr int kThreads = 8, kPer = 250;
  std::vector<std::thread> ts;
  std::vector<std::vector<std::uint64_t>> got(kThreads);
  for (int t = 0; t < kThreads; ++t)
    ts.emplace_back([&, t] {
      for (int i = 0; i < kPer; ++i) got[t].push_back(log.append(entry("t" + std::to_string(t))));
    });
  for (auto& t : ts) t.join();
  std::set<std::uint64_t> all;
  for (const auto& g : got) {
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_LT(g[i - 1], g[i]);
    all.insert(g.begin(), g.end());
  }
  EXPECT_EQ(all.size(), static_cast<std::size_t>(kThreads * kPer));
  EXPECT_EQ(*all.begin(), 1u);
  EXPECT_EQ(*all.rbegin(), static_cast<std::uint64_t>(kThreads * kPer));
  const auto r = read_run_log(dir / "log.jsonl");
  ASSERT_EQ(r.entries.size(), static_cast<std::size_t>(kThreads * kPer));
  for (std::size_t i = 0; i < r.entries.size(); ++i) EXPECT_EQ(r.entries[i].seq, i + 1);
}

TEST(RunStore, SaveLoadRoundTrip) {
  tst::TempDir dir;
  RunStore store(dir.path());
  const auto r = record(7);
  const auto rel = store.save(r);
  EXPECT_TRUE(std::filesystem::exists(dir / rel));
  EXPECT_TRUE(store.contains(7));
  const auto back = store.load(7);
  EXPECT_EQ(virtlab::to_json(back), virtlab::to_json(r));
  EXPECT_THROW(store.load(8), NotFoundError);
  EXPECT_EQ(store.ids(), std::vector<std::uint64_t>{7});
  EXPECT_EQ(store.max_id(), 7u);
}

TEST(RunStore, ExportCsvMatchesCounts) {
  tst::TempDir dir;
  RunStore store(dir.path());
  const auto r = record(3);
  store.save(r);
  store.export_csv(3, dir / "out" / "trace.csv");
  const auto text = tst::slurp(dir / "out" / "trace.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "sweep_value,counts,shots,p_blockade");
  EXPECT_EQ(text.find('\r'), std::string::npos);
  const auto rows = virtlab::read_trace_csv(dir / "out" / "trace.csv");
  ASSERT_EQ(rows.size(), r.sweep.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].sweep_value, r.sweep[i]);
    EXPECT_EQ(rows[i].counts, r.counts[i]);
    EXPECT_EQ(rows[i].shots, r.shots);
    EXPECT_EQ(rows[i].p_blockade, static_cast<double>(r.counts[i]) / static_cast<double>(r.shots));
  }
  EXPECT_THROW(store.export_csv(4, dir / "x.csv"), NotFoundError);
}

TEST(Archive, RecordWritesPayloadThenLog) {
  tst::TempDir dir;
  Archive a(dir / "data", dir / "data" / "runlog.jsonl");
  auto r = record(0);
  const auto seq = a.record(r, {{"scenario", "s"}});
  EXPECT_EQ(r.id, 1u);
  EXPECT_EQ(seq, 1u);
  a.note("move", {0, 0, -200});
  const auto log = read_run_log(dir / "data" / "runlog.jsonl");
  ASSERT_EQ(log.entries.size(), 2u);
  EXPECT_EQ(log.entries[0].kind, "ramsey");
  ASSERT_TRUE(log.entries[0].payload_path);
  EXPECT_TRUE(std::filesystem::exists(dir / "data" / *log.entries[0].payload_path));
  EXPECT_EQ(log.entries[0].seed, 99u);
  EXPECT_FALSE(log.entries[1].payload_path);
}

TEST(Archive, ReopenContinuesRunIds) {
  tst::TempDir dir;
  {
    Archive a(dir / "d", dir / "d" / "log.jsonl");
    auto r = record(0);
    a.record(r);
    auto r2 = record(0);
    a.record(r2);
  }
  Archive a(dir / "d", dir / "d" / "log.jsonl");
  EXPECT_EQ(a.reserve_run_id(), 3u);
  EXPECT_EQ(a.log().next_seq(), 3u);
}
