#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "xfertune/history.hpp"
#include "xfertune/simnet.hpp"

using namespace xfertune;
using history::HistoryStore;

namespace {

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const std::string& name)
      : path(std::filesystem::temp_directory_path() /
             ("xfertune-" + name + "-" + std::to_string(::getpid()))) {}
  ~TempFile() { std::filesystem::remove(path); }
  std::string str() const { return path.string(); }
};

HistoryEntry sample_entry(int i = 0) {
  HistoryEntry e;
  e.source = "src";
  e.destination = "dst";
  e.network = NetworkProfile(10e9, 0.04, 32e6);
  e.chunk_type = ChunkType::Small;
  e.avg_file_size = 2.5e7 + i;
  e.file_count = 10 + i;
  e.params = ParamTriple(1 + i % 32, 2, 4);
  e.throughput_bps = 1e9 + i * 1e6;
  e.collected_at = 1'600'000'000 + i;
  e.session_id = "sweep-" + std::to_string(i / 216);
  return e;
}

std::vector<HistoryEntry> sweep_216() {
  std::vector<HistoryEntry> entries;
  for (int k = 0; k < 216; ++k) entries.push_back(sample_entry(k));
  for (auto& e : entries) e.session_id = "one-sweep";
  return entries;
}

}  // namespace

TEST_CASE("record round-trips field for field") {
  const auto e = sample_entry(7);
  const auto back = history::parse_record(history::to_record(e), 1);
  CHECK(back.source == e.source);
  CHECK(back.destination == e.destination);
  CHECK(back.network.bandwidth_bps == e.network.bandwidth_bps);
  CHECK(back.network.rtt_s == e.network.rtt_s);
  CHECK(back.network.buffer_bytes == e.network.buffer_bytes);
  CHECK(back.chunk_type == e.chunk_type);
  CHECK(back.avg_file_size == e.avg_file_size);
  CHECK(back.file_count == e.file_count);
  CHECK(back.params == e.params);
  CHECK(back.throughput_bps == e.throughput_bps);
  CHECK(back.collected_at == e.collected_at);
  CHECK(back.session_id == e.session_id);
}

TEST_CASE("a 216-line file loads completely") {
  TempFile f("sweep");
  {
    HistoryStore store;
    store.append(sweep_216());
    store.save(f.str());
  }
  const auto loaded = HistoryStore::load(f.str());
  CHECK(loaded.size() == 216);
  const auto& entries = loaded.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CHECK(entries[i].throughput_bps == sample_entry(static_cast<int>(i)).throughput_bps);
    CHECK(entries[i].params == sample_entry(static_cast<int>(i)).params);
  }
}

TEST_CASE("missing field is reported with line number and field name") {
  TempFile f("badline");
  {
    std::ofstream out(f.str());
    out << history::to_record(sample_entry(0)) << '\n';
    std::string bad = history::to_record(sample_entry(1));
    const auto pos = bad.find(" throughput_bps=");
    const auto end = bad.find(' ', pos + 1);
    bad.erase(pos, end - pos);
    out << bad << '\n';
  }
  try {
    HistoryStore::load(f.str());
    FAIL("expected ParseError");
  } catch (const history::ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.field() == "throughput_bps");
  }
}

TEST_CASE("empty file loads as an empty store") {
  TempFile f("empty");
  { std::ofstream out(f.str()); }
  const auto store = HistoryStore::load(f.str());
  CHECK(store.empty());
}

TEST_CASE("append extends entries, stats, and the backing file") {
  TempFile f("append");
  HistoryStore store;
  store.append(sweep_216());
  store.save(f.str());
  CHECK(store.size() == 216);

  auto extra = sample_entry(0);
  extra.network = NetworkProfile(40e9, 0.1, 32e6);  // extends bandwidth max
  store.append({extra});
  CHECK(store.size() == 217);
  CHECK(store.feature_stats().max[0] == doctest::Approx(40e9));

  // duplicates are legitimate repeats
  store.append({extra});
  CHECK(store.size() == 218);

  const auto reloaded = HistoryStore::load(f.str());
  CHECK(reloaded.size() == 218);

  auto bad = sample_entry(0);
  bad.throughput_bps = 0;
  CHECK_THROWS_AS(store.append({bad}), std::invalid_argument);
  bad.throughput_bps = -5;
  CHECK_THROWS_AS(store.append({bad}), std::invalid_argument);
}

TEST_CASE("prune keeps entries at or after the cutoff") {
  HistoryStore store;
  std::vector<HistoryEntry> entries;
  for (int i = 0; i < 50; ++i) {
    auto e = sample_entry(i);
    e.collected_at = 1000 + 10 * i;
    entries.push_back(e);
  }
  store.append(entries);

  SUBCASE("cutoff before all entries leaves the store unchanged") {
    store.prune_older_than(0);
    CHECK(store.size() == 50);
  }
  SUBCASE("cutoff after all entries empties the store") {
    store.prune_older_than(10'000);
    CHECK(store.size() == 0);
  }
  SUBCASE("mixed cutoff matches a brute-force scan") {
    const std::int64_t cutoff = 1234;
    std::size_t expected = 0;
    for (const auto& e : entries)
      if (e.collected_at >= cutoff) ++expected;
    store.prune_older_than(cutoff);
    CHECK(store.size() == expected);
    for (const auto& e : store.entries()) CHECK(e.collected_at >= cutoff);
  }
}

TEST_CASE("session-less entries are bucketed by 30-minute windows") {
  std::vector<HistoryEntry> entries;
  for (int i = 0; i < 4; ++i) {
    auto e = sample_entry(0);
    e.session_id.clear();
    e.collected_at = 1'600'000'000 + i * 601;  // fourth lands past 30 min
    entries.push_back(e);
  }
  auto far = sample_entry(0);
  far.session_id.clear();
  far.collected_at = 1'600'000'000 + 7200;  // two hours later
  entries.push_back(far);
  auto different = sample_entry(0);
  different.session_id.clear();
  different.source = "elsewhere";
  different.collected_at = 1'600'000'000;
  entries.push_back(different);

  history::assign_missing_sessions(entries);
  CHECK(entries[0].session_id == entries[1].session_id);
  CHECK(entries[0].session_id == entries[2].session_id);
  // past the 30-minute window a new bucket opens
  CHECK(entries[3].session_id != entries[0].session_id);
  CHECK(entries[4].session_id != entries[0].session_id);
  CHECK(entries[5].session_id != entries[0].session_id);
}

TEST_CASE("store footprint stays metadata-only") {
  TempFile f("size");
  HistoryStore store;
  store.append(sweep_216());
  store.save(f.str());
  const auto bytes = std::filesystem::file_size(f.path);
  // ~200 bytes per record, orders of magnitude below the data it describes
  CHECK(bytes < 216 * 400);
}
