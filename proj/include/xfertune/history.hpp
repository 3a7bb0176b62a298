// Persistence and ingestion of transfer logs.
//
// On-disk format: one record per line, space-separated key=value pairs
// with self-describing field names (see kRecordFields). Appendable and
// human-diffable.

#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "xfertune/core.hpp"

namespace xfertune::history {

inline constexpr const char* kRecordFields[] = {
    "source",        "destination", "bandwidth_bps", "rtt_s",
    "buffer_bytes",  "chunk_type",  "avg_file_size_bytes",
    "file_count",    "cc",          "p",             "pp",
    "throughput_bps", "collected_at", "session_id"};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& field, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ", field '" +
                           field + "': " + what),
        line_(line), field_(field) {}
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

std::string to_record(const HistoryEntry& e);
HistoryEntry parse_record(const std::string& line, std::size_t line_number = 0);

// Min/max over the store per raw similarity feature, kept consistent
// with the entries across mutations.
struct FeatureStats {
  std::array<double, kFeatureCount> min{};
  std::array<double, kFeatureCount> max{};
  bool empty = true;

  void extend(const std::array<double, kFeatureCount>& raw);
};

class HistoryStore {
 public:
  HistoryStore() = default;

  // Reads every record; throws ParseError naming the first bad line and
  // field. An empty file yields an empty store. Records without a
  // session id are bucketed into synthetic sessions afterwards.
  static HistoryStore load(const std::string& path);

  // Writes all entries; the store stays attached to the path so later
  // appends persist.
  void save(const std::string& path);

  // Validates and appends; persists to the attached file if any.
  void append(const std::vector<HistoryEntry>& entries);

  // Drops entries older than the cutoff (keeps collected_at >= cutoff)
  // and rewrites the attached file if any.
  void prune_older_than(std::int64_t cutoff);

  const std::vector<HistoryEntry>& entries() const { return entries_; }
  const FeatureStats& feature_stats() const { return stats_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  void rebuild_stats();
  void persist_all() const;

  std::vector<HistoryEntry> entries_;
  FeatureStats stats_;
  std::string path_;  // empty -> in-memory only
};

// Groups session-less entries: same (source, destination, chunk type,
// dataset) within a 30-minute window share one synthetic session.
void assign_missing_sessions(std::vector<HistoryEntry>& entries);

}  // namespace xfertune::history
