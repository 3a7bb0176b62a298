// Weighted cosine similarity over normalized transfer features,
// adaptive-threshold filtering, and session grouping.

#pragma once

#include <array>
#include <string>
#include <vector>

#include "xfertune/core.hpp"
#include "xfertune/history.hpp"

namespace xfertune::similarity {

// Per-feature weights for {bandwidth, rtt, bdp/buffer, chunk type,
// avg file size, file count}.
inline constexpr std::array<double, kFeatureCount> kFeatureWeights = {2, 2, 10,
                                                                      10, 3, 1};

// Min-max normalized to [0,1], then scaled by the feature weights.
struct FeatureVector {
  std::array<double, kFeatureCount> v{};
};

// Normalization bounds over a store extended by the query point, so an
// out-of-range query still lands in [0,1]. A feature with min == max
// normalizes to 1 (it carries no distinguishing information).
struct NormalizationBounds {
  std::array<double, kFeatureCount> min{};
  std::array<double, kFeatureCount> max{};

  static NormalizationBounds over(const history::FeatureStats& stats,
                                  const std::array<double, kFeatureCount>& query);
  FeatureVector build(const std::array<double, kFeatureCount>& raw) const;
};

// Symmetric, in [0,1]; throws on an all-zero vector.
double cosine_similarity(const FeatureVector& a, const FeatureVector& b);

struct ScoredEntry {
  HistoryEntry entry;
  double similarity = 0;
};

struct FilterResult {
  std::vector<ScoredEntry> entries;
  double threshold = 0;  // final accepted threshold
  bool underfilled = false;  // store smaller than min_entries
};

// Threshold walk: start 0.99, step -0.01, floor 0.5; stops as soon as
// at least min_entries survive.
FilterResult filter_similar(const history::HistoryStore& store,
                            const std::array<double, kFeatureCount>& query_raw,
                            int min_entries);

struct EntryGroup {
  std::string session_id;
  NetworkProfile network;
  ChunkType chunk_type = ChunkType::Tiny;
  double avg_file_size = 0;
  int file_count = 0;
  std::vector<HistoryEntry> members;
};

inline constexpr int kMinGroupSize = 27;

// Partition by session id; groups below min_group members are dropped.
std::vector<EntryGroup> group_by_session(const std::vector<HistoryEntry>& entries,
                                         int min_group = kMinGroupSize);
std::vector<EntryGroup> group_by_session(const std::vector<ScoredEntry>& entries,
                                         int min_group = kMinGroupSize);

}  // namespace xfertune::similarity
