// Domain types shared across the tuner.
//
// Unit conventions, fixed repo-wide: sizes in bytes, throughput in
// bits/second, time in seconds.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace xfertune {

struct ParamBounds {
  int cc_max = 32;
  int p_max = 32;
  int pp_max = 32;
};

// (concurrency, parallelism, pipelining) decision variables.
// Construction validates range; out-of-range values throw instead of
// being clamped silently.
struct ParamTriple {
  int cc = 1;
  int p = 1;
  int pp = 1;

  ParamTriple() = default;
  ParamTriple(int cc_, int p_, int pp_, const ParamBounds& bounds = {});

  bool operator==(const ParamTriple&) const = default;
};

std::string to_string(const ParamTriple& t);

struct NetworkProfile {
  double bandwidth_bps = 0;
  double rtt_s = 0;
  double buffer_bytes = 0;

  NetworkProfile() = default;
  NetworkProfile(double bandwidth_bps_, double rtt_s_, double buffer_bytes_);

  // In-flight byte capacity of the path.
  double bdp_bytes() const { return bandwidth_bps / 8.0 * rtt_s; }
};

struct FileInfo {
  std::string path;
  std::uint64_t size = 0;
};

enum class ChunkType { Tiny, Small, Medium, Large };

std::string to_string(ChunkType t);
ChunkType parse_chunk_type(const std::string& s);
int chunk_type_code(ChunkType t);  // {Tiny..Large} -> {1..4}

// File-size class boundaries as multiples of the path BDP. Ties belong
// to the smaller class.
struct ChunkThresholds {
  double tiny_bdp = 0.05;
  double small_bdp = 0.5;
  double medium_bdp = 5.0;
};

ChunkType classify_file(std::uint64_t size, const NetworkProfile& network,
                        const ChunkThresholds& thresholds = {});

// A group of same-class files transferred under one ParamTriple.
struct Chunk {
  ChunkType type = ChunkType::Tiny;
  std::vector<FileInfo> files;
  std::uint64_t total_size = 0;
  double avg_file_size = 0;
};

Chunk make_chunk(ChunkType type, std::vector<FileInfo> files);

// One logged transfer: features + parameters + achieved throughput.
struct HistoryEntry {
  std::string source;
  std::string destination;
  NetworkProfile network;
  ChunkType chunk_type = ChunkType::Tiny;
  double avg_file_size = 0;
  int file_count = 0;
  ParamTriple params;
  double throughput_bps = 0;
  std::int64_t collected_at = 0;  // seconds since epoch
  std::string session_id;         // groups entries of one sweep run
};

struct ChunkDecision {
  ParamTriple params;
  double unit_throughput_bps = 0;  // estimate at concurrency 1
  double estimated_throughput_bps = 0;
};

inline constexpr int kFeatureCount = 6;

// Raw (unnormalized) similarity features in fixed order: bandwidth,
// rtt, bdp/buffer, chunk type code, avg file size, file count.
std::array<double, kFeatureCount> raw_features(const NetworkProfile& network,
                                               ChunkType chunk_type,
                                               double avg_file_size,
                                               double file_count);
std::array<double, kFeatureCount> raw_features(const HistoryEntry& e);

}  // namespace xfertune
