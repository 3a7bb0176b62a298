#include "xfertune/core.hpp"

#include <cmath>
#include <stdexcept>

namespace xfertune {

ParamTriple::ParamTriple(int cc_, int p_, int pp_, const ParamBounds& bounds)
    : cc(cc_), p(p_), pp(pp_) {
  if (cc < 1 || cc > bounds.cc_max)
    throw std::invalid_argument("concurrency out of range [1," +
                                std::to_string(bounds.cc_max) + "]: " +
                                std::to_string(cc));
  if (p < 1 || p > bounds.p_max)
    throw std::invalid_argument("parallelism out of range [1," +
                                std::to_string(bounds.p_max) + "]: " +
                                std::to_string(p));
  if (pp < 1 || pp > bounds.pp_max)
    throw std::invalid_argument("pipelining out of range [1," +
                                std::to_string(bounds.pp_max) + "]: " +
                                std::to_string(pp));
}

std::string to_string(const ParamTriple& t) {
  return "(" + std::to_string(t.cc) + "," + std::to_string(t.p) + "," +
         std::to_string(t.pp) + ")";
}

NetworkProfile::NetworkProfile(double bandwidth_bps_, double rtt_s_,
                               double buffer_bytes_)
    : bandwidth_bps(bandwidth_bps_), rtt_s(rtt_s_), buffer_bytes(buffer_bytes_) {
  if (!(bandwidth_bps > 0) || !(rtt_s > 0) || !(buffer_bytes > 0))
    throw std::invalid_argument("network profile fields must be positive");
}

std::string to_string(ChunkType t) {
  switch (t) {
    case ChunkType::Tiny: return "tiny";
    case ChunkType::Small: return "small";
    case ChunkType::Medium: return "medium";
    case ChunkType::Large: return "large";
  }
  return "unknown";
}

ChunkType parse_chunk_type(const std::string& s) {
  if (s == "tiny") return ChunkType::Tiny;
  if (s == "small") return ChunkType::Small;
  if (s == "medium") return ChunkType::Medium;
  if (s == "large") return ChunkType::Large;
  throw std::invalid_argument("unknown chunk type: " + s);
}

int chunk_type_code(ChunkType t) { return static_cast<int>(t) + 1; }

ChunkType classify_file(std::uint64_t size, const NetworkProfile& network,
                        const ChunkThresholds& thresholds) {
  if (size == 0) throw std::invalid_argument("file size must be positive");
  const double bdp = network.bdp_bytes();
  const double s = static_cast<double>(size);
  if (s <= thresholds.tiny_bdp * bdp) return ChunkType::Tiny;
  if (s <= thresholds.small_bdp * bdp) return ChunkType::Small;
  if (s <= thresholds.medium_bdp * bdp) return ChunkType::Medium;
  return ChunkType::Large;
}

Chunk make_chunk(ChunkType type, std::vector<FileInfo> files) {
  if (files.empty()) throw std::invalid_argument("chunk must contain files");
  Chunk c;
  c.type = type;
  c.total_size = 0;
  for (const auto& f : files) {
    if (f.size == 0)
      throw std::invalid_argument("file size must be positive: " + f.path);
    c.total_size += f.size;
  }
  c.avg_file_size =
      static_cast<double>(c.total_size) / static_cast<double>(files.size());
  c.files = std::move(files);
  return c;
}

std::array<double, kFeatureCount> raw_features(const NetworkProfile& network,
                                               ChunkType chunk_type,
                                               double avg_file_size,
                                               double file_count) {
  return {network.bandwidth_bps,
          network.rtt_s,
          network.bdp_bytes() / network.buffer_bytes,
          static_cast<double>(chunk_type_code(chunk_type)),
          avg_file_size,
          file_count};
}

std::array<double, kFeatureCount> raw_features(const HistoryEntry& e) {
  return raw_features(e.network, e.chunk_type, e.avg_file_size,
                      static_cast<double>(e.file_count));
}

}  // namespace xfertune
