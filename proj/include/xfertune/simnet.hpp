// Deterministic tick-driven transfer simulator.
//
// Rate model per tick: a channel carrying p flows runs at
//   p * min(buffer*8/rtt, bandwidth / active_flows)
//     * slow_start(t - channel_start) * pipelining_imbalance_penalty,
// and the foreground aggregate is capped by the file-system saturation
// curve at the current I/O op count. Background traffic enters only as
// a flow count. Events inside a tick (file completion, per-file control
// delay) are processed at exact sub-tick times; rates are recomputed at
// tick boundaries.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "xfertune/core.hpp"

namespace xfertune::sim {

inline constexpr double kTickSeconds = 0.1;

struct FsPoint {
  double ops = 0;          // concurrent I/O operations
  double bytes_per_s = 0;  // sustainable throughput at that level
};

struct TrafficPhase {
  double start_s = 0;
  double end_s = 0;
  int bg_flows = 0;
};

struct SimScenario {
  NetworkProfile network;
  std::vector<FsPoint> fs_profile;     // empty -> unlimited
  std::vector<TrafficPhase> traffic;   // sorted, non-overlapping
  double control_latency_s = -1;       // < 0 -> use network rtt
  double slow_start_tau_s = 2.0;
  double noise_sigma = 0.05;           // relative, in [0, 0.3]
  std::uint64_t seed = 1;

  void validate() const;
  double control_latency() const;
  // Linear interpolation over fs_profile, clamped at both ends.
  double fs_limit_bytes_per_s(double ops) const;
  int bg_flows_at(double t) const;
};

// Scenario used by the calibration tests and as the CLI fallback:
// 10 Gbps / 40 ms / 32 MB buffer path with a saturating fs curve.
SimScenario default_scenario();

struct TimelinePoint {
  double t_s = 0;
  double throughput_bps = 0;
  int flows = 0;  // foreground flows active during the tick
};

struct ChunkOutcome {
  double bytes = 0;
  double start_s = 0;
  double end_s = 0;
  double throughput_bps = 0;
};

struct SimResult {
  double aggregate_throughput_bps = 0;
  double duration_s = 0;
  std::vector<TimelinePoint> timeline;
  int flows_used = 0;  // peak foreground flows
  std::vector<ChunkOutcome> per_chunk;
};

// Throughput factor modelling uneven pre-assignment of files to
// channels when both concurrency and pipelining are high. Fitted so a
// 32-channel transfer of many files loses ~17% at pipelining 8 and
// ~10% at 16/32; no loss with a single channel or without pipelining.
double pipelining_imbalance_penalty(int cc, int pp, std::size_t file_count);

// Remaining work of one chunk inside a stopped session: whole files not
// yet started plus the unfinished remainder of in-flight files.
struct RemainingChunk {
  std::vector<FileInfo> files;
  std::uint64_t bytes = 0;
};

// Incremental simulation of a set of concurrently running chunks.
// Supports interval polling (sampling / online monitoring), mid-flight
// parameter updates with a transition cost, and early stop.
class TransferSession {
 public:
  TransferSession(std::vector<std::pair<Chunk, ParamTriple>> chunks,
                  const SimScenario& scenario, double start_s,
                  std::uint64_t stream = 0);
  ~TransferSession();
  TransferSession(TransferSession&&) noexcept;
  TransferSession& operator=(TransferSession&&) noexcept;

  double now() const;
  bool finished() const;

  // Advances one monitor interval (or until completion) and returns the
  // mean throughput over the advanced window.
  double poll_interval(double interval_s);
  // Same, restricted to one chunk's delivered bytes.
  double poll_interval_chunk(std::size_t chunk_index, double interval_s);

  // Applies new parameters to a chunk; its channels stall for
  // transition_cost_s of simulated time, re-established ones restart
  // their slow-start ramp.
  void update_params(std::size_t chunk_index, const ParamTriple& params,
                     double transition_cost_s);

  ParamTriple params(std::size_t chunk_index) const;
  double delivered_bytes(std::size_t chunk_index) const;
  double delivered_bytes() const;
  int current_flows() const;

  // Runs to completion and returns the full result (timeline covers the
  // whole session including any polled prefix).
  SimResult run_to_completion();

  // Stops now; result covers the elapsed window only.
  SimResult stop();
  RemainingChunk remaining(std::size_t chunk_index) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot convenience wrapper: run the chunks to completion.
SimResult simulate_transfer(
    const std::vector<std::pair<Chunk, ParamTriple>>& chunks,
    const SimScenario& scenario, double start_s = 0.0);

// {1,2,4,8,16,32}^3 = 216 parameter combinations.
std::vector<ParamTriple> default_param_grid(const ParamBounds& bounds = {});

// One simulated transfer per (scenario, dataset, params, repeat); every
// (scenario, dataset, repeat) sweep shares a distinct session id.
std::vector<HistoryEntry> generate_history(
    const std::vector<SimScenario>& scenarios,
    const std::vector<Chunk>& datasets,
    const std::vector<ParamTriple>& param_grid, int repeats);

}  // namespace xfertune::sim
