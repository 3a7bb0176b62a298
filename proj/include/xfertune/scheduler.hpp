// End-to-end transfer orchestration: partitioning, probe heuristics,
// adaptive sampling, channel distribution across concurrent chunks, the
// sampling cost model, and the baseline strategies.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xfertune/core.hpp"
#include "xfertune/history.hpp"
#include "xfertune/online.hpp"
#include "xfertune/optimizer.hpp"
#include "xfertune/simnet.hpp"

namespace xfertune::scheduler {

// Executor contract: start(chunks, params, t), interval polling, stop.
// Backed by the simulator here; a real-transfer adapter implements the
// same surface.
class Session {
 public:
  virtual ~Session() = default;
  virtual double now() const = 0;
  virtual bool finished() const = 0;
  virtual double poll_interval(double interval_s) = 0;
  virtual void update_params(std::size_t chunk, const ParamTriple& params,
                             double transition_cost_s) = 0;
  virtual ParamTriple params(std::size_t chunk) const = 0;
  virtual double delivered_bytes(std::size_t chunk) const = 0;
  virtual double delivered_bytes() const = 0;
  virtual int current_flows() const = 0;
  virtual sim::SimResult run_to_completion() = 0;
  virtual sim::SimResult stop() = 0;
  virtual sim::RemainingChunk remaining(std::size_t chunk) const = 0;
};

class Executor {
 public:
  virtual ~Executor() = default;
  virtual std::unique_ptr<Session> start(
      std::vector<std::pair<Chunk, ParamTriple>> chunks, double t) = 0;
};

// Deterministic simulator-backed executor; sessions draw consecutive
// noise streams from the scenario seed.
class SimExecutor : public Executor {
 public:
  explicit SimExecutor(sim::SimScenario scenario)
      : scenario_(std::move(scenario)) {}
  std::unique_ptr<Session> start(std::vector<std::pair<Chunk, ParamTriple>> chunks,
                                 double t) override;
  const sim::SimScenario& scenario() const { return scenario_; }

 private:
  sim::SimScenario scenario_;
  std::uint64_t next_stream_ = 0;
};

std::vector<Chunk> partition_files(const std::vector<FileInfo>& files,
                                   const NetworkProfile& network,
                                   const ChunkThresholds& thresholds = {});

// Probe parameters: pipelining from BDP over average file size,
// parallelism from BDP over buffer size, small fixed concurrency.
ParamTriple heuristic_params(const Chunk& chunk, const NetworkProfile& network,
                             const ParamBounds& bounds = {}, int cc_default = 4);

struct SamplingConfig {
  double convergence_pct = 0.05;
  double monitor_interval_s = 3.0;
  double max_sample_time_s = 30.0;
};

struct SampleResult {
  double throughput_bps = 0;
  double elapsed_s = 0;
  double bytes_used = 0;
  bool converged = false;
};

// Monitors a running single-chunk session and stops at throughput
// convergence (or the hard time cap / chunk exhaustion).
SampleResult adaptive_sample(Session& session, const SamplingConfig& config);

struct ChunkPlan {
  std::size_t chunk_index = 0;
  ParamTriple params;
  double unit_throughput_bps = 0;
  double weight = 0;
  double estimated_throughput_bps = 0;
};

struct TransferPlan {
  std::vector<ChunkPlan> chunks;
  int max_cc = 1;
  double total_unit_throughput_bps = 0;  // sum of unit throughputs
};

// Channel distribution: maxCC (the largest per-chunk estimate) split
// proportionally to weight = size * TT/UT; parallelism and pipelining
// pass through unchanged.
TransferPlan build_plan(const std::vector<Chunk>& chunks,
                        const std::vector<optimizer::OptimizerResult>& results,
                        const ParamBounds& bounds = {});

sim::SimResult execute_plan(const TransferPlan& plan,
                            const std::vector<Chunk>& chunks, Executor& executor,
                            double start_s = 0.0);

// Minimum transfer size (in units of baseline-throughput seconds) for
// the sampling + optimization overhead to pay off.
double cost_min_chunk_size(double speedup, double slowdown,
                           double sample_time_s = 15.0,
                           double optimizer_latency_s = 0.0);

enum class Strategy { Harp, GlobusOnline, SingleChunk, ProMC, PCP };

Strategy parse_strategy(const std::string& name);
std::string to_string(Strategy s);

struct GoTableRow {
  double max_avg_file_size;  // upper bound, bytes
  ParamTriple params;
};

struct BaselineOptions {
  int max_cc = 10;  // user-supplied concurrency bound for SC / ProMC
  ParamBounds bounds;
  double probe_interval_s = 3.0;  // PCP probe length
  // Fixed parameter table by average file size; placeholder values,
  // configurable.
  std::vector<GoTableRow> go_table = {
      {50.0 * 1000 * 1000, ParamTriple(2, 2, 8)},
      {250.0 * 1000 * 1000, ParamTriple(2, 2, 2)},
      {-1.0, ParamTriple(2, 4, 1)}};  // negative bound = anything larger
};

struct HarpOptions {
  SamplingConfig sampling;
  double optimizer_latency_s = 3.0;
  int min_filter_entries = 432;
  int min_group = similarity::kMinGroupSize;
  std::uint64_t split_seed = 7;
  ParamBounds bounds;
  optimizer::Relaxation relaxation;
  bool online = false;
  online::OnlineConfig online_config;
};

struct ChunkDiagnostics {
  ChunkType type = ChunkType::Tiny;
  ParamTriple probe_params;
  double sample_throughput_bps = 0;
  bool sample_converged = false;
  int groups_kept = 0;
  int groups_rejected = 0;
  bool model_fallback = false;  // no model survived; heuristic used
  optimizer::OptimizerResult optimizer;
};

struct StrategyReport {
  Strategy strategy = Strategy::Harp;
  double aggregate_throughput_bps = 0;
  double duration_s = 0;
  double bytes = 0;
  std::vector<std::pair<ChunkType, ParamTriple>> decisions;
  std::vector<sim::TimelinePoint> timeline;
  std::vector<online::LogRow> online_log;
  std::vector<ChunkDiagnostics> diagnostics;  // filled by Harp only
};

StrategyReport run_baseline(Strategy strategy, const std::vector<Chunk>& chunks,
                            const NetworkProfile& network, Executor& executor,
                            const BaselineOptions& options = {});

// Full pipeline: per-chunk heuristic probe + adaptive sample, model
// filtering/fitting over the history store, optimization, channel
// distribution, concurrent execution (optionally with online tuning).
StrategyReport run_harp(const std::vector<Chunk>& chunks,
                        const NetworkProfile& network,
                        const history::HistoryStore& store, Executor& executor,
                        const HarpOptions& options = {});

}  // namespace xfertune::scheduler
