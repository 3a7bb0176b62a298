// File formats used by the command-line tool: scenario config files,
// dataset manifests, plan files, and CSV export.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "xfertune/core.hpp"
#include "xfertune/simnet.hpp"

namespace xfertune::config {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what) {}
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A dataset description inside a scenario file: `dataset = <label>
// <file_count> <avg_size_bytes>`.
struct DatasetSpec {
  std::string label;
  int file_count = 0;
  double avg_file_size = 0;
};

struct ScenarioFile {
  sim::SimScenario scenario;
  std::vector<DatasetSpec> datasets;
};

// Key-value config, one `key = value` per line, '#' comments.
// Keys: bandwidth_bps, rtt_s, buffer_bytes, fs_profile (ops:bytes_per_s
// pairs), traffic_phase (start end bg_flows; repeatable), control_latency_s
// (number or "auto"), slow_start_tau_s, noise_sigma, seed, dataset
// (repeatable).
ScenarioFile parse_scenario_file(const std::string& path);

// Lines of "path size_bytes".
std::vector<FileInfo> parse_manifest(const std::string& path);

// Lines of "chunk_type cc p pp".
std::vector<std::pair<ChunkType, ParamTriple>> parse_plan(const std::string& path);

std::vector<FileInfo> build_files(const DatasetSpec& spec);

// Replaces the traffic timeline with a constant background level:
// light=0, medium=16, heavy=48 flows.
void apply_traffic_preset(sim::SimScenario& scenario, const std::string& preset);
int preset_bg_flows(const std::string& preset);

void write_timeline_csv(const std::string& path,
                        const std::vector<sim::TimelinePoint>& timeline);

}  // namespace xfertune::config
