#include "xfertune/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace xfertune::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v, const std::string& path, std::size_t ln) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(path, ln, "expected a number, got '" + v + "'");
  }
}

}  // namespace

ScenarioFile parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);

  ScenarioFile out;
  out.scenario = sim::default_scenario();
  out.scenario.traffic.clear();
  double bandwidth = out.scenario.network.bandwidth_bps;
  double rtt = out.scenario.network.rtt_s;
  double buffer = out.scenario.network.buffer_bytes;
  bool fs_seen = false;

  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path, ln, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "bandwidth_bps") {
      bandwidth = to_double(value, path, ln);
    } else if (key == "rtt_s") {
      rtt = to_double(value, path, ln);
    } else if (key == "buffer_bytes") {
      buffer = to_double(value, path, ln);
    } else if (key == "fs_profile") {
      if (!fs_seen) {
        out.scenario.fs_profile.clear();
        fs_seen = true;
      }
      std::istringstream is(value);
      std::string pair;
      while (is >> pair) {
        const auto colon = pair.find(':');
        if (colon == std::string::npos)
          throw ConfigError(path, ln, "fs_profile entries are ops:bytes_per_s");
        out.scenario.fs_profile.push_back(
            {to_double(pair.substr(0, colon), path, ln),
             to_double(pair.substr(colon + 1), path, ln)});
      }
    } else if (key == "traffic_phase") {
      std::istringstream is(value);
      double start, end;
      int bg;
      if (!(is >> start >> end >> bg))
        throw ConfigError(path, ln, "traffic_phase is 'start end bg_flows'");
      out.scenario.traffic.push_back({start, end, bg});
    } else if (key == "control_latency_s") {
      out.scenario.control_latency_s =
          value == "auto" ? -1.0 : to_double(value, path, ln);
    } else if (key == "slow_start_tau_s") {
      out.scenario.slow_start_tau_s = to_double(value, path, ln);
    } else if (key == "noise_sigma") {
      out.scenario.noise_sigma = to_double(value, path, ln);
    } else if (key == "seed") {
      out.scenario.seed = static_cast<std::uint64_t>(to_double(value, path, ln));
    } else if (key == "dataset") {
      std::istringstream is(value);
      DatasetSpec spec;
      if (!(is >> spec.label >> spec.file_count >> spec.avg_file_size) ||
          spec.file_count < 1 || spec.avg_file_size <= 0)
        throw ConfigError(path, ln, "dataset is 'label file_count avg_size_bytes'");
      out.datasets.push_back(spec);
    } else {
      throw ConfigError(path, ln, "unknown key '" + key + "'");
    }
  }

  try {
    out.scenario.network = NetworkProfile(bandwidth, rtt, buffer);
    out.scenario.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, ln, e.what());
  }
  return out;
}

std::vector<FileInfo> parse_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset manifest: " + path);
  std::vector<FileInfo> files;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string p;
    double size;
    if (!(is >> p >> size) || size <= 0)
      throw ConfigError(path, ln, "manifest lines are 'path size_bytes'");
    files.push_back({p, static_cast<std::uint64_t>(std::llround(size))});
  }
  return files;
}

std::vector<std::pair<ChunkType, ParamTriple>> parse_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open plan file: " + path);
  std::vector<std::pair<ChunkType, ParamTriple>> plan;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string type;
    int cc, p, pp;
    if (!(is >> type >> cc >> p >> pp))
      throw ConfigError(path, ln, "plan lines are 'chunk_type cc p pp'");
    try {
      plan.emplace_back(parse_chunk_type(type), ParamTriple(cc, p, pp));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path, ln, e.what());
    }
  }
  return plan;
}

std::vector<FileInfo> build_files(const DatasetSpec& spec) {
  std::vector<FileInfo> files;
  files.reserve(spec.file_count);
  const auto size =
      static_cast<std::uint64_t>(std::llround(spec.avg_file_size));
  for (int i = 0; i < spec.file_count; ++i)
    files.push_back({spec.label + "-" + std::to_string(i), std::max<std::uint64_t>(size, 1)});
  return files;
}

int preset_bg_flows(const std::string& preset) {
  if (preset == "light") return 0;
  if (preset == "medium") return 16;
  if (preset == "heavy") return 48;
  throw ConfigError("unknown traffic preset: " + preset);
}

void apply_traffic_preset(sim::SimScenario& scenario, const std::string& preset) {
  scenario.traffic = {{0.0, 1e9, preset_bg_flows(preset)}};
}

void write_timeline_csv(const std::string& path,
                        const std::vector<sim::TimelinePoint>& timeline) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write timeline csv: " + path);
  out << "t_s,throughput_bps,flows\n";
  for (const auto& p : timeline)
    out << p.t_s << ',' << p.throughput_bps << ',' << p.flows << '\n';
}

}  // namespace xfertune::config
