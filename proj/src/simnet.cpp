#include "xfertune/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace xfertune::sim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxSimSeconds = 2.0e6;

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Self-contained normal sampler; std distributions are not
// bit-reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0;
};

}  // namespace

void SimScenario::validate() const {
  if (!(network.bandwidth_bps > 0))
    throw std::invalid_argument("scenario bandwidth must be positive");
  if (!(network.rtt_s > 0) || !(network.buffer_bytes > 0))
    throw std::invalid_argument("scenario rtt and buffer must be positive");
  if (noise_sigma < 0 || noise_sigma > 0.3)
    throw std::invalid_argument("noise_sigma must be in [0, 0.3]");
  if (slow_start_tau_s < 0)
    throw std::invalid_argument("slow_start_tau_s must be non-negative");
  double prev_ops = -1;
  for (const auto& p : fs_profile) {
    if (p.bytes_per_s < 0 || p.ops < 0)
      throw std::invalid_argument("fs_profile points must be non-negative");
    if (p.ops <= prev_ops)
      throw std::invalid_argument("fs_profile ops must be strictly ascending");
    prev_ops = p.ops;
  }
  double prev_end = -kInf;
  for (const auto& ph : traffic) {
    if (ph.end_s <= ph.start_s || ph.bg_flows < 0)
      throw std::invalid_argument("bad traffic phase");
    if (ph.start_s < prev_end)
      throw std::invalid_argument("traffic phases must be sorted and disjoint");
    prev_end = ph.end_s;
  }
}

double SimScenario::control_latency() const {
  return control_latency_s < 0 ? network.rtt_s : control_latency_s;
}

double SimScenario::fs_limit_bytes_per_s(double ops) const {
  if (fs_profile.empty()) return kInf;
  if (ops <= fs_profile.front().ops) return fs_profile.front().bytes_per_s;
  for (std::size_t i = 1; i < fs_profile.size(); ++i) {
    if (ops <= fs_profile[i].ops) {
      const auto& a = fs_profile[i - 1];
      const auto& b = fs_profile[i];
      const double w = (ops - a.ops) / (b.ops - a.ops);
      return a.bytes_per_s + w * (b.bytes_per_s - a.bytes_per_s);
    }
  }
  return fs_profile.back().bytes_per_s;
}

int SimScenario::bg_flows_at(double t) const {
  for (const auto& ph : traffic) {
    if (t >= ph.start_s && t < ph.end_s) return ph.bg_flows;
  }
  return 0;
}

SimScenario default_scenario() {
  SimScenario s;
  s.network = NetworkProfile(10e9, 0.04, 32.0 * 1024 * 1024);
  s.fs_profile = {{1, 500e6}, {2, 1150e6}, {4, 1200e6}, {48, 1200e6},
                  {64, 1150e6}};
  s.traffic = {{0.0, 1e9, 7}};
  s.slow_start_tau_s = 2.0;
  s.noise_sigma = 0.05;
  s.seed = 1;
  return s;
}

double pipelining_imbalance_penalty(int cc, int pp, std::size_t file_count) {
  if (cc < 1 || pp < 1 || file_count < 1)
    throw std::invalid_argument("penalty arguments must be >= 1");
  if (cc == 1 || pp == 1) return 1.0;
  const double depth = clamp01((cc - 1) / 31.0);
  const double per_channel =
      static_cast<double>(file_count) / static_cast<double>(cc);
  const double spread = clamp01((per_channel - 1.0) / 7.0);
  // Drop as a function of log2(pp), fitted to the 32-channel reference
  // points 0.83 / 0.902 / 0.894 at pp = 8 / 16 / 32.
  static constexpr double kDrop[] = {0.0, 0.050, 0.105, 0.170, 0.098, 0.106};
  const double l = std::min(std::log2(static_cast<double>(pp)), 5.0);
  const int lo = static_cast<int>(l);
  const int hi = std::min(lo + 1, 5);
  const double shape = kDrop[lo] + (l - lo) * (kDrop[hi] - kDrop[lo]);
  return std::max(1.0 - depth * spread * shape, 0.8);
}

// ---------------------------------------------------------------------------

struct TransferSession::Impl {
  struct ChannelState {
    std::size_t chunk = 0;
    double ss_start = 0;      // slow-start ramp origin
    double busy_until = 0;    // control delay / transition stall
    bool has_file = false;
    double remaining = 0;     // bytes left of the in-flight file
    std::string path;
  };

  struct ChunkState {
    ParamTriple params;
    std::vector<FileInfo> files;
    std::size_t next_file = 0;
    std::vector<std::pair<std::string, double>> requeued;
    std::size_t initial_files = 0;
    ChunkType type = ChunkType::Tiny;
    double total = 0;
    double delivered = 0;
    int in_flight = 0;
    double end_s = -1;
    bool queue_empty() const { return requeued.empty() && next_file >= files.size(); }
    bool done() const { return in_flight == 0 && queue_empty(); }
  };

  SimScenario scenario;
  double start_s = 0;
  std::uint64_t ticks = 0;
  bool stopped = false;
  Rng rng;
  std::vector<ChunkState> chunks;
  std::vector<ChannelState> channels;
  std::vector<TimelinePoint> timeline;
  int flows_used = 0;

  Impl(std::vector<std::pair<Chunk, ParamTriple>> input,
       const SimScenario& sc, double start, std::uint64_t stream)
      : scenario(sc), start_s(start),
        rng(splitmix64(sc.seed ^ splitmix64(stream + 0x51ed2701))) {
    scenario.validate();
    if (input.empty()) throw std::invalid_argument("no chunks to transfer");
    for (auto& [chunk, params] : input) {
      if (chunk.files.empty())
        throw std::invalid_argument("empty chunk in transfer");
      ChunkState cs;
      cs.params = params;
      cs.files = std::move(chunk.files);
      cs.initial_files = cs.files.size();
      cs.type = chunk.type;
      for (const auto& f : cs.files) cs.total += static_cast<double>(f.size);
      chunks.push_back(std::move(cs));
    }
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      for (int c = 0; c < chunks[i].params.cc; ++c) {
        channels.push_back({i, start_s, start_s, false, 0, {}});
      }
    }
  }

  double now() const { return start_s + static_cast<double>(ticks) * kTickSeconds; }

  bool finished() const {
    for (const auto& c : chunks)
      if (!c.done()) return false;
    return true;
  }

  bool channel_active(const ChannelState& ch) const {
    return ch.has_file || !chunks[ch.chunk].queue_empty();
  }

  double slow_start(double t, const ChannelState& ch) const {
    const double tau = scenario.slow_start_tau_s;
    if (tau <= 0) return 1.0;
    const double dt = t - ch.ss_start;
    if (dt <= 0) return 0.0;
    return 1.0 - std::exp(-dt / tau);
  }

  // Pulls the next unit of work for a channel; returns false if the
  // chunk queue is drained.
  bool pull(ChannelState& ch, double t) {
    ChunkState& cs = chunks[ch.chunk];
    double bytes = 0;
    if (!cs.requeued.empty()) {
      ch.path = cs.requeued.back().first;
      bytes = cs.requeued.back().second;
      cs.requeued.pop_back();
    } else if (cs.next_file < cs.files.size()) {
      ch.path = cs.files[cs.next_file].path;
      bytes = static_cast<double>(cs.files[cs.next_file].size);
      ++cs.next_file;
    } else {
      return false;
    }
    ch.has_file = true;
    ch.remaining = bytes;
    ++cs.in_flight;
    ch.busy_until = t + scenario.control_latency() / cs.params.pp;
    return true;
  }

  void advance_tick() {
    const double t0 = now();
    if (t0 - start_s > kMaxSimSeconds)
      throw std::runtime_error("simulation exceeded time guard");
    const double dt = kTickSeconds;
    const int bg = scenario.bg_flows_at(t0);

    int fg_flows = 0;
    int ops = 0;
    std::vector<double> rate(channels.size(), 0.0);
    for (std::size_t i = 0; i < channels.size(); ++i) {
      if (!channel_active(channels[i])) continue;
      fg_flows += chunks[channels[i].chunk].params.p;
      ++ops;
    }
    if (ops > 0) {
      const auto& net = scenario.network;
      const double window_bps = net.buffer_bytes * 8.0 / net.rtt_s;
      const double fair_bps = net.bandwidth_bps / std::max(fg_flows + bg, 1);
      const double per_flow = std::min(window_bps, fair_bps);
      const double noise =
          scenario.noise_sigma > 0
              ? std::exp(scenario.noise_sigma * rng.normal() -
                         0.5 * scenario.noise_sigma * scenario.noise_sigma)
              : 1.0;
      double total_rate = 0;
      for (std::size_t i = 0; i < channels.size(); ++i) {
        const ChannelState& ch = channels[i];
        if (!channel_active(ch)) continue;
        const ChunkState& cs = chunks[ch.chunk];
        rate[i] = cs.params.p * per_flow * slow_start(t0, ch) *
                  pipelining_imbalance_penalty(cs.params.cc, cs.params.pp,
                                               cs.initial_files) *
                  noise;
        total_rate += rate[i];
      }
      const double fs_cap_bps = scenario.fs_limit_bytes_per_s(ops) * 8.0;
      if (total_rate > fs_cap_bps && total_rate > 0) {
        const double scale = fs_cap_bps / total_rate;
        for (auto& r : rate) r *= scale;
      }
    }

    double tick_bytes = 0;
    for (std::size_t i = 0; i < channels.size(); ++i) {
      ChannelState& ch = channels[i];
      ChunkState& cs = chunks[ch.chunk];
      double t = t0;
      double budget = dt;
      while (budget > 1e-12) {
        if (ch.busy_until > t) {
          const double wait = std::min(ch.busy_until - t, budget);
          t += wait;
          budget -= wait;
          continue;
        }
        if (!ch.has_file) {
          if (!pull(ch, t)) break;
          continue;  // control delay charged by pull()
        }
        const double rate_bytes = rate[i] / 8.0;
        if (rate_bytes <= 0) break;
        const double finish = ch.remaining / rate_bytes;
        if (finish <= budget) {
          tick_bytes += ch.remaining;
          cs.delivered += ch.remaining;
          t += finish;
          budget -= finish;
          ch.has_file = false;
          ch.remaining = 0;
          --cs.in_flight;
          if (cs.done() && cs.end_s < 0) cs.end_s = t;
        } else {
          const double moved = rate_bytes * budget;
          tick_bytes += moved;
          cs.delivered += moved;
          ch.remaining -= moved;
          budget = 0;
        }
      }
    }

    timeline.push_back({t0, tick_bytes * 8.0 / dt, fg_flows});
    flows_used = std::max(flows_used, fg_flows);
    ++ticks;
  }

  SimResult result(double end_time) const {
    SimResult r;
    r.timeline = timeline;
    r.flows_used = flows_used;
    double total_bytes = 0;
    double last_end = start_s;
    for (const auto& cs : chunks) {
      ChunkOutcome oc;
      oc.bytes = cs.delivered;
      oc.start_s = start_s;
      oc.end_s = cs.end_s >= 0 ? cs.end_s : end_time;
      oc.throughput_bps =
          oc.end_s > oc.start_s ? cs.delivered * 8.0 / (oc.end_s - oc.start_s) : 0;
      last_end = std::max(last_end, oc.end_s);
      total_bytes += cs.delivered;
      r.per_chunk.push_back(oc);
    }
    r.duration_s = last_end - start_s;
    r.aggregate_throughput_bps =
        r.duration_s > 0 ? total_bytes * 8.0 / r.duration_s : 0;
    return r;
  }
};

TransferSession::TransferSession(std::vector<std::pair<Chunk, ParamTriple>> chunks,
                                 const SimScenario& scenario, double start_s,
                                 std::uint64_t stream)
    : impl_(std::make_unique<Impl>(std::move(chunks), scenario, start_s, stream)) {}

TransferSession::~TransferSession() = default;
TransferSession::TransferSession(TransferSession&&) noexcept = default;
TransferSession& TransferSession::operator=(TransferSession&&) noexcept = default;

double TransferSession::now() const { return impl_->now(); }
bool TransferSession::finished() const { return impl_->finished(); }

double TransferSession::poll_interval(double interval_s) {
  const auto ticks = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::llround(interval_s / kTickSeconds)));
  const double t_begin = impl_->now();
  const double bytes_begin = delivered_bytes();
  std::uint64_t n = 0;
  while (n < ticks && !impl_->finished()) {
    impl_->advance_tick();
    ++n;
  }
  const double elapsed = impl_->now() - t_begin;
  if (elapsed <= 0) return 0;
  return (delivered_bytes() - bytes_begin) * 8.0 / elapsed;
}

double TransferSession::poll_interval_chunk(std::size_t chunk_index,
                                            double interval_s) {
  const auto ticks = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::llround(interval_s / kTickSeconds)));
  const double t_begin = impl_->now();
  const double bytes_begin = delivered_bytes(chunk_index);
  std::uint64_t n = 0;
  while (n < ticks && !impl_->finished()) {
    impl_->advance_tick();
    ++n;
  }
  const double elapsed = impl_->now() - t_begin;
  if (elapsed <= 0) return 0;
  return (delivered_bytes(chunk_index) - bytes_begin) * 8.0 / elapsed;
}

void TransferSession::update_params(std::size_t chunk_index,
                                    const ParamTriple& params,
                                    double transition_cost_s) {
  auto& impl = *impl_;
  auto& cs = impl.chunks.at(chunk_index);
  const ParamTriple old = cs.params;
  const double t = impl.now();
  cs.params = params;
  if (params.p != old.p) {
    // Every channel is torn down and re-established: stall, restart ramp.
    for (auto& ch : impl.channels) {
      if (ch.chunk != chunk_index) continue;
      ch.busy_until = std::max(ch.busy_until, t + transition_cost_s);
      ch.ss_start = t + transition_cost_s;
    }
  }
  if (params.cc > old.cc) {
    for (int c = old.cc; c < params.cc; ++c) {
      impl.channels.push_back(
          {chunk_index, t + transition_cost_s, t + transition_cost_s, false, 0, {}});
    }
  } else if (params.cc < old.cc) {
    int to_drop = old.cc - params.cc;
    for (auto it = impl.channels.rbegin();
         it != impl.channels.rend() && to_drop > 0; ++it) {
      if (it->chunk != chunk_index) continue;
      if (it->has_file) {
        cs.requeued.push_back({it->path, it->remaining});
        --cs.in_flight;
      }
      it->chunk = static_cast<std::size_t>(-1);  // mark for removal
      --to_drop;
    }
    std::erase_if(impl.channels, [](const Impl::ChannelState& ch) {
      return ch.chunk == static_cast<std::size_t>(-1);
    });
  }
}

ParamTriple TransferSession::params(std::size_t chunk_index) const {
  return impl_->chunks.at(chunk_index).params;
}

double TransferSession::delivered_bytes(std::size_t chunk_index) const {
  return impl_->chunks.at(chunk_index).delivered;
}

double TransferSession::delivered_bytes() const {
  double total = 0;
  for (const auto& c : impl_->chunks) total += c.delivered;
  return total;
}

int TransferSession::current_flows() const {
  int flows = 0;
  for (const auto& c : impl_->chunks)
    if (!c.done()) flows += c.params.cc * c.params.p;
  return flows;
}

SimResult TransferSession::run_to_completion() {
  while (!impl_->finished()) impl_->advance_tick();
  double end = impl_->start_s;
  for (const auto& c : impl_->chunks) end = std::max(end, c.end_s);
  return impl_->result(end);
}

SimResult TransferSession::stop() {
  impl_->stopped = true;
  return impl_->result(impl_->now());
}

RemainingChunk TransferSession::remaining(std::size_t chunk_index) const {
  const auto& cs = impl_->chunks.at(chunk_index);
  RemainingChunk rem;
  for (const auto& ch : impl_->channels) {
    if (ch.chunk == chunk_index && ch.has_file && ch.remaining >= 1.0) {
      rem.files.push_back(
          {ch.path, static_cast<std::uint64_t>(std::llround(ch.remaining))});
    }
  }
  for (const auto& [path, bytes] : cs.requeued) {
    if (bytes >= 1.0)
      rem.files.push_back({path, static_cast<std::uint64_t>(std::llround(bytes))});
  }
  for (std::size_t i = cs.next_file; i < cs.files.size(); ++i)
    rem.files.push_back(cs.files[i]);
  for (const auto& f : rem.files) rem.bytes += f.size;
  return rem;
}

SimResult simulate_transfer(
    const std::vector<std::pair<Chunk, ParamTriple>>& chunks,
    const SimScenario& scenario, double start_s) {
  TransferSession session(chunks, scenario, start_s);
  return session.run_to_completion();
}

std::vector<ParamTriple> default_param_grid(const ParamBounds& bounds) {
  static constexpr int kLevels[] = {1, 2, 4, 8, 16, 32};
  std::vector<ParamTriple> grid;
  for (int cc : kLevels)
    for (int p : kLevels)
      for (int pp : kLevels) {
        if (cc <= bounds.cc_max && p <= bounds.p_max && pp <= bounds.pp_max)
          grid.emplace_back(cc, p, pp, bounds);
      }
  return grid;
}

std::vector<HistoryEntry> generate_history(
    const std::vector<SimScenario>& scenarios,
    const std::vector<Chunk>& datasets,
    const std::vector<ParamTriple>& param_grid, int repeats) {
  if (param_grid.empty()) throw std::invalid_argument("empty parameter grid");
  if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");

  std::vector<HistoryEntry> out;
  out.reserve(scenarios.size() * datasets.size() * param_grid.size() * repeats);
  std::uint64_t stream = 0;
  std::int64_t sweep_base = 1'600'000'000;  // arbitrary epoch for synthetic logs
  int sweep_index = 0;
  for (std::size_t si = 0; si < scenarios.size(); ++si) {
    for (std::size_t di = 0; di < datasets.size(); ++di) {
      for (int r = 0; r < repeats; ++r) {
        const std::string session = "s" + std::to_string(si) + "-d" +
                                    std::to_string(di) + "-r" + std::to_string(r);
        const std::int64_t t_base = sweep_base + 3600LL * sweep_index++;
        int k = 0;
        for (const auto& params : param_grid) {
          SimScenario sc = scenarios[si];
          sc.seed = splitmix64(sc.seed ^ splitmix64(stream));
          const SimResult res =
              simulate_transfer({{datasets[di], params}}, sc, 0.0);
          HistoryEntry e;
          e.source = "simsrc";
          e.destination = "simdst";
          e.network = sc.network;
          e.chunk_type = datasets[di].type;
          e.avg_file_size = datasets[di].avg_file_size;
          e.file_count = static_cast<int>(datasets[di].files.size());
          e.params = params;
          e.throughput_bps = res.aggregate_throughput_bps;
          e.collected_at = t_base + 10 * k++;
          e.session_id = session;
          out.push_back(std::move(e));
          ++stream;
        }
      }
    }
  }
  return out;
}

}  // namespace xfertune::sim
