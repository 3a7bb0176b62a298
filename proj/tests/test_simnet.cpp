#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "xfertune/simnet.hpp"

using namespace xfertune;
using namespace xfertune::sim;

namespace {

SimScenario quiet_scenario() {
  SimScenario s;
  s.network = NetworkProfile(10e9, 0.04, 64e6);
  s.noise_sigma = 0;
  s.slow_start_tau_s = 0;
  s.seed = 3;
  return s;
}

Chunk uniform_chunk(ChunkType type, int count, std::uint64_t size,
                    const std::string& prefix = "f") {
  std::vector<FileInfo> files;
  for (int i = 0; i < count; ++i)
    files.push_back({prefix + std::to_string(i), size});
  return make_chunk(type, files);
}

}  // namespace

TEST_CASE("unconstrained link drains one file at line rate") {
  SimScenario s = quiet_scenario();
  s.network = NetworkProfile(10e9, 1e-9, 64e6);  // effectively zero rtt
  const auto chunk = uniform_chunk(ChunkType::Large, 1, 1'000'000'000);
  const auto res = simulate_transfer({{chunk, ParamTriple(1, 1, 1)}}, s);
  CHECK(res.duration_s == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(res.aggregate_throughput_bps == doctest::Approx(10e9).epsilon(1e-6));
}

TEST_CASE("pipelining amortizes per-file control latency") {
  SimScenario s = quiet_scenario();
  const auto chunk = uniform_chunk(ChunkType::Tiny, 1000, 1'000'000);
  const auto pp1 =
      simulate_transfer({{chunk, ParamTriple(1, 1, 1)}}, s).aggregate_throughput_bps;
  const auto pp16 =
      simulate_transfer({{chunk, ParamTriple(1, 1, 16)}}, s).aggregate_throughput_bps;
  CHECK(pp16 > pp1);
}

TEST_CASE("imbalance penalty hits the fitted reference points") {
  CHECK(pipelining_imbalance_penalty(1, 32, 1000) == doctest::Approx(1.0));
  CHECK(pipelining_imbalance_penalty(32, 1, 1000) == doctest::Approx(1.0));
  CHECK(pipelining_imbalance_penalty(32, 8, 1000) ==
        doctest::Approx(0.83).epsilon(0.015));
  // strictly decreasing between pipelining 4 and 8 at high concurrency
  for (int cc : {8, 16, 32}) {
    double prev = pipelining_imbalance_penalty(cc, 4, 1000);
    for (int pp = 5; pp <= 8; ++pp) {
      const double cur = pipelining_imbalance_penalty(cc, pp, 1000);
      CHECK(cur < prev);
      prev = cur;
    }
  }
  // floor
  for (int cc : {2, 8, 32})
    for (int pp : {2, 4, 8, 16, 32})
      CHECK(pipelining_imbalance_penalty(cc, pp, 100000) >= 0.8);
  // few files per channel -> no pre-assignment to skew
  CHECK(pipelining_imbalance_penalty(32, 8, 32) == doctest::Approx(1.0));
}

TEST_CASE("default scenario reproduces the pipelining-concurrency ordering") {
  SimScenario s = default_scenario();
  s.noise_sigma = 0;
  const auto chunk = uniform_chunk(ChunkType::Medium, 1024, 64'000'000);
  const auto thr = [&](int pp) {
    return simulate_transfer({{chunk, ParamTriple(32, 1, pp)}}, s)
        .aggregate_throughput_bps;
  };
  const double t1 = thr(1), t8 = thr(8), t16 = thr(16), t32 = thr(32);
  CHECK(t1 > t16);
  CHECK(t16 > t32);
  CHECK(t32 > t8);
}

TEST_CASE("generate_history produces one entry per combination") {
  SimScenario s = quiet_scenario();
  const auto dataset = uniform_chunk(ChunkType::Small, 8, 30'000'000);
  const auto grid = default_param_grid();
  CHECK(grid.size() == 216);

  const auto entries = generate_history({s}, {dataset}, grid, 1);
  CHECK(entries.size() == 216);
  std::set<std::string> sessions;
  for (const auto& e : entries) sessions.insert(e.session_id);
  CHECK(sessions.size() == 1);
  CHECK_THROWS_AS(generate_history({s}, {dataset}, grid, 0),
                  std::invalid_argument);
}

TEST_CASE("generate_history count matches direct enumeration") {
  SimScenario s = quiet_scenario();
  std::vector<SimScenario> scenarios;
  for (int bg : {0, 16, 48}) {
    SimScenario t = s;
    t.traffic = {{0.0, 1e9, bg}};
    scenarios.push_back(t);
  }
  std::vector<Chunk> datasets = {
      uniform_chunk(ChunkType::Tiny, 6, 1'000'000),
      uniform_chunk(ChunkType::Small, 6, 30'000'000),
      uniform_chunk(ChunkType::Medium, 4, 120'000'000),
      uniform_chunk(ChunkType::Large, 3, 210'000'000),
  };
  // Cut the grid so the enumeration stays fast; counting is what matters.
  std::vector<ParamTriple> grid;
  for (int cc : {1, 8}) grid.emplace_back(cc, 2, 2);

  const int repeats = 5;
  const auto entries = generate_history(scenarios, datasets, grid, repeats);

  std::size_t expected = 0;
  std::set<std::string> sessions;
  for (std::size_t a = 0; a < scenarios.size(); ++a)
    for (std::size_t b = 0; b < datasets.size(); ++b)
      for (std::size_t c = 0; c < grid.size(); ++c)
        for (int r = 0; r < repeats; ++r) ++expected;
  CHECK(entries.size() == expected);
  for (const auto& e : entries) sessions.insert(e.session_id);
  CHECK(sessions.size() == scenarios.size() * datasets.size() * repeats);
  // Full grid at 3 traffic levels x 4 types x 5 repeats is 12,960.
  CHECK(3 * 4 * 216 * 5 == 12960);
}

TEST_CASE("determinism: identical seeds give identical results") {
  SimScenario s = default_scenario();
  s.noise_sigma = 0.2;
  const auto chunk = uniform_chunk(ChunkType::Small, 40, 25'000'000);
  const auto a = simulate_transfer({{chunk, ParamTriple(8, 2, 4)}}, s);
  const auto b = simulate_transfer({{chunk, ParamTriple(8, 2, 4)}}, s);
  REQUIRE(a.timeline.size() == b.timeline.size());
  CHECK(a.duration_s == b.duration_s);
  CHECK(a.aggregate_throughput_bps == b.aggregate_throughput_bps);
  for (std::size_t i = 0; i < a.timeline.size(); ++i)
    CHECK(a.timeline[i].throughput_bps == b.timeline[i].throughput_bps);

  SimScenario other = s;
  other.seed = s.seed + 1;
  const auto c = simulate_transfer({{chunk, ParamTriple(8, 2, 4)}}, other);
  CHECK(c.duration_s != a.duration_s);
}

TEST_CASE("conservation: delivered bytes equal the dataset size") {
  SimScenario s = default_scenario();
  s.noise_sigma = 0.15;
  const auto tiny = uniform_chunk(ChunkType::Tiny, 100, 1'500'000, "t");
  const auto large = uniform_chunk(ChunkType::Large, 5, 400'000'000, "l");
  const auto res = simulate_transfer(
      {{tiny, ParamTriple(4, 1, 8)}, {large, ParamTriple(6, 2, 1)}}, s);
  REQUIRE(res.per_chunk.size() == 2);
  CHECK(res.per_chunk[0].bytes == doctest::Approx(tiny.total_size).epsilon(1e-9));
  CHECK(res.per_chunk[1].bytes == doctest::Approx(large.total_size).epsilon(1e-9));
  const double total = res.per_chunk[0].bytes + res.per_chunk[1].bytes;
  CHECK(res.aggregate_throughput_bps ==
        doctest::Approx(total * 8.0 / res.duration_s).epsilon(0.001));
}

TEST_CASE("monotone contention: more background flows never help") {
  SimScenario s = quiet_scenario();
  const auto chunk = uniform_chunk(ChunkType::Medium, 20, 100'000'000);
  double prev = 1e18;
  for (int bg : {0, 8, 32}) {
    SimScenario t = s;
    t.traffic = {{0.0, 1e9, bg}};
    const auto thr = simulate_transfer({{chunk, ParamTriple(4, 2, 2)}}, t)
                         .aggregate_throughput_bps;
    CHECK(thr <= prev + 1e-6);
    prev = thr;
  }
}

TEST_CASE("fair share: foreground stays within its flow proportion") {
  SimScenario s = quiet_scenario();  // fs unlimited
  const int n = 8, m = 24;
  SimScenario t = s;
  t.traffic = {{0.0, 1e9, m}};
  const auto chunk = uniform_chunk(ChunkType::Large, 16, 250'000'000);
  const auto res = simulate_transfer({{chunk, ParamTriple(n, 1, 1)}}, t);
  const double cap = t.network.bandwidth_bps * n / double(n + m);
  for (const auto& point : res.timeline)
    CHECK(point.throughput_bps <= cap + 1e-6);
  CHECK(res.aggregate_throughput_bps <= cap + 1e-6);
}

TEST_CASE("fs saturation curve caps the instantaneous aggregate") {
  SimScenario s = quiet_scenario();
  s.fs_profile = {{1, 100e6}, {8, 400e6}, {32, 500e6}};
  const auto chunk = uniform_chunk(ChunkType::Large, 24, 500'000'000);
  const int cc = 12;
  const auto res = simulate_transfer({{chunk, ParamTriple(cc, 2, 1)}}, s);
  const double cap_bps = s.fs_limit_bytes_per_s(cc) * 8.0;
  for (const auto& point : res.timeline)
    CHECK(point.throughput_bps <= cap_bps * (1 + 1e-9));
}

TEST_CASE("session polling and early stop leave a consistent remainder") {
  SimScenario s = default_scenario();
  const auto chunk = uniform_chunk(ChunkType::Small, 60, 25'000'000);
  TransferSession session({{chunk, ParamTriple(4, 1, 2)}}, s, 0.0);
  const double thr = session.poll_interval(3.0);
  CHECK(thr > 0);
  CHECK(session.now() == doctest::Approx(3.0));
  const auto rem = session.remaining(0);
  const auto res = session.stop();
  CHECK(rem.bytes + res.per_chunk[0].bytes ==
        doctest::Approx(static_cast<double>(chunk.total_size)).epsilon(1e-6));
}

TEST_CASE("invalid inputs are rejected") {
  SimScenario s = quiet_scenario();
  CHECK_THROWS_AS(simulate_transfer({}, s), std::invalid_argument);
  Chunk empty;
  empty.type = ChunkType::Tiny;
  CHECK_THROWS_AS(simulate_transfer({{empty, ParamTriple(1, 1, 1)}}, s),
                  std::invalid_argument);
  SimScenario bad = s;
  bad.network.bandwidth_bps = 0;
  const auto chunk = uniform_chunk(ChunkType::Tiny, 2, 1'000'000);
  CHECK_THROWS_AS(simulate_transfer({{chunk, ParamTriple(1, 1, 1)}}, bad),
                  std::invalid_argument);
  SimScenario noisy = s;
  noisy.noise_sigma = 0.5;
  CHECK_THROWS_AS(simulate_transfer({{chunk, ParamTriple(1, 1, 1)}}, noisy),
                  std::invalid_argument);
}
