// Command-line front end: history generation, offline optimization,
// simulated transfers, strategy comparison, and the sampling cost table.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "xfertune/config.hpp"
#include "xfertune/core.hpp"
#include "xfertune/history.hpp"
#include "xfertune/modeling.hpp"
#include "xfertune/online.hpp"
#include "xfertune/optimizer.hpp"
#include "xfertune/scheduler.hpp"
#include "xfertune/similarity.hpp"
#include "xfertune/simnet.hpp"

namespace {

using namespace xfertune;

double mbps(double bps) { return bps / 1e6; }

std::string fmt(double v, int precision = 1) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::vector<sim::SimScenario> traffic_sweep(const sim::SimScenario& base,
                                            const std::vector<int>& levels) {
  std::vector<sim::SimScenario> out;
  for (int bg : levels) {
    sim::SimScenario s = base;
    s.traffic = {{0.0, 1e9, bg}};
    out.push_back(s);
  }
  return out;
}

// Desk-scale stand-in corpus when no history file is supplied: sweeps
// the 216-point grid over downscaled per-type datasets at three
// background levels.
history::HistoryStore synthesize_history(const sim::SimScenario& base,
                                         const std::vector<Chunk>& chunks) {
  std::vector<Chunk> datasets;
  for (const auto& chunk : chunks) {
    config::DatasetSpec spec{to_string(chunk.type),
                             std::min<int>(static_cast<int>(chunk.files.size()), 24),
                             chunk.avg_file_size};
    datasets.push_back(make_chunk(chunk.type, config::build_files(spec)));
  }
  const auto entries =
      sim::generate_history(traffic_sweep(base, {0, 16, 48}), datasets,
                            sim::default_param_grid(), 1);
  history::HistoryStore store;
  store.append(entries);
  return store;
}

std::vector<Chunk> load_dataset(const std::string& manifest_path,
                                const config::ScenarioFile& scenario_file) {
  std::vector<FileInfo> files;
  if (!manifest_path.empty()) {
    files = config::parse_manifest(manifest_path);
  } else {
    for (const auto& spec : scenario_file.datasets) {
      auto f = config::build_files(spec);
      files.insert(files.end(), f.begin(), f.end());
    }
  }
  if (files.empty())
    throw config::ConfigError(
        "no dataset: pass a manifest or add dataset lines to the scenario");
  return scheduler::partition_files(files, scenario_file.scenario.network);
}

struct ProbeSpec {
  bool adaptive = true;
  ParamTriple params;
  double throughput_bps = 0;
};

ProbeSpec parse_probe(const std::string& text) {
  ProbeSpec probe;
  if (text == "adaptive") return probe;
  if (text.rfind("given:", 0) == 0) {
    int cc, p, pp;
    double thr;
    if (std::sscanf(text.c_str() + 6, "%d,%d,%d=%lf", &cc, &p, &pp, &thr) == 4 &&
        thr > 0) {
      probe.adaptive = false;
      probe.params = ParamTriple(cc, p, pp);
      probe.throughput_bps = thr;
      return probe;
    }
  }
  throw config::ConfigError("--probe is 'adaptive' or 'given:cc,p,pp=thr_bps'");
}

void print_report(const scheduler::StrategyReport& report) {
  std::cout << "strategy=" << scheduler::to_string(report.strategy)
            << " aggregate_mbps=" << fmt(mbps(report.aggregate_throughput_bps))
            << " duration_s=" << fmt(report.duration_s)
            << " bytes=" << fmt(report.bytes, 0) << "\n";
  for (const auto& [type, params] : report.decisions)
    std::cout << "  chunk=" << to_string(type) << " params=" << to_string(params)
              << "\n";
}

int cmd_generate_history(const std::string& scenario_path,
                         const std::string& out_path, int repeats,
                         std::uint64_t seed, bool seed_set,
                         const std::string& levels_csv) {
  auto scenario_file = config::parse_scenario_file(scenario_path);
  if (seed_set) scenario_file.scenario.seed = seed;
  if (scenario_file.datasets.empty())
    throw config::ConfigError("scenario has no dataset lines");

  std::vector<sim::SimScenario> scenarios;
  if (levels_csv.empty()) {
    scenarios.push_back(scenario_file.scenario);
  } else {
    std::istringstream is(levels_csv);
    std::string level;
    std::vector<int> levels;
    while (std::getline(is, level, ',')) levels.push_back(std::stoi(level));
    scenarios = traffic_sweep(scenario_file.scenario, levels);
  }

  std::vector<Chunk> datasets;
  for (const auto& spec : scenario_file.datasets) {
    auto files = config::build_files(spec);
    const ChunkType type =
        classify_file(files.front().size, scenario_file.scenario.network);
    datasets.push_back(make_chunk(type, std::move(files)));
  }

  const auto entries = sim::generate_history(
      scenarios, datasets, sim::default_param_grid(), repeats);
  history::HistoryStore store;
  store.append(entries);
  store.save(out_path);
  std::cout << "wrote " << entries.size() << " entries to " << out_path << "\n";
  return 0;
}

int cmd_optimize(const std::string& history_path, const std::string& manifest,
                 const std::string& scenario_path, const std::string& probe_text,
                 int min_entries, std::uint64_t seed, bool seed_set,
                 const std::string& dump_models) {
  auto scenario_file = config::parse_scenario_file(scenario_path);
  if (seed_set) scenario_file.scenario.seed = seed;
  auto store = history::HistoryStore::load(history_path);
  const auto chunks = load_dataset(manifest, scenario_file);
  const ProbeSpec probe = parse_probe(probe_text);
  const NetworkProfile& network = scenario_file.scenario.network;

  scheduler::SimExecutor executor(scenario_file.scenario);
  std::ofstream models_out;
  if (!dump_models.empty()) {
    models_out.open(dump_models);
    if (!models_out)
      throw config::ConfigError("cannot write models file: " + dump_models);
  }

  double t = 0;
  for (const auto& chunk : chunks) {
    ParamTriple probe_params = probe.params;
    double probe_thr = probe.throughput_bps;
    if (probe.adaptive) {
      probe_params = scheduler::heuristic_params(chunk, network);
      auto session = executor.start({{chunk, probe_params}}, t);
      const auto sample = scheduler::adaptive_sample(*session, {});
      probe_thr = sample.throughput_bps;
      session->stop();
      t = session->now();
    }

    const auto query = raw_features(network, chunk.type, chunk.avg_file_size,
                                    static_cast<double>(chunk.files.size()));
    const auto filtered = similarity::filter_similar(store, query, min_entries);
    const auto groups = similarity::group_by_session(filtered.entries);
    std::vector<modeling::ThroughputModel> models;
    int rejected = 0;
    for (const auto& g : groups) {
      if (auto m = modeling::fit_group(g, scenario_file.scenario.seed))
        models.push_back(std::move(*m));
      else
        ++rejected;
    }

    std::cout << "chunk=" << to_string(chunk.type)
              << " files=" << chunk.files.size()
              << " avg_bytes=" << fmt(chunk.avg_file_size, 0)
              << " probe=" << to_string(probe_params)
              << " probe_mbps=" << fmt(mbps(probe_thr)) << "\n";
    std::cout << "  filter: entries=" << filtered.entries.size()
              << " threshold=" << fmt(filtered.threshold, 2)
              << (filtered.underfilled ? " (underfilled)" : "")
              << " groups kept=" << models.size() << " rejected=" << rejected
              << "\n";
    if (models.empty()) {
      std::cout << "  no usable model; heuristic parameters apply\n";
      continue;
    }

    const auto result = optimizer::run(
        {probe_params, probe_thr, models, {}, {}, 0.10});
    std::cout << "  params=" << to_string(result.params)
              << " estimated_mbps=" << fmt(mbps(result.estimated_throughput_bps))
              << " unit_mbps=" << fmt(mbps(result.unit_throughput_bps)) << "\n";
    for (const auto& oc : result.per_model)
      std::cout << "    model group=" << oc.group_id << " eps_mbps="
                << fmt(mbps(oc.epsilon_bps)) << " weight=" << oc.weight
                << " opt=" << to_string(oc.optimum)
                << " relaxed=" << to_string(oc.relaxed) << "\n";
    if (models_out.is_open()) {
      for (std::size_t i = 0; i < models.size(); ++i) {
        auto m = models[i];
        m.epsilon_bps = result.per_model[i].epsilon_bps;
        m.weight = result.per_model[i].weight;
        models_out << modeling::to_record(m) << '\n';
      }
    }
  }
  return 0;
}

int cmd_simulate(const std::string& plan_path, const std::string& scenario_path,
                 const std::string& manifest, const std::string& strategy_name,
                 bool online, std::uint64_t seed, bool seed_set,
                 const std::string& history_path, const std::string& traffic,
                 const std::string& timeline_out, const std::string& log_out) {
  auto scenario_file = config::parse_scenario_file(scenario_path);
  if (seed_set) scenario_file.scenario.seed = seed;
  if (!traffic.empty())
    config::apply_traffic_preset(scenario_file.scenario, traffic);
  const auto chunks = load_dataset(manifest, scenario_file);
  scheduler::SimExecutor executor(scenario_file.scenario);

  scheduler::StrategyReport report;
  if (plan_path != "auto") {
    const auto plan = config::parse_plan(plan_path);
    std::vector<std::pair<Chunk, ParamTriple>> work;
    for (const auto& chunk : chunks) {
      const auto row =
          std::find_if(plan.begin(), plan.end(),
                       [&](const auto& r) { return r.first == chunk.type; });
      if (row == plan.end())
        throw config::ConfigError("plan has no row for chunk type " +
                                  to_string(chunk.type));
      work.emplace_back(chunk, row->second);
      report.decisions.emplace_back(chunk.type, row->second);
    }
    auto session = executor.start(std::move(work), 0.0);
    const auto res = session->run_to_completion();
    report.strategy = scheduler::Strategy::Harp;  // plan playback
    report.bytes = 0;
    for (const auto& c : res.per_chunk) report.bytes += c.bytes;
    report.timeline = res.timeline;
    report.duration_s = res.duration_s;
    report.aggregate_throughput_bps = res.aggregate_throughput_bps;
    std::cout << "plan playback aggregate_mbps="
              << fmt(mbps(report.aggregate_throughput_bps))
              << " duration_s=" << fmt(report.duration_s) << "\n";
  } else {
    const auto strategy = scheduler::parse_strategy(strategy_name);
    if (strategy == scheduler::Strategy::Harp) {
      history::HistoryStore store =
          history_path.empty()
              ? synthesize_history(scenario_file.scenario, chunks)
              : history::HistoryStore::load(history_path);
      scheduler::HarpOptions options;
      options.online = online;
      options.split_seed = scenario_file.scenario.seed;
      report = scheduler::run_harp(chunks, scenario_file.scenario.network, store,
                                   executor, options);
    } else {
      report = scheduler::run_baseline(strategy, chunks,
                                       scenario_file.scenario.network, executor);
    }
    print_report(report);
  }

  if (!timeline_out.empty())
    config::write_timeline_csv(timeline_out, report.timeline);
  if (!log_out.empty()) {
    std::ofstream out(log_out);
    if (!out) throw config::ConfigError("cannot write decision log: " + log_out);
    out << online::log_header() << '\n';
    for (const auto& row : report.online_log) out << online::to_csv(row) << '\n';
  }
  return 0;
}

int cmd_compare(const std::string& scenario_path, const std::string& manifest,
                const std::string& strategies_csv, const std::string& traffic,
                std::uint64_t seed, bool seed_set,
                const std::string& history_path) {
  auto scenario_file = config::parse_scenario_file(scenario_path);
  if (seed_set) scenario_file.scenario.seed = seed;
  const sim::SimScenario base = scenario_file.scenario;
  if (!traffic.empty())
    config::apply_traffic_preset(scenario_file.scenario, traffic);
  const auto chunks = load_dataset(manifest, scenario_file);

  std::vector<scheduler::Strategy> strategies;
  std::istringstream is(strategies_csv);
  std::string name;
  while (std::getline(is, name, ','))
    strategies.push_back(scheduler::parse_strategy(name));

  std::optional<history::HistoryStore> store;
  const bool wants_harp =
      std::find(strategies.begin(), strategies.end(),
                scheduler::Strategy::Harp) != strategies.end();
  if (wants_harp) {
    store = history_path.empty() ? synthesize_history(base, chunks)
                                 : history::HistoryStore::load(history_path);
  }

  std::cout << "strategy aggregate_mbps duration_s\n";
  for (const auto strategy : strategies) {
    scheduler::SimExecutor executor(scenario_file.scenario);
    scheduler::StrategyReport report;
    if (strategy == scheduler::Strategy::Harp) {
      scheduler::HarpOptions options;
      options.split_seed = scenario_file.scenario.seed;
      report = scheduler::run_harp(chunks, scenario_file.scenario.network,
                                   *store, executor, options);
    } else {
      report = scheduler::run_baseline(strategy, chunks,
                                       scenario_file.scenario.network, executor);
    }
    std::cout << scheduler::to_string(strategy) << ' '
              << fmt(mbps(report.aggregate_throughput_bps)) << ' '
              << fmt(report.duration_s) << "\n";
  }
  return 0;
}

int cmd_cost_table() {
  std::cout << "speedup_pct slowdown_pct min_size_x_thr0\n";
  for (int speedup : {10, 30, 50}) {
    for (int slowdown : {50, 30, 10}) {
      const double d = scheduler::cost_min_chunk_size(speedup / 100.0,
                                                      slowdown / 100.0);
      std::cout << speedup << ' ' << slowdown << ' '
                << static_cast<long long>(std::llround(d)) << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xfertune: transfer parameter auto-tuning over a simulated path"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  bool seed_set = false;
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override the scenario seed")
        ->each([&](const std::string&) { seed_set = true; });
  };

  // generate-history
  std::string gh_scenario, gh_out, gh_levels;
  int gh_repeats = 1;
  auto* gh = app.add_subcommand("generate-history",
                                "sweep the parameter grid and write a history file");
  gh->add_option("scenario", gh_scenario, "scenario config file")->required();
  gh->add_option("out", gh_out, "output history file")->required();
  gh->add_option("--repeats", gh_repeats, "sweep repetitions")
      ->check(CLI::PositiveNumber);
  gh->add_option("--traffic-levels", gh_levels,
                 "comma-separated bg flow counts, one scenario per level");
  add_seed(gh);

  // optimize
  std::string op_history, op_manifest, op_scenario, op_probe = "adaptive";
  std::string op_dump;
  int op_min_entries = 432;
  auto* op = app.add_subcommand("optimize",
                                "estimate per-chunk parameters from history");
  op->add_option("history", op_history, "history file")->required();
  op->add_option("manifest", op_manifest, "dataset manifest")->required();
  op->add_option("scenario", op_scenario, "scenario config file")->required();
  op->add_option("--probe", op_probe, "'adaptive' or 'given:cc,p,pp=thr_bps'");
  op->add_option("--min-entries", op_min_entries, "similarity filter target");
  op->add_option("--dump-models", op_dump, "write fitted model records here");
  add_seed(op);

  // simulate
  std::string si_plan, si_scenario, si_manifest, si_strategy = "harp";
  std::string si_history, si_traffic, si_timeline, si_log;
  bool si_online = false;
  auto* si = app.add_subcommand("simulate", "run one strategy or a plan file");
  si->add_option("plan", si_plan, "'auto' or a plan file")->required();
  si->add_option("scenario", si_scenario, "scenario config file")->required();
  si->add_option("--manifest", si_manifest, "dataset manifest");
  si->add_option("--strategy", si_strategy, "harp|go|sc|promc|pcp");
  si->add_flag("--online", si_online, "enable online tuning (harp)");
  si->add_option("--history", si_history, "history file for harp");
  si->add_option("--traffic", si_traffic, "light|medium|heavy preset");
  si->add_option("--timeline-out", si_timeline, "write timeline CSV");
  si->add_option("--log-out", si_log, "write online decision log CSV");
  add_seed(si);

  // compare
  std::string cp_scenario, cp_manifest, cp_strategies = "harp,go,sc,promc,pcp";
  std::string cp_traffic, cp_history;
  auto* cp = app.add_subcommand("compare", "aggregate throughput per strategy");
  cp->add_option("scenario", cp_scenario, "scenario config file")->required();
  cp->add_option("dataset", cp_manifest, "dataset manifest")->required();
  cp->add_option("--strategies", cp_strategies, "comma-separated list");
  cp->add_option("--traffic", cp_traffic, "light|medium|heavy preset");
  cp->add_option("--history", cp_history, "history file for harp");
  add_seed(cp);

  auto* ct = app.add_subcommand("cost-table",
                                "minimum transfer size for sampling to pay off");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gh->parsed())
      return cmd_generate_history(gh_scenario, gh_out, gh_repeats, seed,
                                  seed_set, gh_levels);
    if (op->parsed())
      return cmd_optimize(op_history, op_manifest, op_scenario, op_probe,
                          op_min_entries, seed, seed_set, op_dump);
    if (si->parsed())
      return cmd_simulate(si_plan, si_scenario, si_manifest, si_strategy,
                          si_online, seed, seed_set, si_history, si_traffic,
                          si_timeline, si_log);
    if (cp->parsed())
      return cmd_compare(cp_scenario, cp_manifest, cp_strategies, cp_traffic,
                         seed, seed_set, cp_history);
    if (ct->parsed()) return cmd_cost_table();
  } catch (const config::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const history::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    // I/O failures on known paths count as file errors.
    const std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    return what.find("cannot open") != std::string::npos ? 2 : 1;
  }
  return 0;
}
