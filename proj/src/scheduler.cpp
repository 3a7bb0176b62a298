#include "xfertune/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "xfertune/similarity.hpp"

namespace xfertune::scheduler {

namespace {

class SimSession : public Session {
 public:
  SimSession(std::vector<std::pair<Chunk, ParamTriple>> chunks,
             const sim::SimScenario& scenario, double t, std::uint64_t stream)
      : session_(std::move(chunks), scenario, t, stream) {}

  double now() const override { return session_.now(); }
  bool finished() const override { return session_.finished(); }
  double poll_interval(double interval_s) override {
    return session_.poll_interval(interval_s);
  }
  void update_params(std::size_t chunk, const ParamTriple& params,
                     double transition_cost_s) override {
    session_.update_params(chunk, params, transition_cost_s);
  }
  ParamTriple params(std::size_t chunk) const override {
    return session_.params(chunk);
  }
  double delivered_bytes(std::size_t chunk) const override {
    return session_.delivered_bytes(chunk);
  }
  double delivered_bytes() const override { return session_.delivered_bytes(); }
  int current_flows() const override { return session_.current_flows(); }
  sim::SimResult run_to_completion() override {
    return session_.run_to_completion();
  }
  sim::SimResult stop() override { return session_.stop(); }
  sim::RemainingChunk remaining(std::size_t chunk) const override {
    return session_.remaining(chunk);
  }

 private:
  sim::TransferSession session_;
};

int ceil_div_positive(double num, double den) {
  return static_cast<int>(std::ceil(num / den - 1e-9));
}

void merge_result(StrategyReport& report, const sim::SimResult& res) {
  for (const auto& c : res.per_chunk) report.bytes += c.bytes;
  report.timeline.insert(report.timeline.end(), res.timeline.begin(),
                         res.timeline.end());
}

void finalize_report(StrategyReport& report, double end_s) {
  report.duration_s = end_s;
  report.aggregate_throughput_bps =
      end_s > 0 ? report.bytes * 8.0 / end_s : 0.0;
}

double session_end(double start, const sim::SimResult& res) {
  return start + res.duration_s;
}

// Models, their precomputed optima, and per-probe reweighting. The
// maximization does not depend on the probe, so online re-optimization
// only redoes residuals, clustering, and the combiner.
struct PreparedOptimizer {
  std::vector<modeling::ThroughputModel> models;
  std::vector<optimizer::ModelOutcome> outcomes;
  ParamBounds bounds;
  optimizer::Relaxation relaxation;

  bool empty() const { return models.empty(); }

  void prepare(const ParamTriple& probe_hint) {
    outcomes.clear();
    outcomes.reserve(models.size());
    for (const auto& m : models) {
      const auto mx = optimizer::maximize(m, bounds, probe_hint);
      optimizer::ModelOutcome oc;
      oc.group_id = m.group_id;
      oc.tmax_bps = mx.tmax_bps;
      oc.optimum = mx.params;
      oc.relaxed = optimizer::relax(m, mx, relaxation, bounds);
      outcomes.push_back(std::move(oc));
    }
  }

  optimizer::OptimizerResult suggest(const ParamTriple& probe,
                                     double observed_bps) {
    const auto eps = optimizer::residuals(models, probe, observed_bps);
    for (std::size_t i = 0; i < models.size(); ++i)
      models[i].epsilon_bps = eps[i];
    optimizer::assign_weights(models, observed_bps);
    for (std::size_t i = 0; i < models.size(); ++i) {
      outcomes[i].epsilon_bps = models[i].epsilon_bps;
      outcomes[i].weight = models[i].weight;
    }
    return optimizer::combine(models, outcomes, bounds);
  }
};

struct ChunkModels {
  PreparedOptimizer prepared;
  int kept = 0;
  int rejected = 0;
};

ChunkModels fit_chunk_models(const history::HistoryStore& store,
                             const NetworkProfile& network, const Chunk& chunk,
                             const ParamTriple& probe_hint,
                             const HarpOptions& options) {
  ChunkModels cm;
  cm.prepared.bounds = options.bounds;
  cm.prepared.relaxation = options.relaxation;
  if (store.empty()) return cm;

  const auto query = raw_features(network, chunk.type, chunk.avg_file_size,
                                  static_cast<double>(chunk.files.size()));
  const auto filtered =
      similarity::filter_similar(store, query, options.min_filter_entries);
  const auto groups =
      similarity::group_by_session(filtered.entries, options.min_group);
  for (const auto& g : groups) {
    auto model = modeling::fit_group(g, options.split_seed);
    if (model) {
      cm.prepared.models.push_back(std::move(*model));
      ++cm.kept;
    } else {
      ++cm.rejected;
    }
  }
  if (!cm.prepared.empty()) cm.prepared.prepare(probe_hint);
  return cm;
}

}  // namespace

std::unique_ptr<Session> SimExecutor::start(
    std::vector<std::pair<Chunk, ParamTriple>> chunks, double t) {
  return std::make_unique<SimSession>(std::move(chunks), scenario_, t,
                                      next_stream_++);
}

std::vector<Chunk> partition_files(const std::vector<FileInfo>& files,
                                   const NetworkProfile& network,
                                   const ChunkThresholds& thresholds) {
  std::array<std::vector<FileInfo>, 4> buckets;
  for (const auto& f : files) {
    const ChunkType t = classify_file(f.size, network, thresholds);
    buckets[static_cast<std::size_t>(t)].push_back(f);
  }
  std::vector<Chunk> chunks;
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    if (buckets[i].empty()) continue;
    chunks.push_back(
        make_chunk(static_cast<ChunkType>(i), std::move(buckets[i])));
  }
  return chunks;
}

ParamTriple heuristic_params(const Chunk& chunk, const NetworkProfile& network,
                             const ParamBounds& bounds, int cc_default) {
  if (chunk.files.empty()) throw std::invalid_argument("empty chunk");
  const double bdp = network.bdp_bytes();
  const int pp =
      std::clamp(ceil_div_positive(bdp, chunk.avg_file_size), 1, bounds.pp_max);
  const int p =
      std::clamp(ceil_div_positive(bdp, network.buffer_bytes), 1, bounds.p_max);
  const int cc = std::clamp(
      std::min(static_cast<int>(chunk.files.size()), cc_default), 1,
      bounds.cc_max);
  return ParamTriple(cc, p, pp, bounds);
}

SampleResult adaptive_sample(Session& session, const SamplingConfig& config) {
  if (!(config.convergence_pct > 0 && config.convergence_pct < 1))
    throw std::invalid_argument("convergence_pct must be in (0,1)");
  const double t0 = session.now();
  double prev = -1;
  while (true) {
    const double thr = session.poll_interval(config.monitor_interval_s);
    const double elapsed = session.now() - t0;
    if (prev > 0 &&
        std::abs(thr - prev) <= config.convergence_pct * prev) {
      return {(thr + prev) / 2.0, elapsed, session.delivered_bytes(), true};
    }
    if (session.finished() || elapsed >= config.max_sample_time_s - 1e-9) {
      return {thr, elapsed, session.delivered_bytes(), false};
    }
    prev = thr;
  }
}

TransferPlan build_plan(const std::vector<Chunk>& chunks,
                        const std::vector<optimizer::OptimizerResult>& results,
                        const ParamBounds& bounds) {
  if (chunks.empty() || chunks.size() != results.size())
    throw std::invalid_argument("build_plan needs one optimizer result per chunk");

  TransferPlan plan;
  plan.total_unit_throughput_bps = 0;
  plan.max_cc = 1;
  for (const auto& r : results) {
    if (!(r.unit_throughput_bps > 0))
      throw std::domain_error("unit throughput must be positive");
    plan.total_unit_throughput_bps += r.unit_throughput_bps;
    plan.max_cc = std::max(plan.max_cc, r.params.cc);
  }

  double total_weight = 0;
  std::vector<double> weights(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    weights[i] = static_cast<double>(chunks[i].total_size) *
                 plan.total_unit_throughput_bps / results[i].unit_throughput_bps;
    total_weight += weights[i];
  }

  for (std::size_t i = 0; i < chunks.size(); ++i) {
    ChunkPlan cp;
    cp.chunk_index = i;
    cp.weight = weights[i];
    cp.unit_throughput_bps = results[i].unit_throughput_bps;
    cp.estimated_throughput_bps = results[i].estimated_throughput_bps;
    const int cc = std::max(
        1, static_cast<int>(std::floor(plan.max_cc * weights[i] / total_weight)));
    cp.params = ParamTriple(std::min(cc, bounds.cc_max), results[i].params.p,
                            results[i].params.pp, bounds);
    plan.chunks.push_back(cp);
  }
  return plan;
}

sim::SimResult execute_plan(const TransferPlan& plan,
                            const std::vector<Chunk>& chunks, Executor& executor,
                            double start_s) {
  if (plan.chunks.empty()) throw std::invalid_argument("empty transfer plan");
  std::vector<std::pair<Chunk, ParamTriple>> work;
  work.reserve(plan.chunks.size());
  for (const auto& cp : plan.chunks)
    work.emplace_back(chunks.at(cp.chunk_index), cp.params);
  auto session = executor.start(std::move(work), start_s);
  return session->run_to_completion();
}

double cost_min_chunk_size(double speedup, double slowdown,
                           double sample_time_s, double optimizer_latency_s) {
  if (!(speedup > 0)) throw std::invalid_argument("speedup must be positive");
  if (slowdown < 0 || slowdown >= 1)
    throw std::invalid_argument("slowdown must be in [0,1)");
  const double s = sample_time_s;
  const double c = optimizer_latency_s;
  return ((s + c) * (1.0 + speedup) - s * (1.0 - slowdown)) / speedup;
}

Strategy parse_strategy(const std::string& name) {
  if (name == "harp") return Strategy::Harp;
  if (name == "go") return Strategy::GlobusOnline;
  if (name == "sc") return Strategy::SingleChunk;
  if (name == "promc") return Strategy::ProMC;
  if (name == "pcp") return Strategy::PCP;
  throw std::invalid_argument("unknown strategy: " + name);
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Harp: return "harp";
    case Strategy::GlobusOnline: return "go";
    case Strategy::SingleChunk: return "sc";
    case Strategy::ProMC: return "promc";
    case Strategy::PCP: return "pcp";
  }
  return "unknown";
}

namespace {

ParamTriple go_params(const Chunk& chunk, const BaselineOptions& options) {
  for (const auto& row : options.go_table) {
    if (row.max_avg_file_size < 0 || chunk.avg_file_size <= row.max_avg_file_size)
      return row.params;
  }
  return options.go_table.back().params;
}

StrategyReport run_sequential(Strategy strategy,
                              const std::vector<std::pair<Chunk, ParamTriple>>& work,
                              Executor& executor) {
  StrategyReport report;
  report.strategy = strategy;
  double t = 0;
  for (const auto& [chunk, params] : work) {
    auto session = executor.start({{chunk, params}}, t);
    const auto res = session->run_to_completion();
    merge_result(report, res);
    report.decisions.emplace_back(chunk.type, params);
    t = session_end(t, res);
  }
  finalize_report(report, t);
  return report;
}

StrategyReport run_pcp(const std::vector<Chunk>& chunks, Executor& executor,
                       const BaselineOptions& options) {
  StrategyReport report;
  report.strategy = Strategy::PCP;
  double t = 0;
  for (const auto& chunk : chunks) {
    std::vector<FileInfo> left = chunk.files;

    // One short measured transfer; consumes files and simulated time.
    auto probe = [&](const ParamTriple& params) -> double {
      if (left.empty()) return -1;
      auto session = executor.start({{make_chunk(chunk.type, left), params}}, t);
      const double thr = session->poll_interval(options.probe_interval_s);
      const auto rem = session->remaining(0);
      merge_result(report, session->stop());
      t = session->now();
      left = rem.files;
      return thr;
    };

    ParamTriple best(1, 1, 1, options.bounds);
    double best_thr = probe(best);
    // Doubling sweep per parameter until the probe throughput drops.
    for (int dim = 0; dim < 3; ++dim) {
      while (!left.empty()) {
        ParamTriple cand = best;
        int& v = dim == 0 ? cand.cc : dim == 1 ? cand.p : cand.pp;
        const int bound = dim == 0   ? options.bounds.cc_max
                          : dim == 1 ? options.bounds.p_max
                                     : options.bounds.pp_max;
        if (v * 2 > bound) break;
        v *= 2;
        const double thr = probe(cand);
        if (thr > best_thr) {
          best = cand;
          best_thr = thr;
        } else {
          break;
        }
      }
    }

    if (!left.empty()) {
      auto session = executor.start({{make_chunk(chunk.type, left), best}}, t);
      const auto res = session->run_to_completion();
      merge_result(report, res);
      t = session_end(t, res);
    }
    report.decisions.emplace_back(chunk.type, best);
  }
  finalize_report(report, t);
  return report;
}

}  // namespace

StrategyReport run_baseline(Strategy strategy, const std::vector<Chunk>& chunks,
                            const NetworkProfile& network, Executor& executor,
                            const BaselineOptions& options) {
  if (chunks.empty()) throw std::invalid_argument("no chunks to transfer");
  switch (strategy) {
    case Strategy::GlobusOnline: {
      std::vector<std::pair<Chunk, ParamTriple>> work;
      for (const auto& chunk : chunks)
        work.emplace_back(chunk, go_params(chunk, options));
      return run_sequential(strategy, work, executor);
    }
    case Strategy::SingleChunk: {
      std::vector<std::pair<Chunk, ParamTriple>> work;
      for (const auto& chunk : chunks) {
        ParamTriple params = heuristic_params(chunk, network, options.bounds);
        const int cc_est = ceil_div_positive(
            static_cast<double>(chunk.total_size), network.bdp_bytes());
        params.cc = std::clamp(std::min(cc_est, options.max_cc), 1,
                               options.bounds.cc_max);
        work.emplace_back(chunk, params);
      }
      return run_sequential(strategy, work, executor);
    }
    case Strategy::ProMC: {
      double total_size = 0;
      for (const auto& chunk : chunks)
        total_size += static_cast<double>(chunk.total_size);
      std::vector<std::pair<Chunk, ParamTriple>> work;
      StrategyReport report;
      report.strategy = strategy;
      for (const auto& chunk : chunks) {
        ParamTriple params = heuristic_params(chunk, network, options.bounds);
        const int share = static_cast<int>(std::floor(
            options.max_cc * static_cast<double>(chunk.total_size) / total_size));
        params.cc = std::clamp(std::max(1, share), 1, options.bounds.cc_max);
        report.decisions.emplace_back(chunk.type, params);
        work.emplace_back(chunk, params);
      }
      auto session = executor.start(std::move(work), 0.0);
      const auto res = session->run_to_completion();
      merge_result(report, res);
      finalize_report(report, res.duration_s);
      return report;
    }
    case Strategy::PCP:
      return run_pcp(chunks, executor, options);
    case Strategy::Harp:
      throw std::invalid_argument("harp requires a history store; use run_harp");
  }
  throw std::invalid_argument("unknown strategy");
}

namespace {

StrategyReport run_harp_online(const std::vector<Chunk>& chunks,
                               const NetworkProfile& network,
                               const history::HistoryStore& store,
                               Executor& executor, const HarpOptions& options) {
  StrategyReport report;
  report.strategy = Strategy::Harp;

  std::vector<std::pair<Chunk, ParamTriple>> work;
  std::vector<ChunkModels> models;
  std::vector<online::OnlineState> states;
  std::vector<double> totals;
  for (const auto& chunk : chunks) {
    const ParamTriple probe = heuristic_params(chunk, network, options.bounds);
    models.push_back(fit_chunk_models(store, network, chunk, probe, options));
    states.emplace_back(options.online_config);
    totals.push_back(static_cast<double>(chunk.total_size));
    work.emplace_back(chunk, probe);

    ChunkDiagnostics diag;
    diag.type = chunk.type;
    diag.probe_params = probe;
    diag.groups_kept = models.back().kept;
    diag.groups_rejected = models.back().rejected;
    diag.model_fallback = models.back().prepared.empty();
    report.diagnostics.push_back(diag);
  }

  auto session = executor.start(std::move(work), 0.0);
  const double interval = options.online_config.monitor_interval_s;
  std::vector<double> bytes_before(chunks.size(), 0.0);
  int interval_index = 0;
  while (!session->finished()) {
    for (std::size_t i = 0; i < chunks.size(); ++i)
      bytes_before[i] = session->delivered_bytes(i);
    const double t_before = session->now();
    session->poll_interval(interval);
    const double elapsed = session->now() - t_before;
    ++interval_index;
    if (elapsed <= 0) break;

    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const double delivered = session->delivered_bytes(i);
      if (delivered >= totals[i] - 0.5) continue;  // chunk already done
      const double observed = (delivered - bytes_before[i]) * 8.0 / elapsed;
      if (!(observed > 0)) continue;  // stalled in a transition

      const ParamTriple current = session->params(i);
      auto& prepared = models[i].prepared;
      online::OptimizeFn fn = [&prepared](const ParamTriple& cur, double thr)
          -> std::optional<ParamTriple> {
        if (prepared.empty()) return std::nullopt;
        return prepared.suggest(cur, thr).params;
      };
      const auto decision = states[i].on_interval(observed, current, fn);

      online::LogRow row;
      row.interval = interval_index;
      row.t_s = session->now();
      row.chunk = i;
      row.observed_bps = observed;
      row.suggestion = states[i].last_suggestion().value_or(current);
      row.applied = decision.update;
      row.params = decision.update ? decision.params : current;
      if (decision.update) {
        const double cost = online::transition_cost(
            current, decision.params, options.online_config.conn_setup_s);
        session->update_params(i, decision.params, cost);
      }
      row.flows = session->current_flows();
      report.online_log.push_back(row);
    }
  }

  const auto res = session->run_to_completion();
  merge_result(report, res);
  for (std::size_t i = 0; i < chunks.size(); ++i)
    report.decisions.emplace_back(chunks[i].type, session->params(i));
  finalize_report(report, res.duration_s);
  return report;
}

}  // namespace

StrategyReport run_harp(const std::vector<Chunk>& chunks,
                        const NetworkProfile& network,
                        const history::HistoryStore& store, Executor& executor,
                        const HarpOptions& options) {
  if (chunks.empty()) throw std::invalid_argument("no chunks to transfer");
  if (options.online)
    return run_harp_online(chunks, network, store, executor, options);

  StrategyReport report;
  report.strategy = Strategy::Harp;
  double t = 0;

  std::vector<Chunk> remaining_chunks;
  std::vector<optimizer::OptimizerResult> remaining_results;
  std::vector<std::optional<ParamTriple>> final_params(chunks.size());

  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const Chunk& chunk = chunks[i];
    const ParamTriple probe = heuristic_params(chunk, network, options.bounds);

    auto session = executor.start({{chunk, probe}}, t);
    const SampleResult sample = adaptive_sample(*session, options.sampling);
    const auto rem = session->remaining(0);
    merge_result(report, session->stop());
    t = session->now();

    ChunkDiagnostics diag;
    diag.type = chunk.type;
    diag.probe_params = probe;
    diag.sample_throughput_bps = sample.throughput_bps;
    diag.sample_converged = sample.converged;

    auto cm = fit_chunk_models(store, network, chunk, probe, options);
    diag.groups_kept = cm.kept;
    diag.groups_rejected = cm.rejected;

    optimizer::OptimizerResult result;
    if (cm.prepared.empty() || !(sample.throughput_bps > 0)) {
      // No usable model: keep the heuristic probe parameters and spread
      // the sampled throughput across its channels as the unit estimate.
      diag.model_fallback = true;
      result.params = probe;
      result.estimated_throughput_bps = sample.throughput_bps;
      result.unit_throughput_bps =
          std::max(sample.throughput_bps / probe.cc, 1.0);
    } else {
      result = cm.prepared.suggest(probe, sample.throughput_bps);
      if (!(result.unit_throughput_bps > 0)) {
        diag.model_fallback = true;
        result.unit_throughput_bps = std::max(
            result.estimated_throughput_bps / std::max(result.params.cc, 1),
            std::max(sample.throughput_bps / probe.cc, 1.0));
      }
    }
    diag.optimizer = result;
    report.diagnostics.push_back(diag);
    final_params[i] = result.params;

    if (!rem.files.empty()) {
      remaining_chunks.push_back(make_chunk(chunk.type, rem.files));
      remaining_results.push_back(result);
    }
  }

  // Optimization is pipelined with sampling; only the last chunk's
  // optimizer run extends the critical path.
  t += options.optimizer_latency_s;
  double end = t;

  if (!remaining_chunks.empty()) {
    const TransferPlan plan =
        build_plan(remaining_chunks, remaining_results, options.bounds);
    std::vector<std::pair<Chunk, ParamTriple>> work;
    for (const auto& cp : plan.chunks)
      work.emplace_back(remaining_chunks[cp.chunk_index], cp.params);
    auto session = executor.start(std::move(work), t);
    const auto res = session->run_to_completion();
    merge_result(report, res);
    end = session_end(t, res);

    std::size_t k = 0;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      if (final_params[i] && k < plan.chunks.size() &&
          remaining_chunks[plan.chunks[k].chunk_index].type == chunks[i].type) {
        final_params[i] = plan.chunks[k].params;
        ++k;
      }
    }
  }

  for (std::size_t i = 0; i < chunks.size(); ++i)
    report.decisions.emplace_back(chunks[i].type,
                                  final_params[i].value_or(ParamTriple()));
  finalize_report(report, end);
  return report;
}

}  // namespace xfertune::scheduler
