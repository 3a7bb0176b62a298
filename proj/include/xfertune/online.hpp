// Online tuning controller: per monitor interval, re-optimizes with the
// observed throughput as the probe and applies parameter changes only
// when the last k suggestions agree in direction (and, for concurrency
// and parallelism, exceed a minimum median difference).

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>

#include "xfertune/core.hpp"

namespace xfertune::online {

struct OnlineConfig {
  int k = 4;              // consecutive intervals considered
  int min_diff = 2;       // median |suggested - current| gate for cc and p
  double monitor_interval_s = 3.0;
  double conn_setup_s = 2.0;  // per-channel establishment cost
};

struct Decision {
  bool update = false;
  ParamTriple params;  // values to apply when update is true
};

// Re-optimization callback; empty optional signals failure (keep).
using OptimizeFn =
    std::function<std::optional<ParamTriple>(const ParamTriple& current,
                                             double observed_throughput_bps)>;

class OnlineState {
 public:
  explicit OnlineState(const OnlineConfig& config = {});

  // One monitor interval: invokes the optimizer, appends its suggestion
  // to the ring, and decides. The ring resets after an applied update.
  Decision on_interval(double observed_throughput_bps,
                       const ParamTriple& current, const OptimizeFn& optimize);

  const OnlineConfig& config() const { return config_; }
  std::size_t ring_size() const { return suggestions_.size(); }
  const std::optional<ParamTriple>& last_suggestion() const {
    return last_suggestion_;
  }

 private:
  OnlineConfig config_;
  std::deque<ParamTriple> suggestions_;
  std::optional<ParamTriple> last_suggestion_;
};

// Simulated-time cost of switching parameters: pipelining is free, new
// channels pay conn_setup each, and a parallelism change re-establishes
// every continuing channel.
double transition_cost(const ParamTriple& from, const ParamTriple& to,
                       double conn_setup_s);

struct LogRow {
  int interval = 0;
  double t_s = 0;
  std::size_t chunk = 0;
  double observed_bps = 0;
  ParamTriple suggestion;
  bool applied = false;
  ParamTriple params;  // in effect after the decision
  int flows = 0;
};

std::string log_header();
std::string to_csv(const LogRow& row);

}  // namespace xfertune::online
