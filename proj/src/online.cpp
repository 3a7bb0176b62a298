#include "xfertune/online.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace xfertune::online {

OnlineState::OnlineState(const OnlineConfig& config) : config_(config) {
  if (config_.k < 2) throw std::invalid_argument("online k must be >= 2");
  if (config_.min_diff < 1)
    throw std::invalid_argument("online min_diff must be >= 1");
}

namespace {

// All diffs share a strict sign; zero breaks consistency.
bool consistent_sign(const std::vector<int>& diffs) {
  if (diffs.empty()) return false;
  const int sign = diffs.front() > 0 ? 1 : diffs.front() < 0 ? -1 : 0;
  if (sign == 0) return false;
  return std::all_of(diffs.begin(), diffs.end(),
                     [sign](int d) { return d * sign > 0; });
}

double median_abs(std::vector<int> diffs) {
  for (auto& d : diffs) d = std::abs(d);
  std::sort(diffs.begin(), diffs.end());
  const std::size_t n = diffs.size();
  return n % 2 ? diffs[n / 2] : (diffs[n / 2 - 1] + diffs[n / 2]) / 2.0;
}

}  // namespace

Decision OnlineState::on_interval(double observed_throughput_bps,
                                  const ParamTriple& current,
                                  const OptimizeFn& optimize) {
  if (!(observed_throughput_bps > 0))
    throw std::invalid_argument("observed throughput must be positive");

  std::optional<ParamTriple> suggested;
  try {
    suggested = optimize(current, observed_throughput_bps);
  } catch (const std::exception&) {
    suggested = std::nullopt;
  }
  if (!suggested) return {false, current};  // optimizer failed, ring unchanged
  last_suggestion_ = suggested;

  suggestions_.push_back(*suggested);
  while (suggestions_.size() > static_cast<std::size_t>(config_.k))
    suggestions_.pop_front();
  if (suggestions_.size() < static_cast<std::size_t>(config_.k))
    return {false, current};

  auto gather = [&](auto field) {
    std::vector<int> diffs;
    diffs.reserve(suggestions_.size());
    for (const auto& s : suggestions_) diffs.push_back(field(s) - field(current));
    return diffs;
  };
  const auto cc_diffs = gather([](const ParamTriple& t) { return t.cc; });
  const auto p_diffs = gather([](const ParamTriple& t) { return t.p; });
  const auto pp_diffs = gather([](const ParamTriple& t) { return t.pp; });

  ParamTriple next = current;
  bool update = false;
  if (consistent_sign(cc_diffs) && median_abs(cc_diffs) >= config_.min_diff) {
    next.cc = suggestions_.back().cc;
    update = true;
  }
  if (consistent_sign(p_diffs) && median_abs(p_diffs) >= config_.min_diff) {
    next.p = suggestions_.back().p;
    update = true;
  }
  // Pipelining changes are cheap: no magnitude gate.
  if (consistent_sign(pp_diffs)) {
    next.pp = suggestions_.back().pp;
    update = true;
  }
  if (update) suggestions_.clear();  // fresh count for the new regime
  return {update, next};
}

double transition_cost(const ParamTriple& from, const ParamTriple& to,
                       double conn_setup_s) {
  if (to.p != from.p) {
    // Teardown + re-establish of every continuing channel, priced at one
    // setup each; extra channels pay setup as well.
    const int rebuilt = std::min(from.cc, to.cc);
    const int added = std::max(to.cc - from.cc, 0);
    return conn_setup_s * (rebuilt + added);
  }
  if (to.cc > from.cc) return conn_setup_s * (to.cc - from.cc);
  return 0.0;
}

std::string log_header() {
  return "interval,t_s,chunk,observed_bps,sugg_cc,sugg_p,sugg_pp,applied,cc,p,pp,flows";
}

std::string to_csv(const LogRow& row) {
  std::ostringstream os;
  os << row.interval << ',' << row.t_s << ',' << row.chunk << ','
     << row.observed_bps << ',' << row.suggestion.cc << ',' << row.suggestion.p
     << ',' << row.suggestion.pp << ',' << (row.applied ? 1 : 0) << ','
     << row.params.cc << ',' << row.params.p << ',' << row.params.pp << ','
     << row.flows;
  return os.str();
}

}  // namespace xfertune::online
