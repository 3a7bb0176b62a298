#include "xfertune/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xfertune::similarity {

NormalizationBounds NormalizationBounds::over(
    const history::FeatureStats& stats,
    const std::array<double, kFeatureCount>& query) {
  NormalizationBounds b;
  if (stats.empty) {
    b.min = query;
    b.max = query;
    return b;
  }
  for (int i = 0; i < kFeatureCount; ++i) {
    b.min[i] = std::min(stats.min[i], query[i]);
    b.max[i] = std::max(stats.max[i], query[i]);
  }
  return b;
}

FeatureVector NormalizationBounds::build(
    const std::array<double, kFeatureCount>& raw) const {
  FeatureVector fv;
  for (int i = 0; i < kFeatureCount; ++i) {
    const double span = max[i] - min[i];
    const double norm = span > 0 ? (raw[i] - min[i]) / span : 1.0;
    fv.v[i] = std::clamp(norm, 0.0, 1.0) * kFeatureWeights[i];
  }
  return fv;
}

double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
  double dot = 0, na = 0, nb = 0;
  for (int i = 0; i < kFeatureCount; ++i) {
    dot += a.v[i] * b.v[i];
    na += a.v[i] * a.v[i];
    nb += b.v[i] * b.v[i];
  }
  if (na <= 0 || nb <= 0)
    throw std::domain_error("cosine similarity of a zero vector is undefined");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

FilterResult filter_similar(const history::HistoryStore& store,
                            const std::array<double, kFeatureCount>& query_raw,
                            int min_entries) {
  if (store.empty()) throw std::domain_error("history store is empty");
  if (min_entries < 1) throw std::invalid_argument("min_entries must be >= 1");

  const auto bounds = NormalizationBounds::over(store.feature_stats(), query_raw);
  const FeatureVector query = bounds.build(query_raw);
  const bool query_zero =
      std::all_of(query.v.begin(), query.v.end(), [](double x) { return x == 0; });

  std::vector<double> sims;
  sims.reserve(store.size());
  for (const auto& e : store.entries()) {
    const FeatureVector fv = bounds.build(raw_features(e));
    const bool zero =
        std::all_of(fv.v.begin(), fv.v.end(), [](double x) { return x == 0; });
    sims.push_back(zero || query_zero ? 0.0 : cosine_similarity(query, fv));
  }

  FilterResult result;
  if (store.size() < static_cast<std::size_t>(min_entries)) {
    result.underfilled = true;
    result.threshold = 0.0;
    for (std::size_t i = 0; i < sims.size(); ++i)
      result.entries.push_back({store.entries()[i], sims[i]});
    return result;
  }

  // -1e-12 guards against ties lost to rounding.
  for (int step = 0;; ++step) {
    const double threshold = 0.99 - 0.01 * step;
    result.entries.clear();
    for (std::size_t i = 0; i < sims.size(); ++i) {
      if (sims[i] >= threshold - 1e-12)
        result.entries.push_back({store.entries()[i], sims[i]});
    }
    result.threshold = threshold;
    if (result.entries.size() >= static_cast<std::size_t>(min_entries) ||
        threshold <= 0.5)
      return result;
  }
}

namespace {

template <typename GetEntry, typename Range>
std::vector<EntryGroup> group_impl(const Range& entries, GetEntry get,
                                   int min_group) {
  std::vector<EntryGroup> groups;
  std::vector<std::string> order;
  auto find = [&](const std::string& id) -> EntryGroup* {
    for (auto& g : groups)
      if (g.session_id == id) return &g;
    return nullptr;
  };
  for (const auto& item : entries) {
    const HistoryEntry& e = get(item);
    EntryGroup* g = find(e.session_id);
    if (!g) {
      groups.push_back({e.session_id, e.network, e.chunk_type, e.avg_file_size,
                        e.file_count, {}});
      g = &groups.back();
    }
    g->members.push_back(e);
  }
  std::erase_if(groups, [min_group](const EntryGroup& g) {
    return g.members.size() < static_cast<std::size_t>(min_group);
  });
  return groups;
}

}  // namespace

std::vector<EntryGroup> group_by_session(const std::vector<HistoryEntry>& entries,
                                         int min_group) {
  return group_impl(entries, [](const HistoryEntry& e) -> const HistoryEntry& {
    return e;
  }, min_group);
}

std::vector<EntryGroup> group_by_session(const std::vector<ScoredEntry>& entries,
                                         int min_group) {
  return group_impl(entries, [](const ScoredEntry& s) -> const HistoryEntry& {
    return s.entry;
  }, min_group);
}

}  // namespace xfertune::similarity
