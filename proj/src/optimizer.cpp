#include "xfertune/optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace xfertune::optimizer {

namespace {

using Vec3 = std::array<double, 3>;

Vec3 clamp_box(Vec3 x, const ParamBounds& b) {
  x[0] = std::clamp(x[0], 1.0, static_cast<double>(b.cc_max));
  x[1] = std::clamp(x[1], 1.0, static_cast<double>(b.p_max));
  x[2] = std::clamp(x[2], 1.0, static_cast<double>(b.pp_max));
  return x;
}

double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

// BFGS on the negated model with iterates projected onto the box.
Vec3 ascend(const modeling::ThroughputModel& model, const ParamBounds& bounds,
            Vec3 x) {
  auto f = [&](const Vec3& v) { return model.evaluate(v[0], v[1], v[2]); };
  auto grad = [&](const Vec3& v) { return model.gradient(v[0], v[1], v[2]); };

  std::array<Vec3, 3> h = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  Vec3 g = grad(x);
  double fx = f(x);
  for (int iter = 0; iter < 80; ++iter) {
    Vec3 dir{};
    for (int i = 0; i < 3; ++i) dir[i] = dot(h[i], g);
    if (dot(dir, g) <= 0) {
      h = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
      dir = g;
    }
    const double dnorm = std::sqrt(dot(dir, dir));
    if (dnorm < 1e-12) break;
    for (auto& d : dir) d /= dnorm;

    double alpha = 8.0;
    Vec3 xn = x;
    double fn = fx;
    bool improved = false;
    for (int bt = 0; bt < 40; ++bt) {
      const Vec3 cand = clamp_box({x[0] + alpha * dir[0], x[1] + alpha * dir[1],
                                   x[2] + alpha * dir[2]},
                                  bounds);
      const double fc = f(cand);
      if (std::isfinite(fc) && fc > fx + 1e-12 * std::abs(fx)) {
        xn = cand;
        fn = fc;
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;

    const Vec3 gn = grad(xn);
    const Vec3 s{xn[0] - x[0], xn[1] - x[1], xn[2] - x[2]};
    // y is the gradient change of the negated objective.
    const Vec3 y{g[0] - gn[0], g[1] - gn[1], g[2] - gn[2]};
    const double sy = dot(s, y);
    if (sy > 1e-12) {
      // BFGS inverse update H' = (I - s yT/sy) H (I - y sT/sy) + s sT/sy.
      Vec3 hy{};
      for (int i = 0; i < 3; ++i) hy[i] = dot(h[i], y);
      const double yhy = dot(y, hy);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          h[i][j] += (sy + yhy) * s[i] * s[j] / (sy * sy) -
                     (hy[i] * s[j] + s[i] * hy[j]) / sy;
    } else {
      h = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    }
    const double step = std::sqrt(dot(s, s));
    x = xn;
    fx = fn;
    g = gn;
    if (step < 1e-7) break;
  }
  return x;
}

MaximizeResult grid_scan(const modeling::ThroughputModel& model,
                         const ParamBounds& bounds) {
  MaximizeResult best;
  best.tmax_bps = -std::numeric_limits<double>::infinity();
  for (int cc = 1; cc <= bounds.cc_max; ++cc)
    for (int p = 1; p <= bounds.p_max; ++p)
      for (int pp = 1; pp <= bounds.pp_max; ++pp) {
        const double v = model.evaluate(cc, p, pp);
        if (std::isfinite(v) && v > best.tmax_bps) {
          best.tmax_bps = v;
          best.params = ParamTriple(cc, p, pp, bounds);
        }
      }
  return best;
}

}  // namespace

std::vector<double> residuals(const std::vector<modeling::ThroughputModel>& models,
                              const ParamTriple& probe_params,
                              double probe_throughput_bps) {
  std::vector<double> eps;
  eps.reserve(models.size());
  for (const auto& m : models)
    eps.push_back(probe_throughput_bps - m.evaluate(probe_params));
  return eps;
}

void assign_weights(std::vector<modeling::ThroughputModel>& models,
                    double probe_throughput_bps, double eps_fraction) {
  if (models.empty()) throw std::invalid_argument("no models to weight");
  const double eps = eps_fraction * probe_throughput_bps;

  std::vector<std::size_t> order(models.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(models[a].epsilon_bps) < std::abs(models[b].epsilon_bps);
  });

  // With minPts = 1 every point is core, so clusters on the line are the
  // maximal chains with consecutive gaps <= eps.
  struct Cluster {
    std::vector<std::size_t> members;
    double sum = 0;
    double mean() const { return sum / static_cast<double>(members.size()); }
  };
  std::vector<Cluster> clusters;
  double prev = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double v = std::abs(models[order[k]].epsilon_bps);
    if (clusters.empty() || v - prev > eps) clusters.emplace_back();
    clusters.back().members.push_back(order[k]);
    clusters.back().sum += v;
    prev = v;
  }

  std::sort(clusters.begin(), clusters.end(),
            [](const Cluster& a, const Cluster& b) { return a.mean() > b.mean(); });
  for (std::size_t rank = 0; rank < clusters.size(); ++rank) {
    const std::int64_t w = std::int64_t{1} << std::min<std::size_t>(rank, 62);
    for (std::size_t idx : clusters[rank].members) models[idx].weight = w;
  }
}

MaximizeResult maximize(const modeling::ThroughputModel& model,
                        const ParamBounds& bounds,
                        const ParamTriple& probe_start) {
  const double ccm = bounds.cc_max, pm = bounds.p_max, ppm = bounds.pp_max;
  std::vector<Vec3> starts = {
      {1, 1, 1},     {ccm, 1, 1},   {1, pm, 1},   {1, 1, ppm},
      {ccm, pm, 1},  {ccm, 1, ppm}, {1, pm, ppm}, {ccm, pm, ppm},
      {(1 + ccm) / 2, (1 + pm) / 2, (1 + ppm) / 2},
      {static_cast<double>(probe_start.cc), static_cast<double>(probe_start.p),
       static_cast<double>(probe_start.pp)}};

  // Coarse power-of-two sweep doubles as an extra start and a sanity
  // floor for the final integer answer.
  static constexpr int kLevels[] = {1, 2, 4, 8, 16, 32};
  Vec3 coarse_best{1, 1, 1};
  double coarse_val = -std::numeric_limits<double>::infinity();
  for (int cc : kLevels)
    for (int p : kLevels)
      for (int pp : kLevels) {
        if (cc > bounds.cc_max || p > bounds.p_max || pp > bounds.pp_max)
          continue;
        const double v = model.evaluate(cc, p, pp);
        if (!std::isfinite(v)) return grid_scan(model, bounds);
        if (v > coarse_val) {
          coarse_val = v;
          coarse_best = {static_cast<double>(cc), static_cast<double>(p),
                         static_cast<double>(pp)};
        }
      }
  starts.push_back(coarse_best);

  int best_cc = static_cast<int>(coarse_best[0]);
  int best_p = static_cast<int>(coarse_best[1]);
  int best_pp = static_cast<int>(coarse_best[2]);
  double best_val = coarse_val;
  auto consider = [&](int cc, int p, int pp) {
    const double v = model.evaluate(cc, p, pp);
    if (std::isfinite(v) && v > best_val) {
      best_val = v;
      best_cc = cc;
      best_p = p;
      best_pp = pp;
    }
  };

  for (const auto& start : starts) {
    const Vec3 x = ascend(model, bounds, clamp_box(start, bounds));
    if (!std::isfinite(model.evaluate(x[0], x[1], x[2])))
      return grid_scan(model, bounds);
    const int fl[3] = {static_cast<int>(std::floor(x[0])),
                       static_cast<int>(std::floor(x[1])),
                       static_cast<int>(std::floor(x[2]))};
    for (int d0 = 0; d0 <= 1; ++d0)
      for (int d1 = 0; d1 <= 1; ++d1)
        for (int d2 = 0; d2 <= 1; ++d2)
          consider(std::clamp(fl[0] + d0, 1, bounds.cc_max),
                   std::clamp(fl[1] + d1, 1, bounds.p_max),
                   std::clamp(fl[2] + d2, 1, bounds.pp_max));
  }

  // Local integer refinement over the full +-1 neighborhood.
  for (bool moved = true; moved;) {
    moved = false;
    const int c0 = best_cc, p0 = best_p, q0 = best_pp;
    for (int dc = -1; dc <= 1; ++dc)
      for (int dp = -1; dp <= 1; ++dp)
        for (int dq = -1; dq <= 1; ++dq) {
          const int cc = c0 + dc, p = p0 + dp, pp = q0 + dq;
          if (cc < 1 || cc > bounds.cc_max || p < 1 || p > bounds.p_max ||
              pp < 1 || pp > bounds.pp_max)
            continue;
          const double v = model.evaluate(cc, p, pp);
          if (std::isfinite(v) && v > best_val + 1e-12 * std::abs(best_val)) {
            best_val = v;
            best_cc = cc;
            best_p = p;
            best_pp = pp;
            moved = true;
          }
        }
  }

  return {best_val, ParamTriple(best_cc, best_p, best_pp, bounds)};
}

ParamTriple relax(const modeling::ThroughputModel& model,
                  const MaximizeResult& optimum, const Relaxation& rho,
                  const ParamBounds& bounds) {
  if (rho.cc <= 0 || rho.cc > 1 || rho.p <= 0 || rho.p > 1 || rho.pp <= 0 ||
      rho.pp > 1)
    throw std::invalid_argument("relaxation ratios must be in (0,1]");
  const auto& opt = optimum.params;
  const double floor_of = optimum.tmax_bps;

  auto walk = [&](int start, double ratio, auto eval) {
    int kept = start;
    for (int v = start - 1; v >= 1; --v) {
      if (eval(v) >= ratio * floor_of)
        kept = v;
      else
        break;
    }
    return kept;
  };

  const int cc = walk(opt.cc, rho.cc,
                      [&](int v) { return model.evaluate(v, opt.p, opt.pp); });
  const int p = walk(opt.p, rho.p,
                     [&](int v) { return model.evaluate(opt.cc, v, opt.pp); });
  const int pp = walk(opt.pp, rho.pp,
                      [&](int v) { return model.evaluate(opt.cc, opt.p, v); });
  return ParamTriple(cc, p, pp, bounds);
}

OptimizerResult combine(const std::vector<modeling::ThroughputModel>& models,
                        const std::vector<ModelOutcome>& outcomes,
                        const ParamBounds& bounds) {
  if (outcomes.empty()) throw std::invalid_argument("nothing to combine");
  double w_total = 0;
  for (const auto& oc : outcomes) w_total += static_cast<double>(oc.weight);
  if (!(w_total > 0)) throw std::invalid_argument("total weight must be positive");

  double cc_avg = 0, p_avg = 0, pp_avg = 0, t_est = 0;
  for (const auto& oc : outcomes) {
    const double w = static_cast<double>(oc.weight) / w_total;
    cc_avg += w * oc.relaxed.cc;
    p_avg += w * oc.relaxed.p;
    pp_avg += w * oc.relaxed.pp;
    t_est += w * oc.tmax_bps;
  }

  auto round_half_up = [](double x, int hi) {
    return std::clamp(static_cast<int>(std::floor(x + 0.5)), 1, hi);
  };
  OptimizerResult result;
  result.params = ParamTriple(round_half_up(cc_avg, bounds.cc_max),
                              round_half_up(p_avg, bounds.p_max),
                              round_half_up(pp_avg, bounds.pp_max), bounds);
  result.estimated_throughput_bps = t_est;

  double ut = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const double w = static_cast<double>(outcomes[i].weight) / w_total;
    ut += w * models[i].evaluate(1.0, result.params.p, result.params.pp);
  }
  result.unit_throughput_bps = ut;
  result.per_model = outcomes;
  return result;
}

OptimizerResult run(const OptimizerRequest& request) {
  if (request.models.empty())
    throw std::invalid_argument("optimizer requires at least one model");
  if (!(request.probe_throughput_bps > 0))
    throw std::invalid_argument("probe throughput must be positive");

  std::vector<modeling::ThroughputModel> models = request.models;
  const auto eps = residuals(models, request.probe_params,
                             request.probe_throughput_bps);
  for (std::size_t i = 0; i < models.size(); ++i) models[i].epsilon_bps = eps[i];
  assign_weights(models, request.probe_throughput_bps,
                 request.dbscan_eps_fraction);

  std::vector<ModelOutcome> outcomes;
  outcomes.reserve(models.size());
  for (const auto& m : models) {
    const MaximizeResult mx = maximize(m, request.bounds, request.probe_params);
    ModelOutcome oc;
    oc.group_id = m.group_id;
    oc.epsilon_bps = m.epsilon_bps;
    oc.weight = m.weight;
    oc.tmax_bps = mx.tmax_bps;
    oc.optimum = mx.params;
    oc.relaxed = relax(m, mx, request.relaxation, request.bounds);
    outcomes.push_back(std::move(oc));
  }
  return combine(models, outcomes, request.bounds);
}

}  // namespace xfertune::optimizer
