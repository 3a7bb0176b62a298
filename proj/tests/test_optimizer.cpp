#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "xfertune/optimizer.hpp"

using namespace xfertune;
using namespace xfertune::optimizer;
using modeling::ThroughputModel;

namespace {

ThroughputModel model_from(int degree,
                           const std::map<std::array<int, 3>, double>& coefs) {
  ThroughputModel m;
  m.degree = degree;
  const auto basis = modeling::monomial_basis(degree);
  m.coefficients.assign(basis.size(), 0.0);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const auto it = coefs.find({basis[i].cc, basis[i].p, basis[i].pp});
    if (it != coefs.end()) m.coefficients[i] = it->second;
  }
  return m;
}

// 100 - (cc-10)^2 - (p-5)^2 - (pp-2)^2, expanded
ThroughputModel concave_bowl() {
  return model_from(2, {{{0, 0, 0}, 100.0 - 100.0 - 25.0 - 4.0},
                        {{1, 0, 0}, 20.0},
                        {{2, 0, 0}, -1.0},
                        {{0, 1, 0}, 10.0},
                        {{0, 2, 0}, -1.0},
                        {{0, 0, 1}, 4.0},
                        {{0, 0, 2}, -1.0}});
}

ThroughputModel random_model(std::mt19937_64& gen, int max_degree = 3) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  ThroughputModel m;
  m.degree = 1 + static_cast<int>(gen() % max_degree);
  const auto basis = modeling::monomial_basis(m.degree);
  m.coefficients.resize(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const int d = basis[i].cc + basis[i].p + basis[i].pp;
    m.coefficients[i] = coef(gen) * 1e9 / std::pow(32.0, d);
  }
  m.coefficients[0] = std::abs(m.coefficients[0]) + 2e9;
  return m;
}

// independent DBSCAN oracle: union-find over all pairs within eps
std::vector<int> dbscan_1d_reference(const std::vector<double>& xs, double eps) {
  std::vector<std::size_t> parent(xs.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t a) {
    return parent[a] == a ? a : parent[a] = find(parent[a]);
  };
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j)
      if (std::abs(xs[i] - xs[j]) <= eps) parent[find(i)] = find(j);
  std::vector<int> label(xs.size());
  std::map<std::size_t, int> ids;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto root = find(i);
    if (!ids.count(root)) ids[root] = static_cast<int>(ids.size());
    label[i] = ids[root];
  }
  return label;
}

}  // namespace

TEST_CASE("residuals are probe minus prediction, signed") {
  std::vector<ThroughputModel> models;
  models.push_back(model_from(1, {{{0, 0, 0}, 1000e6}}));  // exact
  models.push_back(model_from(1, {{{0, 0, 0}, 900e6}}));   // underestimates
  models.push_back(model_from(1, {{{0, 0, 0}, 1300e6}}));  // overestimates
  const auto eps = residuals(models, ParamTriple(4, 2, 1), 1000e6);
  CHECK(eps[0] == doctest::Approx(0.0));
  CHECK(eps[1] == doctest::Approx(100e6));
  CHECK(eps[2] == doctest::Approx(-300e6));
}

TEST_CASE("identical residuals collapse to one cluster of weight 1") {
  std::vector<ThroughputModel> models(4, model_from(1, {{{0, 0, 0}, 9e8}}));
  for (auto& m : models) m.epsilon_bps = 1e8;
  assign_weights(models, 1e9);
  for (const auto& m : models) CHECK(m.weight == 1);
}

TEST_CASE("well-separated accurate and stale clusters weigh 2 and 1") {
  std::vector<ThroughputModel> models(4, model_from(1, {}));
  models[0].epsilon_bps = 1e6;
  models[1].epsilon_bps = -2e6;
  models[2].epsilon_bps = 9.5e8;
  models[3].epsilon_bps = -9.8e8;
  assign_weights(models, 1e9);
  CHECK(models[0].weight == 2);
  CHECK(models[1].weight == 2);
  CHECK(models[2].weight == 1);
  CHECK(models[3].weight == 1);
}

TEST_CASE("five synthetic clusters get weights 16,8,4,2,1 per the reference") {
  // |eps| clusters near 0, 0.3, 0.6, 1.2, 2.4 of T_act = 1e9, eps = 1e8
  const std::vector<double> centers = {0.0, 3e8, 6e8, 1.2e9, 2.4e9};
  std::vector<ThroughputModel> models;
  std::vector<double> abs_eps;
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> spread(-3e7, 3e7);
  for (double c : centers)
    for (int k = 0; k < 3; ++k) {
      ThroughputModel m = model_from(1, {});
      m.epsilon_bps = (gen() % 2 ? 1 : -1) * (c + std::abs(spread(gen)));
      abs_eps.push_back(std::abs(m.epsilon_bps));
      models.push_back(m);
    }
  assign_weights(models, 1e9);

  const auto labels = dbscan_1d_reference(abs_eps, 0.10 * 1e9);
  // same clustering: equal labels iff equal weights
  for (std::size_t i = 0; i < models.size(); ++i)
    for (std::size_t j = 0; j < models.size(); ++j)
      CHECK((labels[i] == labels[j]) == (models[i].weight == models[j].weight));
  // geometric weights, most accurate highest
  std::set<std::int64_t> weights;
  for (const auto& m : models) weights.insert(m.weight);
  CHECK(weights == std::set<std::int64_t>{1, 2, 4, 8, 16});
  for (std::size_t i = 0; i < models.size(); ++i)
    for (std::size_t j = 0; j < models.size(); ++j)
      if (abs_eps[i] < abs_eps[j]) CHECK(models[i].weight >= models[j].weight);
}

TEST_CASE("weight ordering property on random residuals") {
  std::mt19937_64 gen(123);
  std::uniform_real_distribution<double> eps_dist(-3e9, 3e9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ThroughputModel> models(6, model_from(1, {}));
    for (auto& m : models) m.epsilon_bps = eps_dist(gen);
    const double t_act = 1e9;
    assign_weights(models, t_act);
    for (const auto& a : models)
      for (const auto& b : models) {
        if (std::abs(a.epsilon_bps) < std::abs(b.epsilon_bps) - 0.10 * t_act)
          CHECK(a.weight >= b.weight);
      }
  }
}

TEST_CASE("maximize finds the interior optimum of a separable bowl") {
  const auto m = concave_bowl();
  const auto r = maximize(m, {}, ParamTriple(1, 1, 1));
  CHECK(r.params == ParamTriple(10, 5, 2));
  CHECK(r.tmax_bps == doctest::Approx(100.0));
}

TEST_CASE("maximize pushes a linear model to the upper corner") {
  const auto m = model_from(
      1, {{{1, 0, 0}, 3.0}, {{0, 1, 0}, 2.0}, {{0, 0, 1}, 1.0}});
  const auto r = maximize(m, {}, ParamTriple(1, 1, 1));
  CHECK(r.params == ParamTriple(32, 32, 32));
  CHECK(r.tmax_bps == doctest::Approx(m.evaluate(32, 32, 32)));
}

TEST_CASE("maximize stays within 2% of the exhaustive grid maximum") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_model(gen, 3);
    const auto r = maximize(m, {}, ParamTriple(8, 8, 8));
    double grid = -1e300;
    for (int cc = 1; cc <= 32; ++cc)
      for (int p = 1; p <= 32; ++p)
        for (int pp = 1; pp <= 32; ++pp)
          grid = std::max(grid, m.evaluate(cc, p, pp));
    CHECK(r.tmax_bps >= grid - 0.02 * std::abs(grid));
    CHECK(r.tmax_bps <= grid + 1e-6 * std::abs(grid));
    CHECK(r.params.cc >= 1);
    CHECK(r.params.cc <= 32);
    CHECK(r.params.p >= 1);
    CHECK(r.params.p <= 32);
    CHECK(r.params.pp >= 1);
    CHECK(r.params.pp <= 32);
    CHECK(r.tmax_bps >= m.evaluate(8, 8, 8) - 1e-9);
  }
}

TEST_CASE("relax: a flat model relaxes every parameter to 1") {
  const auto m = model_from(1, {{{0, 0, 0}, 5e9}});
  const MaximizeResult opt{5e9, ParamTriple(32, 32, 32)};
  const auto relaxed = relax(m, opt, {}, {});
  CHECK(relaxed == ParamTriple(1, 1, 1));
}

TEST_CASE("relax walks exactly to the last value above the ratio") {
  // f = a - k (cc-20)^2 with f(17) = 0.71 a and f(16) < 0.7 a
  const double a = 1e9;
  const double k = a * 0.29 / 9.0;
  const auto m = model_from(2, {{{0, 0, 0}, a - 400.0 * k},
                                {{1, 0, 0}, 40.0 * k},
                                {{2, 0, 0}, -k}});
  const auto opt = maximize(m, {}, ParamTriple(20, 1, 1));
  CHECK(opt.params.cc == 20);
  CHECK(m.evaluate(17, opt.params.p, opt.params.pp) ==
        doctest::Approx(0.71 * opt.tmax_bps));
  const auto relaxed = relax(m, opt, {}, {});
  CHECK(relaxed.cc == 17);
}

TEST_CASE("relax postconditions hold for random models") {
  std::mt19937_64 gen(555);
  const Relaxation rho;
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_model(gen);
    const auto opt = maximize(m, {}, ParamTriple(8, 8, 8));
    if (!(opt.tmax_bps > 0)) continue;
    const auto relaxed = relax(m, opt, rho, {});
    CHECK(relaxed.cc <= opt.params.cc);
    CHECK(relaxed.p <= opt.params.p);
    CHECK(relaxed.pp <= opt.params.pp);
    const double tol = 1e-9 * opt.tmax_bps;
    CHECK(m.evaluate(relaxed.cc, opt.params.p, opt.params.pp) >=
          rho.cc * opt.tmax_bps - tol);
    CHECK(m.evaluate(opt.params.cc, relaxed.p, opt.params.pp) >=
          rho.p * opt.tmax_bps - tol);
    CHECK(m.evaluate(opt.params.cc, opt.params.p, relaxed.pp) >=
          rho.pp * opt.tmax_bps - tol);
  }
}

TEST_CASE("combine: single model passes through; weighted average rounds half up") {
  std::vector<ThroughputModel> models(1, model_from(1, {{{0, 0, 0}, 7e8}}));
  std::vector<ModelOutcome> outcomes(1);
  outcomes[0].weight = 1;
  outcomes[0].tmax_bps = 7e8;
  outcomes[0].relaxed = ParamTriple(9, 3, 5);
  const auto single = combine(models, outcomes, {});
  CHECK(single.params == ParamTriple(9, 3, 5));
  CHECK(single.estimated_throughput_bps == doctest::Approx(7e8));

  models.assign(2, model_from(1, {{{0, 0, 0}, 1e9}}));
  outcomes.assign(2, {});
  outcomes[0].weight = 3;
  outcomes[0].relaxed = ParamTriple(10, 4, 4);
  outcomes[0].tmax_bps = 2e9;
  outcomes[1].weight = 1;
  outcomes[1].relaxed = ParamTriple(20, 4, 4);
  outcomes[1].tmax_bps = 1e9;
  const auto two = combine(models, outcomes, {});
  // 12.5 rounds half-up to 13
  CHECK(two.params.cc == 13);
  CHECK(two.params.p == 4);
  CHECK(two.estimated_throughput_bps == doctest::Approx(1.75e9));
}

TEST_CASE("combine stays in the per-coordinate hull of relaxed values") {
  std::mt19937_64 gen(31337);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + gen() % 5;
    std::vector<ThroughputModel> models(n, model_from(1, {{{0, 0, 0}, 1e9}}));
    std::vector<ModelOutcome> outcomes(n);
    int lo_cc = 33, hi_cc = 0;
    for (auto& oc : outcomes) {
      oc.weight = 1 + static_cast<std::int64_t>(gen() % 16);
      oc.relaxed = ParamTriple(1 + static_cast<int>(gen() % 32),
                               1 + static_cast<int>(gen() % 32),
                               1 + static_cast<int>(gen() % 32));
      oc.tmax_bps = 1e9;
      lo_cc = std::min(lo_cc, oc.relaxed.cc);
      hi_cc = std::max(hi_cc, oc.relaxed.cc);
    }
    const auto r = combine(models, outcomes, {});
    CHECK(r.params.cc >= lo_cc - 0.5);
    CHECK(r.params.cc <= hi_cc + 0.5);
  }
}

TEST_CASE("combine weighted by 4:1 lands within one of the expectation") {
  // matching cluster prefers cc=24, stale prefers cc=8
  std::vector<ThroughputModel> models(2, model_from(1, {{{0, 0, 0}, 1e9}}));
  std::vector<ModelOutcome> outcomes(2);
  outcomes[0].weight = 4;
  outcomes[0].relaxed = ParamTriple(24, 2, 2);
  outcomes[0].tmax_bps = 5e9;
  outcomes[1].weight = 1;
  outcomes[1].relaxed = ParamTriple(8, 2, 2);
  outcomes[1].tmax_bps = 4e9;
  const auto r = combine(models, outcomes, {});
  CHECK(std::abs(r.params.cc - 21) <= 1);
}

TEST_CASE("run wires residuals, weights, maximize, relax, and combine") {
  // two quadratics with distinct optima; probe matches the first
  const auto bowl_a = concave_bowl();  // optimum (10,5,2), Tmax 100
  auto bowl_b = concave_bowl();
  // shift: optimum at (30, 5, 2)
  const auto basis = modeling::monomial_basis(2);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (basis[i].cc == 1 && basis[i].p == 0 && basis[i].pp == 0)
      bowl_b.coefficients[i] = 60.0;
    if (basis[i].cc == 0 && basis[i].p == 0 && basis[i].pp == 0)
      bowl_b.coefficients[i] = 100.0 - 900.0 - 25.0 - 4.0;
  }
  OptimizerRequest request;
  request.probe_params = ParamTriple(10, 5, 2);
  request.probe_throughput_bps = 100.0;  // bowl_a predicts this exactly
  request.models = {bowl_a, bowl_b};
  const auto result = run(request);
  REQUIRE(result.per_model.size() == 2);
  CHECK(result.per_model[0].weight > result.per_model[1].weight);
  CHECK(result.per_model[0].epsilon_bps == doctest::Approx(0.0));
  CHECK(result.params.cc >= 1);
  CHECK(result.unit_throughput_bps != 0.0);

  OptimizerRequest empty;
  empty.probe_throughput_bps = 1.0;
  CHECK_THROWS_AS(run(empty), std::invalid_argument);
}
