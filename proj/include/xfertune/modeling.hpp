// Per-group polynomial throughput models: degree escalation with a
// seeded 70/30 train/validation split and an R-squared gate on both.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xfertune/core.hpp"
#include "xfertune/similarity.hpp"

namespace xfertune::modeling {

struct Monomial {
  int cc = 0, p = 0, pp = 0;  // exponents
};

// All monomials of (cc, p, pp) with total degree <= degree, in a fixed
// deterministic order.
std::vector<Monomial> monomial_basis(int degree);

struct ThroughputModel {
  std::string group_id;
  int degree = 0;
  std::vector<double> coefficients;  // aligned with monomial_basis(degree)
  double r2_train = 0;
  double r2_validation = 0;
  double epsilon_bps = 0;  // probe residual, set by the optimizer
  std::int64_t weight = 0;  // cluster weight 2^j, set by the optimizer

  double evaluate(double cc, double p, double pp) const;
  double evaluate(const ParamTriple& t) const {
    return evaluate(t.cc, t.p, t.pp);
  }
  std::array<double, 3> gradient(double cc, double p, double pp) const;
};

std::string to_record(const ThroughputModel& m);
ThroughputModel model_from_record(const std::string& line);

struct FitOptions {
  double r2_threshold = 0.7;
  int min_degree = 1;
  int max_degree = 4;
  int min_group = similarity::kMinGroupSize;
  double validation_fraction = 0.3;
};

// First degree in 1..max_degree whose train and validation R-squared
// both clear the threshold wins; otherwise the group is rejected as an
// outlier (nullopt). Split is seeded and stratified by concurrency.
std::optional<ThroughputModel> fit_group(const similarity::EntryGroup& group,
                                         std::uint64_t split_seed,
                                         const FitOptions& options = {});

}  // namespace xfertune::modeling
