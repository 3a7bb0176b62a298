// Parameter estimation over fitted models: probe residuals, density
// clustering into 2^j weights, bounded maximization of each model,
// per-parameter relaxation, and the weighted-average combiner.

#pragma once

#include <cstdint>
#include <vector>

#include "xfertune/core.hpp"
#include "xfertune/modeling.hpp"

namespace xfertune::optimizer {

struct Relaxation {
  double cc = 0.7;
  double p = 0.7;
  double pp = 0.99;
};

struct OptimizerRequest {
  ParamTriple probe_params;
  double probe_throughput_bps = 0;  // achieved by the sample transfer
  std::vector<modeling::ThroughputModel> models;
  ParamBounds bounds;
  Relaxation relaxation;
  double dbscan_eps_fraction = 0.10;  // eps = fraction * probe throughput
};

struct ModelOutcome {
  std::string group_id;
  double epsilon_bps = 0;
  std::int64_t weight = 0;
  double tmax_bps = 0;
  ParamTriple optimum;
  ParamTriple relaxed;
};

struct OptimizerResult {
  ParamTriple params;
  double estimated_throughput_bps = 0;
  double unit_throughput_bps = 0;  // weighted estimate at concurrency 1
  std::vector<ModelOutcome> per_model;
};

// Signed residuals: probe throughput minus each model's prediction at
// the probe point (positive -> the model underestimates).
std::vector<double> residuals(const std::vector<modeling::ThroughputModel>& models,
                              const ParamTriple& probe_params,
                              double probe_throughput_bps);

// 1-D DBSCAN over |epsilon| (minPts 1); clusters ranked by mean |epsilon|
// descending get weights 2^0, 2^1, ..., so the most accurate cluster
// carries the largest weight. Fills .weight of every model; .epsilon_bps
// must already be set.
void assign_weights(std::vector<modeling::ThroughputModel>& models,
                    double probe_throughput_bps, double eps_fraction = 0.10);

struct MaximizeResult {
  double tmax_bps = 0;
  ParamTriple params;
};

// Multi-start quasi-Newton ascent over the parameter box (analytic
// polynomial gradients, iterates projected onto bounds), snapped to the
// best nearby integer point and refined by a local integer hill-climb.
// Falls back to an exhaustive grid scan on non-finite evaluations.
MaximizeResult maximize(const modeling::ThroughputModel& model,
                        const ParamBounds& bounds,
                        const ParamTriple& probe_start);

// Walks each parameter down from the optimum (others held at their
// optimal values) while the model keeps at least rho of the maximum.
ParamTriple relax(const modeling::ThroughputModel& model,
                  const MaximizeResult& optimum, const Relaxation& rho,
                  const ParamBounds& bounds);

// Weighted average of the per-model relaxed parameters (Eq. family of
// the combiner): rounded half-up, floored at 1, clamped to bounds.
OptimizerResult combine(const std::vector<modeling::ThroughputModel>& models,
                        const std::vector<ModelOutcome>& outcomes,
                        const ParamBounds& bounds);

OptimizerResult run(const OptimizerRequest& request);

}  // namespace xfertune::optimizer
