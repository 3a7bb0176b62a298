#include "xfertune/modeling.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace xfertune::modeling {

namespace {

double ipow(double x, int e) {
  double r = 1;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Stratified by concurrency so both subsets span the parameter range.
Split split_group(const std::vector<HistoryEntry>& members,
                  std::uint64_t split_seed, double validation_fraction) {
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < members.size(); ++i)
    strata[members[i].params.cc].push_back(i);

  Split split;
  for (auto& [cc, idx] : strata) {
    std::mt19937_64 gen(split_seed ^ (0x9e3779b97f4a7c15ULL * (cc + 1)));
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[gen() % i]);
    const auto val_count = static_cast<std::size_t>(
        std::floor(validation_fraction * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      (i < val_count ? split.validation : split.train).push_back(idx[i]);
    }
  }
  if (split.validation.empty() && split.train.size() > 1) {
    split.validation.push_back(split.train.back());
    split.train.pop_back();
  }
  return split;
}

double r_squared(const std::vector<double>& actual,
                 const std::vector<double>& predicted) {
  double mean = 0;
  for (double y : actual) mean += y;
  mean /= static_cast<double>(actual.size());
  double ss_tot = 0, ss_res = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ss_tot += (actual[i] - mean) * (actual[i] - mean);
    ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
  }
  // Zero-variance targets: R^2 = 1 iff the residuals are zero too.
  const double tiny = 1e-9 * std::max(1.0, mean * mean) *
                      static_cast<double>(actual.size());
  if (ss_tot <= tiny) return ss_res <= tiny ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

}  // namespace

std::vector<Monomial> monomial_basis(int degree) {
  std::vector<Monomial> basis;
  for (int d = 0; d <= degree; ++d)
    for (int i = d; i >= 0; --i)
      for (int j = d - i; j >= 0; --j)
        basis.push_back({i, j, d - i - j});
  return basis;
}

double ThroughputModel::evaluate(double cc, double p, double pp) const {
  const auto basis = monomial_basis(degree);
  double sum = 0;
  for (std::size_t m = 0; m < basis.size(); ++m)
    sum += coefficients[m] * ipow(cc, basis[m].cc) * ipow(p, basis[m].p) *
           ipow(pp, basis[m].pp);
  return sum;
}

std::array<double, 3> ThroughputModel::gradient(double cc, double p,
                                                double pp) const {
  const auto basis = monomial_basis(degree);
  std::array<double, 3> g{0, 0, 0};
  for (std::size_t m = 0; m < basis.size(); ++m) {
    const auto& b = basis[m];
    const double c = coefficients[m];
    if (b.cc > 0)
      g[0] += c * b.cc * ipow(cc, b.cc - 1) * ipow(p, b.p) * ipow(pp, b.pp);
    if (b.p > 0)
      g[1] += c * b.p * ipow(cc, b.cc) * ipow(p, b.p - 1) * ipow(pp, b.pp);
    if (b.pp > 0)
      g[2] += c * b.pp * ipow(cc, b.cc) * ipow(p, b.p) * ipow(pp, b.pp - 1);
  }
  return g;
}

std::string to_record(const ThroughputModel& m) {
  std::ostringstream os;
  char buf[64];
  os << "group_id=" << m.group_id << " degree=" << m.degree;
  std::snprintf(buf, sizeof buf, "%.17g", m.r2_train);
  os << " r2_train=" << buf;
  std::snprintf(buf, sizeof buf, "%.17g", m.r2_validation);
  os << " r2_validation=" << buf;
  std::snprintf(buf, sizeof buf, "%.17g", m.epsilon_bps);
  os << " epsilon_bps=" << buf;
  os << " weight=" << m.weight << " coefficients=";
  for (std::size_t i = 0; i < m.coefficients.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", m.coefficients[i]);
    os << (i ? "," : "") << buf;
  }
  return os.str();
}

ThroughputModel model_from_record(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::istringstream is(line);
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("bad model record token: " + token);
    kv[token.substr(0, eq)] = token.substr(eq + 1);
  }
  auto need = [&](const char* field) -> const std::string& {
    auto it = kv.find(field);
    if (it == kv.end())
      throw std::invalid_argument(std::string("model record missing ") + field);
    return it->second;
  };
  ThroughputModel m;
  m.group_id = need("group_id");
  m.degree = std::stoi(need("degree"));
  m.r2_train = std::stod(need("r2_train"));
  m.r2_validation = std::stod(need("r2_validation"));
  m.epsilon_bps = std::stod(need("epsilon_bps"));
  m.weight = std::stoll(need("weight"));
  std::istringstream cs(need("coefficients"));
  std::string c;
  while (std::getline(cs, c, ',')) m.coefficients.push_back(std::stod(c));
  if (m.coefficients.size() != monomial_basis(m.degree).size())
    throw std::invalid_argument("model record coefficient count mismatch");
  return m;
}

std::optional<ThroughputModel> fit_group(const similarity::EntryGroup& group,
                                         std::uint64_t split_seed,
                                         const FitOptions& options) {
  const auto& members = group.members;
  if (members.size() < static_cast<std::size_t>(options.min_group))
    throw std::invalid_argument("group below minimum size: " + group.session_id);

  const Split split = split_group(members, split_seed, options.validation_fraction);

  for (int degree = options.min_degree; degree <= options.max_degree; ++degree) {
    const auto basis = monomial_basis(degree);
    const auto n_coef = static_cast<Eigen::Index>(basis.size());
    const auto n_train = static_cast<Eigen::Index>(split.train.size());

    Eigen::MatrixXd design(n_train, n_coef);
    Eigen::VectorXd target(n_train);
    for (Eigen::Index r = 0; r < n_train; ++r) {
      const auto& e = members[split.train[static_cast<std::size_t>(r)]];
      for (Eigen::Index m = 0; m < n_coef; ++m) {
        const auto& b = basis[static_cast<std::size_t>(m)];
        design(r, m) = ipow(e.params.cc, b.cc) * ipow(e.params.p, b.p) *
                       ipow(e.params.pp, b.pp);
      }
      target(r) = e.throughput_bps;
    }

    // Column scaling keeps the power grid's normal equations tame.
    Eigen::VectorXd scale(n_coef);
    for (Eigen::Index m = 0; m < n_coef; ++m) {
      const double norm = design.col(m).norm();
      scale(m) = norm > 0 ? norm : 1.0;
    }
    const Eigen::MatrixXd scaled = design * scale.cwiseInverse().asDiagonal();
    Eigen::MatrixXd normal = scaled.transpose() * scaled;
    normal.diagonal().array() += 1e-9;  // ridge jitter for near-singular sweeps
    const Eigen::VectorXd rhs = scaled.transpose() * target;
    const Eigen::VectorXd solved = normal.ldlt().solve(rhs);
    const Eigen::VectorXd coef = solved.cwiseQuotient(scale);
    if (!coef.allFinite()) continue;  // degree infeasible

    ThroughputModel model;
    model.group_id = group.session_id;
    model.degree = degree;
    model.coefficients.assign(coef.data(), coef.data() + coef.size());

    auto predict = [&](const std::vector<std::size_t>& idx) {
      std::vector<double> actual, predicted;
      actual.reserve(idx.size());
      predicted.reserve(idx.size());
      for (std::size_t i : idx) {
        actual.push_back(members[i].throughput_bps);
        predicted.push_back(model.evaluate(members[i].params));
      }
      return r_squared(actual, predicted);
    };
    model.r2_train = predict(split.train);
    model.r2_validation = predict(split.validation);
    if (model.r2_train > options.r2_threshold &&
        model.r2_validation > options.r2_threshold) {
      return model;
    }
  }
  return std::nullopt;  // outlier group
}

}  // namespace xfertune::modeling
