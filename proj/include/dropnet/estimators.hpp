#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dropnet/rng.hpp"

namespace dropnet {

struct Box {
  Eigen::VectorXd lo, hi;
  int dim() const { return static_cast<int>(lo.size()); }
};

// Uniform grid over a box, endpoints included, points_per_axis per axis
// (cartesian product for dim > 1).
std::vector<Eigen::VectorXd> uniform_grid(const Box& box, int points_per_axis);

struct TargetFunction {
  std::function<double(const Eigen::VectorXd&)> f;
  Box domain;
};

enum class SeminormKind { sup_grid, lr_grid };

// Grid-based seminorm: sup |f-g| over the grid, or a quadrature L^r(mu) norm
// with nonnegative weights summing to one.
class Seminorm {
 public:
  static Seminorm sup(std::vector<Eigen::VectorXd> grid);
  static Seminorm lr(std::vector<Eigen::VectorXd> grid, double r, Eigen::VectorXd weights = {});

  SeminormKind kind() const { return kind_; }
  double exponent() const { return r_; }
  const std::vector<Eigen::VectorXd>& grid() const { return grid_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  double apply(const Eigen::VectorXd& f_values, const Eigen::VectorXd& g_values) const;

 private:
  Seminorm() = default;
  SeminormKind kind_ = SeminormKind::sup_grid;
  double r_ = 1.0;
  std::vector<Eigen::VectorXd> grid_;
  Eigen::VectorXd weights_;
};

struct WilsonInterval {
  double lo = 0.0, hi = 1.0;
};

// Two-sided Wilson score interval at the given confidence level.
WilsonInterval wilson_interval(std::int64_t successes, std::int64_t n, double confidence = 0.95);

// Inverse standard-normal CDF (Acklam's rational approximation).
double normal_quantile(double p);

struct ExceedanceEstimate {
  double estimate = 0.0;
  WilsonInterval ci;
  std::int64_t exceed_count = 0;
  std::int64_t samples = 0;
  double eps = 0.0;
  double confidence = 0.95;
};

using SeminormSampler = std::function<double(const rng::Source&, std::uint64_t draw)>;

// Empirical frequency of {sampler value > eps} with a Wilson interval.
// Deterministic given (rng, n_samples).
ExceedanceEstimate exceed_prob(const SeminormSampler& sampler, double eps, std::int64_t n_samples,
                               double confidence, rng::Source rng, int jobs = 1);

// (mean of value^q)^(1/q); pairwise summation keeps the reduction
// order-independent.
double lq_moment(const SeminormSampler& sampler, double q, std::int64_t n_samples,
                 rng::Source rng, int jobs = 1);

struct ErrorReport {
  double sup_estimate = std::numeric_limits<double>::quiet_NaN();
  std::map<double, double> lq_estimates;  // q -> estimate
  std::optional<ExceedanceEstimate> exceedance;
  std::int64_t sample_count = 0;
  std::uint64_t seed = 0;
  std::string grid_spec;  // human-readable grid description, recorded verbatim
};

}  // namespace dropnet
