#include "dropnet/estimators.hpp"

#include <cmath>

#include "dropnet/error.hpp"
#include "dropnet/parallel.hpp"

namespace dropnet {

std::vector<Eigen::VectorXd> uniform_grid(const Box& box, int points_per_axis) {
  require(box.lo.size() == box.hi.size() && box.dim() >= 1, ErrorCode::invalid_argument,
          "box lo/hi must have equal positive dimension");
  require(points_per_axis >= 1, ErrorCode::invalid_argument, "grid needs at least one point per axis");
  const int d = box.dim();
  std::vector<Eigen::VectorXd> axes(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    Eigen::VectorXd pts(points_per_axis);
    for (int i = 0; i < points_per_axis; ++i) {
      const double t = points_per_axis == 1 ? 0.5 : static_cast<double>(i) / (points_per_axis - 1);
      pts[i] = box.lo[a] + t * (box.hi[a] - box.lo[a]);
    }
    axes[static_cast<std::size_t>(a)] = pts;
  }
  std::vector<Eigen::VectorXd> grid;
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    Eigen::VectorXd p(d);
    for (int a = 0; a < d; ++a) p[a] = axes[static_cast<std::size_t>(a)][idx[static_cast<std::size_t>(a)]];
    grid.push_back(std::move(p));
    int a = d - 1;
    while (a >= 0) {
      if (++idx[static_cast<std::size_t>(a)] < points_per_axis) break;
      idx[static_cast<std::size_t>(a)] = 0;
      --a;
    }
    if (a < 0) break;
  }
  return grid;
}

Seminorm Seminorm::sup(std::vector<Eigen::VectorXd> grid) {
  require(!grid.empty(), ErrorCode::invalid_argument, "seminorm grid must be non-empty");
  Seminorm s;
  s.kind_ = SeminormKind::sup_grid;
  s.grid_ = std::move(grid);
  return s;
}

Seminorm Seminorm::lr(std::vector<Eigen::VectorXd> grid, double r, Eigen::VectorXd weights) {
  require(!grid.empty(), ErrorCode::invalid_argument, "seminorm grid must be non-empty");
  require(r >= 1.0, ErrorCode::invalid_argument, "L^r exponent must be >= 1");
  Seminorm s;
  s.kind_ = SeminormKind::lr_grid;
  s.r_ = r;
  if (weights.size() == 0) {
    weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid.size()),
                                        1.0 / static_cast<double>(grid.size()));
  }
  require(weights.size() == static_cast<Eigen::Index>(grid.size()), ErrorCode::shape_mismatch,
          "weights length != grid size");
  double total = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    require(weights[i] >= 0.0, ErrorCode::invalid_argument, "quadrature weights must be nonnegative");
    total += weights[i];
  }
  require(std::abs(total - 1.0) < 1e-9, ErrorCode::invalid_argument, "quadrature weights must sum to 1");
  s.grid_ = std::move(grid);
  s.weights_ = std::move(weights);
  return s;
}

double Seminorm::apply(const Eigen::VectorXd& f_values, const Eigen::VectorXd& g_values) const {
  require(f_values.size() == g_values.size(), ErrorCode::shape_mismatch, "value vectors differ in length");
  require(f_values.size() == static_cast<Eigen::Index>(grid_.size()), ErrorCode::shape_mismatch,
          "value vector length != grid size");
  if (kind_ == SeminormKind::sup_grid) {
    return (f_values - g_values).cwiseAbs().maxCoeff();
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < f_values.size(); ++i)
    acc += weights_[i] * std::pow(std::abs(f_values[i] - g_values[i]), r_);
  return std::pow(acc, 1.0 / r_);
}

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorCode::invalid_argument, "quantile argument must be in (0,1)");
  // Acklam's approximation, |relative error| < 1.15e-9.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1 - plow;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p <= phigh) {
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  }
  q = std::sqrt(-2 * std::log(1 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
}

WilsonInterval wilson_interval(std::int64_t successes, std::int64_t n, double confidence) {
  require(n > 0, ErrorCode::invalid_argument, "wilson interval needs n > 0");
  require(successes >= 0 && successes <= n, ErrorCode::invalid_argument, "successes out of range");
  const double z = normal_quantile(0.5 + confidence / 2.0);
  const double z2 = z * z;
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(successes) / nn;
  const double denom = 1.0 + z2 / nn;
  const double center = (phat + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  WilsonInterval w;
  w.lo = std::max(0.0, center - half);
  w.hi = std::min(1.0, center + half);
  return w;
}

ExceedanceEstimate exceed_prob(const SeminormSampler& sampler, double eps, std::int64_t n_samples,
                               double confidence, rng::Source rng, int jobs) {
  require(n_samples >= 30, ErrorCode::invalid_argument, "exceedance estimation needs n_samples >= 30");
  std::vector<std::uint8_t> exceeded(static_cast<std::size_t>(n_samples), 0);
  parallel_for(n_samples, jobs, [&](std::int64_t i) {
    exceeded[static_cast<std::size_t>(i)] =
        sampler(rng, static_cast<std::uint64_t>(i)) > eps ? 1 : 0;
  });
  std::int64_t count = 0;
  for (auto e : exceeded) count += e;
  ExceedanceEstimate out;
  out.exceed_count = count;
  out.samples = n_samples;
  out.estimate = static_cast<double>(count) / static_cast<double>(n_samples);
  out.ci = wilson_interval(count, n_samples, confidence);
  out.eps = eps;
  out.confidence = confidence;
  return out;
}

double lq_moment(const SeminormSampler& sampler, double q, std::int64_t n_samples, rng::Source rng,
                 int jobs) {
  require(q >= 1.0, ErrorCode::invalid_argument, "L^q moment needs q >= 1");
  require(n_samples >= 1, ErrorCode::invalid_argument, "L^q moment needs n_samples >= 1");
  std::vector<double> powered(static_cast<std::size_t>(n_samples), 0.0);
  parallel_for(n_samples, jobs, [&](std::int64_t i) {
    powered[static_cast<std::size_t>(i)] =
        std::pow(std::abs(sampler(rng, static_cast<std::uint64_t>(i))), q);
  });
  return std::pow(pairwise_sum(powered) / static_cast<double>(n_samples), 1.0 / q);
}

}  // namespace dropnet
