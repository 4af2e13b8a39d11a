#include "dropnet/blowup.hpp"

#include <cmath>

#include "dropnet/error.hpp"

namespace dropnet {

BlowupNetwork::BlowupNetwork(Network base, CoefficientTable table, SubsetModels models,
                             std::uint64_t copies)
    : base_(std::move(base)), table_(std::move(table)), models_(std::move(models)), copies_(copies) {
  require(copies_ >= 1, ErrorCode::invalid_argument, "blow-up needs at least one copy");
  require(models_.block_count() == table_.block_count(), ErrorCode::invalid_argument,
          "table and models disagree on block count");
  require(models_.any().blocks() == table_.blocks(), ErrorCode::invalid_argument,
          "table and models disagree on the block partition");
  require(models_.any().size() == base_.param_count(), ErrorCode::shape_mismatch,
          "model length != network parameter count");
  const std::uint32_t nsub = table_.subset_count();
  masked_.reserve(nsub);
  for (std::uint32_t t = 0; t < nsub; ++t)
    masked_.push_back(base_.apply_mask(models_.any().lift_subset(t)));
  for (std::uint32_t u = 0; u < nsub; ++u)
    if (table_.at(u) != 0.0) active_.push_back(u);
}

std::vector<double> BlowupNetwork::pattern_weights(const rng::Source& rng,
                                                   std::uint64_t draw) const {
  // weight[T] collects (1/M) sum over (i, U) of a_U for realizations with
  // on-set intersection U cap S = T. Subsets with a_U = 0 contribute nothing
  // and are skipped.
  const rng::Source call = rng.sub(draw);
  std::vector<double> weight(table_.subset_count(), 0.0);
  const double inv_m = 1.0 / static_cast<double>(copies_);
  for (std::uint64_t i = 0; i < copies_; ++i) {
    for (std::uint32_t u : active_) {
      const std::uint64_t pair_draw = i * table_.subset_count() + u;
      const std::uint32_t pattern = models_.at(u).sample_pattern(call, pair_draw);
      weight[pattern & u] += table_.at(u) * inv_m;
    }
  }
  return weight;
}

Eigen::VectorXd BlowupNetwork::sample_eval(const Eigen::VectorXd& x, const rng::Source& rng,
                                           std::uint64_t draw) const {
  const std::vector<double> weight = pattern_weights(rng, draw);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(base_.output_dim());
  for (std::uint32_t t = 0; t < weight.size(); ++t)
    if (weight[t] != 0.0) acc += weight[t] * masked_[t].eval(x);
  return acc;
}

Eigen::MatrixXd BlowupNetwork::sample_eval_grid(const std::vector<Eigen::VectorXd>& grid,
                                                const rng::Source& rng, std::uint64_t draw) const {
  const std::vector<double> weight = pattern_weights(rng, draw);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()),
                                              base_.output_dim());
  for (std::uint32_t t = 0; t < weight.size(); ++t) {
    if (weight[t] == 0.0) continue;
    for (std::size_t g = 0; g < grid.size(); ++g)
      out.row(static_cast<Eigen::Index>(g)) += weight[t] * masked_[t].eval(grid[g]).transpose();
  }
  return out;
}

Eigen::VectorXd BlowupNetwork::mean_eval(const Eigen::VectorXd& x) const {
  require(models_.any().enumerable(), ErrorCode::unsupported_model,
          "mean_eval needs an enumerable model");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(base_.output_dim());
  for (std::uint32_t u : active_) {
    const double a_u = table_.at(u);
    for (const auto& [pattern, prob] : models_.at(u).support())
      acc += a_u * prob * masked_[pattern & u].eval(x);
  }
  return acc;
}

Eigen::VectorXd BlowupNetwork::avg_filter_eval(const Eigen::VectorXd& x) const {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(base_.output_dim());
  for (std::uint32_t u : active_) {
    const Eigen::VectorXd mask =
        models_.at(u).lift_subset(u).cwiseProduct(models_.at(u).expectation());
    acc += table_.at(u) * base_.eval_masked(mask, x);
  }
  return acc;
}

CertifiedBlowup certify_blowup(const TargetFunction& target, double eps,
                                  const std::function<FilterModel(const Network&)>& model_for,
                                  const CertifyConfig& config, rng::Source rng) {
  require(eps > 0.0 && eps < 1.0, ErrorCode::invalid_argument, "eps must lie in (0,1)");
  FitResult fit = fit_base_network(target, config.fit, rng.sub(0x666974ULL));
  if (fit.sup_error >= eps / 2.0)
    throw_budget("base-fit-failed: sup error " + std::to_string(fit.sup_error) +
                 " did not reach eps/2");

  FilterModel model = model_for(fit.net);
  require(model.independent_bernoulli(), ErrorCode::unsupported_model,
          "certify_blowup expects an independent block model");
  Eigen::VectorXd drop = Eigen::VectorXd::Ones(model.block_count()) - model.block_keep();
  CoefficientTable table = coeffs_closed_form(drop, model.blocks());

  const std::vector<Eigen::VectorXd> grid = uniform_grid(target.domain, config.grid_points);
  Eigen::VectorXd target_values(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t g = 0; g < grid.size(); ++g) target_values[static_cast<Eigen::Index>(g)] = target.f(grid[g]);

  const rng::Source mc = rng.sub(0x6d63ULL);
  std::vector<std::uint64_t> tried;
  std::uint64_t m = std::max<std::uint64_t>(1, config.initial_copies);
  while (true) {
    tried.push_back(m);
    BlowupNetwork bn(fit.net, table, SubsetModels(model), m);
    auto sampler = [&](const rng::Source& src, std::uint64_t draw) {
      const Eigen::MatrixXd values = bn.sample_eval_grid(grid, src, draw);
      return (values.col(0) - target_values).cwiseAbs().maxCoeff();
    };
    const ExceedanceEstimate exc =
        exceed_prob(sampler, eps, config.runs, config.confidence, mc.sub(m), config.jobs);
    const double lq = lq_moment(sampler, config.q, config.runs, mc.sub(m), config.jobs);
    if (exc.ci.hi < eps && lq < eps) {
      ErrorReport report;
      report.sup_estimate = fit.sup_error;
      report.lq_estimates[config.q] = lq;
      report.exceedance = exc;
      report.sample_count = config.runs;
      report.seed = rng.seed;
      report.grid_spec = std::to_string(config.grid_points) + " uniform points per axis";
      return CertifiedBlowup{std::move(bn), std::move(fit), std::move(report), std::move(tried)};
    }
    if (m >= config.copies_cap)
      throw_budget("budget-exceeded: M cap reached without certifying eps");
    m *= 2;
  }
}

}  // namespace dropnet
