#include "dropnet/pipeline.hpp"

#include <cmath>
#include <memory>
#include <thread>

#include "dropnet/error.hpp"
#include "dropnet/parallel.hpp"

namespace dropnet {

namespace {

// Sup over the grid of |NN(x) - Psi(x)| for one filter realization. An
// evaluator is reused so tree filters are sampled once per draw.
double sup_error_for_draw(const DropoutTree& tree, const Precomposition& pre,
                          const std::vector<Eigen::VectorXd>& grid,
                          const Eigen::VectorXd& base_values, EvalMode mode, const rng::Source& rng,
                          std::uint64_t draw, TreeEvaluator& ev, RadiiRecorder* recorder) {
  double worst = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const Eigen::VectorXd out = nn_eval(tree, pre, grid[g], mode, rng, draw, &ev, recorder);
    worst = std::max(worst, std::abs(out[0] - base_values[static_cast<Eigen::Index>(g)]));
  }
  return worst;
}

}  // namespace

TreePipelineResult run_tree_pipeline(const Network& base, const TreePipelineConfig& config,
                                     rng::Source rng) {
  require(base.depth() >= 2, ErrorCode::invalid_argument, "tree pipeline needs L >= 2");
  require(base.output_dim() == 1, ErrorCode::invalid_argument, "tree pipeline targets scalar outputs");
  require(config.eps > 0.0 && config.eps < 1.0, ErrorCode::invalid_argument, "eps must lie in (0,1)");
  require(config.q >= 1.0, ErrorCode::invalid_argument, "q must be >= 1");
  require(q_condition_ok(config.sigma0, config.Q), ErrorCode::invalid_argument,
          "sigma0 violates the Q admissibility inequality");

  // beta floor: the least keep probability across all filters, kept strictly
  // inside (0,1) so unit-mass filters stay admissible.
  const double beta =
      std::min({config.keep_prob, config.input_keep, config.pre_keep, 1.0 - 1e-6});
  require(beta > 0.0, ErrorCode::invalid_argument, "filter keep probabilities must be positive");
  const RadiiTable radii = compute_radii(base, config.R, config.Q, beta);

  GrowthLog growth;
  GrowthPolicy policy;
  policy.initial_copy_size = config.growth_initial_copy;
  policy.copy_size_cap = config.growth_copy_cap;
  policy.delta0 = config.delta0;
  policy.keep_prob = config.keep_prob;
  policy.approp = config.approp;
  policy.approp.confidence = config.confidence;
  policy.approp.jobs = config.jobs;
  DropoutTree tree =
      grow_full_tree(base, radii, config.eps, config.q, policy, rng.sub(0x74726565ULL), &growth);

  // Evaluation grid and base values for the guarantees.
  const int d0 = base.input_dim();
  const double half = d0 == 1 ? config.R : config.R / std::sqrt(static_cast<double>(d0));
  const Box box{Eigen::VectorXd::Constant(d0, -half), Eigen::VectorXd::Constant(d0, half)};
  const int per_axis = d0 == 1 ? config.verify_grid_points
                               : std::max(2, static_cast<int>(std::round(std::pow(
                                                 config.verify_grid_points, 1.0 / d0))));
  const std::vector<Eigen::VectorXd> grid = uniform_grid(box, per_axis);
  Eigen::VectorXd base_values(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t g = 0; g < grid.size(); ++g)
    base_values[static_cast<Eigen::Index>(g)] = base.eval(grid[g])[0];

  const Layer& l1 = base.layer(1);
  const FilterModel mu = matrix_bernoulli(l1.rows(), l1.cols(), config.pre_keep);
  const FilterModel nu = diagonal_bernoulli(l1.cols(), config.input_keep);

  Precomposition pre = Precomposition::make(base, config.sigma0, config.alpha0,
                                            config.pre_initial_copies, mu, nu);
  TreePipelineResult result{std::move(tree), pre, radii, std::move(growth), 0.0, {}, 0.0,
                            false,           false, false, {},    {},       0};
  result.seed = rng.seed;

  // Alpha policy: halve from alpha0 while the avg-filt sup error improves by
  // at least 10%.
  const rng::Source pre_rng = rng.sub(0x707265ULL);
  auto avg_filt_sup = [&](const Precomposition& p) {
    TreeEvaluator ev(result.tree);
    return sup_error_for_draw(result.tree, p, grid, base_values, EvalMode::avg_filt, pre_rng, 0, ev,
                              nullptr);
  };
  double err = avg_filt_sup(pre);
  for (int it = 0; it < config.alpha_halvings_cap; ++it) {
    const Precomposition halved = pre.with_alpha(pre.alpha() / 2.0);
    const double err2 = avg_filt_sup(halved);
    if (!(err - err2 >= 0.1 * err)) break;
    pre = halved;
    err = err2;
  }

  // Precomposition sizing: double N until the probability and L^q guarantees
  // hold on the verification draws.
  const rng::Source verify_rng = rng.sub(0x766572ULL);
  const int jobs = std::max(1, config.jobs);
  for (int n_pre = config.pre_initial_copies;; n_pre *= 2) {
    result.pre = pre.with_copy_pairs(n_pre);
    const std::int64_t draws = config.verify_draws;
    std::vector<double> sups(static_cast<std::size_t>(draws), 0.0);
    std::vector<std::unique_ptr<TreeEvaluator>> evals;
    std::vector<RadiiRecorder> recorders(static_cast<std::size_t>(jobs));
    for (int t = 0; t < jobs; ++t) {
      evals.push_back(std::make_unique<TreeEvaluator>(result.tree));
      recorders[static_cast<std::size_t>(t)].radii = &result.radii;
    }
    const rng::Source draw_rng = verify_rng.sub(static_cast<std::uint64_t>(n_pre));
    if (jobs == 1) {
      for (std::int64_t i = 0; i < draws; ++i)
        sups[static_cast<std::size_t>(i)] =
            sup_error_for_draw(result.tree, result.pre, grid, base_values, EvalMode::sampled,
                               draw_rng, static_cast<std::uint64_t>(i), *evals[0], &recorders[0]);
    } else {
      std::vector<std::thread> threads;
      const std::int64_t chunk = (draws + jobs - 1) / jobs;
      for (int t = 0; t < jobs; ++t) {
        const std::int64_t b = t * chunk, e = std::min(draws, b + chunk);
        if (b >= e) break;
        threads.emplace_back([&, b, e, t] {
          for (std::int64_t i = b; i < e; ++i)
            sups[static_cast<std::size_t>(i)] = sup_error_for_draw(
                result.tree, result.pre, grid, base_values, EvalMode::sampled, draw_rng,
                static_cast<std::uint64_t>(i), *evals[static_cast<std::size_t>(t)],
                &recorders[static_cast<std::size_t>(t)]);
        });
      }
      for (auto& th : threads) th.join();
    }

    std::int64_t exceed = 0;
    std::vector<double> powered(sups.size());
    for (std::size_t i = 0; i < sups.size(); ++i) {
      if (sups[i] > config.eps) ++exceed;
      powered[i] = std::pow(sups[i], config.q);
    }
    result.exceedance.exceed_count = exceed;
    result.exceedance.samples = draws;
    result.exceedance.estimate = static_cast<double>(exceed) / static_cast<double>(draws);
    result.exceedance.ci = wilson_interval(exceed, draws, config.confidence);
    result.exceedance.eps = config.eps;
    result.exceedance.confidence = config.confidence;
    result.lq_estimate = std::pow(pairwise_sum(powered) / static_cast<double>(draws), 1.0 / config.q);
    result.pass_prob = result.exceedance.ci.hi < config.eps;
    result.pass_lq = result.lq_estimate < config.eps;

    RadiiRecorder total;
    total.radii = &result.radii;
    for (const RadiiRecorder& r : recorders) {
      total.checks += r.checks;
      total.violations += r.violations;
      total.max_ratio = std::max(total.max_ratio, r.max_ratio);
    }
    result.radii_check = total;

    if (result.pass_prob && result.pass_lq) break;
    if (n_pre >= config.pre_copy_cap)
      throw_budget("tree pipeline: precomposition copy cap reached without certifying eps");
    result.rejected_pre_copies.push_back(n_pre);
  }

  result.avg_filt_sup = avg_filt_sup(result.pre);
  result.pass_avg_filt = result.avg_filt_sup < config.eps;
  return result;
}

}  // namespace dropnet
