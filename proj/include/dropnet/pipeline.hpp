#pragma once

#include <optional>

#include "dropnet/estimators.hpp"
#include "dropnet/precompose.hpp"
#include "dropnet/tree.hpp"

namespace dropnet {

struct TreePipelineConfig {
  double eps = 0.2;
  double q = 2.0;
  double Q = 5.0;
  double R = 1.0;
  double keep_prob = 0.5;        // tree edge filters, i.i.d. entries
  double input_keep = 0.5;       // precomposition G diagonal filters
  double pre_keep = 0.5;         // precomposition F filters
  Activation sigma0 = Activation::relu();
  double alpha0 = 1e-2;
  int alpha_halvings_cap = 20;

  int growth_initial_copy = 16;
  int growth_copy_cap = 4096;
  double delta0 = 0.0;  // 0: eps/4
  AppropParams approp;  // delta/eps/q are overwritten per round

  int pre_initial_copies = 16;
  int pre_copy_cap = 4096;

  std::int64_t verify_draws = 500;
  int verify_grid_points = 65;
  double confidence = 0.95;
  int jobs = 1;
};

struct TreePipelineResult {
  DropoutTree tree;
  Precomposition pre;
  RadiiTable radii;
  GrowthLog growth;

  double avg_filt_sup = 0.0;       // guarantee (avg-filt): sup-grid error of the deterministic mode
  ExceedanceEstimate exceedance;   // guarantee (prob): P[sup-grid > eps]
  double lq_estimate = 0.0;        // guarantee (L^q)
  bool pass_avg_filt = false, pass_prob = false, pass_lq = false;
  bool all_pass() const { return pass_avg_filt && pass_prob && pass_lq; }

  std::vector<int> rejected_pre_copies;
  RadiiRecorder radii_check;
  std::uint64_t seed = 0;
};

// Full expectation-replacement pipeline: radii, admissibility, tree growth
// under the approximation property, alpha selection and precomposition sizing,
// then direct verification of the three guarantees on the evaluation grid.
TreePipelineResult run_tree_pipeline(const Network& base, const TreePipelineConfig& config,
                                     rng::Source rng);

}  // namespace dropnet
