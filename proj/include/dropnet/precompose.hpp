#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "dropnet/tree.hpp"

namespace dropnet {

// Two-sublayer replacement of the first network layer: 2N sign-paired copies
// of V o F applied to sigma0 of the alpha-scaled, diagonally filtered input,
//   Xi(x) = sigma1( (1/N) sum_{i=1}^{2N} (-1)^i (V o F^i) sigma0((-1)^i alpha (I o G^i) x) + b^(1) )
// with V_rc = W1_rc / (alpha (sigma_- + sigma_+) E[F_rc] E[G_cc]).
//
// One (mu, nu) pair is shared by all leaves; leaves get independent
// realizations through their path-derived streams. The exact-first-layer
// precomposition is the special case sigma0 = identity with unit-mass
// filters, which reproduces Psi_1 for any alpha and N.
class Precomposition {
 public:
  static Precomposition make(const Network& base, Activation sigma0, double alpha, int copy_pairs,
                             FilterModel mu, FilterModel nu);
  // sigma0 = identity, unit-mass filters: Xi == Psi_1 exactly.
  static Precomposition exact_first_layer(const Network& base);

  double alpha() const { return alpha_; }
  int copy_pairs() const { return copy_pairs_; }
  const Activation& sigma0() const { return sigma0_; }
  const FilterModel& mu() const { return mu_; }
  const FilterModel& nu() const { return nu_; }
  const Eigen::MatrixXd& rescaled() const { return v_; }

  Precomposition with_alpha(double alpha) const;
  Precomposition with_copy_pairs(int n) const;

  Eigen::VectorXd eval(const Eigen::VectorXd& x, EvalMode mode, const rng::Source& leaf_rng,
                       std::uint64_t draw) const;

 private:
  Precomposition() = default;

  double alpha_ = 1e-2;
  int copy_pairs_ = 1;  // N; the sum has 2N terms
  Activation sigma0_;
  FilterModel mu_ = FilterModel::unit_mass_ones(1);
  FilterModel nu_ = FilterModel::unit_mass_ones(1);
  Eigen::MatrixXd v_;        // V, d1 x d0
  Eigen::VectorXd f_mean_;   // E[F] entries, row-major d1 x d0
  Eigen::VectorXd g_mean_;   // E[G] diagonal, d0
  Eigen::MatrixXd w1_;
  Eigen::VectorXd b1_;
  Activation sigma1_;
};

// Admissibility check 4 (|s-| + |s+|) / |s- + s+| < Q for the zeroth
// activation. Throws when sigma_- + sigma_+ = 0 (inadmissible).
bool q_condition_ok(const Activation& sigma0, double Q);

// NN_{Gamma,Xi}: duplicates x to every leaf, evaluates the precomposition
// there, then runs the Phi recursion. avg_filt mode replaces every filter
// (tree and precomposition) by its expectation.
Eigen::VectorXd nn_eval(const DropoutTree& tree, const Precomposition& pre,
                        const Eigen::VectorXd& x, EvalMode mode, const rng::Source& rng,
                        std::uint64_t draw, TreeEvaluator* evaluator = nullptr,
                        RadiiRecorder* recorder = nullptr);

}  // namespace dropnet
