#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dropnet/filter_model.hpp"
#include "dropnet/network.hpp"

namespace dropnet {

// Expectation-matching coefficients a_V over block subsets, together with the
// block partition that embeds subsets into parameter indices. Every table
// produced by the factories below sums to 1 within 1e-12 (a forced identity:
// apply the decomposition to a constant function); the constructor itself
// stays permissive so tests can build deliberately corrupted tables.
class CoefficientTable {
 public:
  CoefficientTable(std::vector<double> values, std::vector<std::vector<int>> blocks);

  // Throws unless the entries sum to 1 within 1e-12.
  const CoefficientTable& checked() const;

  int block_count() const { return r_; }
  std::uint32_t subset_count() const { return static_cast<std::uint32_t>(values_.size()); }
  double at(std::uint32_t subset) const { return values_[subset]; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<std::vector<int>>& blocks() const { return blocks_; }
  double sum() const;

 private:
  int r_ = 0;
  std::vector<double> values_;
  std::vector<std::vector<int>> blocks_;
};

// Closed form for independent per-block Bernoulli filters:
//   a_V = prod_{i in V} 1/(1-p_i) * prod_{i not in V} (-p_i / (1-p_i)).
CoefficientTable coeffs_closed_form(const Eigen::VectorXd& drop_prob,
                                    std::vector<std::vector<int>> blocks = {});

// General coefficients by cardinality induction over block subsets. Works for
// any enumerable per-subset family with P[f^U = all-ones] > 0; only the per-U
// marginal laws enter. Cost is O(3^r) span-vector updates.
CoefficientTable coeffs_general(const SubsetModels& models);

// Max over the grid of |sum_U a_U E[Psi(x, (w \odot 1_U) \odot f^U)] - Psi(x, w)|,
// expectations computed by exhaustive enumeration over filter outcomes.
double verify_decomposition(const Network& net, const CoefficientTable& table,
                            const SubsetModels& models,
                            const std::vector<Eigen::VectorXd>& x_grid);

// Direct-summation check of the inclusion-exclusion identity behind the
// closed form: mu_K = 1 for K = full, 0 otherwise. Returns the max deviation.
double mu_identity_max_deviation(const Eigen::VectorXd& q);

}  // namespace dropnet
