#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dropnet/network.hpp"
#include "dropnet/rng.hpp"

namespace dropnet {

// Distribution of a {0,1}^n filter vector. Entries are partitioned into
// blocks; entries in one block always share a value. Models are immutable and
// sampling is a pure function of (source, draw), so concurrent use needs no
// coordination. The block law is either
// independent Bernoulli per block (keep probability q_s in (0,1]) or an
// explicit pmf over block on/off patterns. P[f = all-ones] > 0 is asserted at
// construction.
class FilterModel {
 public:
  static constexpr int kMaxExplicitEntries = 20;
  static constexpr int kMaxEnumerableBlocks = 20;

  static FilterModel block_bernoulli(int n, std::vector<std::vector<int>> blocks,
                                     Eigen::VectorXd keep_prob,
                                     std::optional<double> beta_floor = std::nullopt);
  // Outcomes over the n raw entries; blocks are inferred as the coarsest
  // partition constant across the support.
  static FilterModel explicit_pmf(int n,
                                  std::vector<std::pair<std::vector<std::uint8_t>, double>> pmf,
                                  std::optional<double> beta_floor = std::nullopt);
  static FilterModel unit_mass_ones(int n);

  int size() const { return n_; }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  const std::vector<std::vector<int>>& blocks() const { return blocks_; }
  int entry_block(int i) const { return entry_block_[static_cast<std::size_t>(i)]; }
  bool independent_bernoulli() const { return bernoulli_; }
  const Eigen::VectorXd& block_keep() const;       // Bernoulli models only
  Eigen::VectorXd block_expectation() const;       // P[block on], any model
  std::optional<double> beta_floor() const { return beta_floor_; }
  double min_keep() const;

  bool enumerable() const { return block_count() <= kMaxEnumerableBlocks; }
  // Support as (block pattern, probability), patterns ascending. Enumerable
  // models only.
  std::vector<std::pair<std::uint32_t, double>> support() const;
  double pattern_prob(std::uint32_t pattern) const;
  // P[on-set contains `pattern`]; positive for pattern = full by construction.
  double prob_on_superset(std::uint32_t pattern) const;

  std::uint32_t sample_pattern(const rng::Source& rng, std::uint64_t draw) const;
  std::vector<std::uint8_t> sample(const rng::Source& rng, std::uint64_t draw) const;
  Eigen::VectorXd expectation() const;  // entrywise keep probabilities
  double pmf(const std::vector<std::uint8_t>& outcome) const;

  Eigen::VectorXd expand_pattern(std::uint32_t pattern) const;  // {0,1}^n mask
  // Parameter-index mask of a block subset (the embedding iota).
  Eigen::VectorXd lift_subset(std::uint32_t subset) const { return expand_pattern(subset); }

 private:
  FilterModel() = default;
  void finalize(std::optional<double> beta_floor);

  int n_ = 0;
  bool bernoulli_ = true;
  std::vector<std::vector<int>> blocks_;
  std::vector<int> entry_block_;
  Eigen::VectorXd keep_;                                       // Bernoulli law
  std::vector<std::pair<std::uint32_t, double>> pattern_pmf_;  // explicit law
  std::vector<double> pattern_cdf_;                            // explicit law
  std::optional<double> beta_floor_;
};

// Node-dropout: one block per (layer, column) of each weight matrix with keep
// probability 1 - p_j; the bias entries of each layer form an always-on block.
// p_per_layer[0] = 0 encodes "without dropout on the inputs".
FilterModel node_dropout_model(const Network& net, const std::vector<double>& p_per_layer);

// Dropconnect: an independent Bernoulli(1-p) singleton block per weight
// entry; per-layer always-on bias blocks.
FilterModel dropconnect_model(const Network& net, double p);

// Dropconnect restricted to the listed layers (1-based); weights of the other
// layers join their layer's always-on block.
FilterModel dropconnect_model(const Network& net, double p, const std::vector<int>& filtered_layers);

// Matrix-shaped filter with i.i.d. Bernoulli entries (row-major), used for
// dropout-tree edges and precomposition weights.
FilterModel matrix_bernoulli(int rows, int cols, double keep_prob);

// Diagonal d x d filter with i.i.d. Bernoulli diagonal entries.
FilterModel diagonal_bernoulli(int d, double keep_prob);

// Per-subset filter family of the expectation-matching decomposition: one
// model per block subset U, all sharing the same block partition. The common case is a
// single model reused for every U.
class SubsetModels {
 public:
  explicit SubsetModels(FilterModel shared);
  explicit SubsetModels(std::vector<FilterModel> per_subset);

  int block_count() const { return any().block_count(); }
  const FilterModel& any() const { return models_.front(); }
  const FilterModel& at(std::uint32_t subset) const;
  bool shared() const { return models_.size() == 1; }

 private:
  std::vector<FilterModel> models_;
};

}  // namespace dropnet
