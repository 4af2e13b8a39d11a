#include "dropnet/filter_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "dropnet/error.hpp"

namespace dropnet {

namespace {
constexpr double kPmfTol = 1e-12;
}

void FilterModel::finalize(std::optional<double> beta_floor) {
  require(n_ >= 1, ErrorCode::invalid_argument, "filter model needs n >= 1");
  entry_block_.assign(static_cast<std::size_t>(n_), -1);
  for (std::size_t s = 0; s < blocks_.size(); ++s) {
    require(!blocks_[s].empty(), ErrorCode::invalid_argument, "empty filter block");
    for (int i : blocks_[s]) {
      require(i >= 0 && i < n_, ErrorCode::invalid_argument, "block index out of range");
      require(entry_block_[static_cast<std::size_t>(i)] == -1, ErrorCode::invalid_argument,
              "blocks must be disjoint");
      entry_block_[static_cast<std::size_t>(i)] = static_cast<int>(s);
    }
  }
  for (int i = 0; i < n_; ++i)
    require(entry_block_[static_cast<std::size_t>(i)] >= 0, ErrorCode::invalid_argument,
            "blocks must cover every entry");
  require(block_count() <= 32, ErrorCode::invalid_argument, "at most 32 blocks supported");

  if (bernoulli_) {
    require(keep_.size() == block_count(), ErrorCode::shape_mismatch,
            "keep probability per block required");
    for (Eigen::Index s = 0; s < keep_.size(); ++s)
      require(keep_[s] > 0.0 && keep_[s] <= 1.0, ErrorCode::invalid_argument,
              "keep probability must lie in (0,1]");
  } else {
    double total = 0.0;
    bool ones_positive = false;
    const std::uint32_t full = block_count() == 32 ? 0xffffffffu : ((1u << block_count()) - 1u);
    for (const auto& [pattern, prob] : pattern_pmf_) {
      require(prob >= 0.0, ErrorCode::invalid_argument, "pmf probabilities must be nonnegative");
      total += prob;
      if (pattern == full && prob > 0.0) ones_positive = true;
    }
    require(std::abs(total - 1.0) <= kPmfTol, ErrorCode::invalid_argument, "pmf must sum to 1");
    require(ones_positive, ErrorCode::invalid_argument,
            "P[f = all-ones] must be positive");
    pattern_cdf_.clear();
    double acc = 0.0;
    for (const auto& [pattern, prob] : pattern_pmf_) {
      acc += prob;
      pattern_cdf_.push_back(acc);
    }
    if (!pattern_cdf_.empty()) pattern_cdf_.back() = 1.0;
  }

  beta_floor_ = beta_floor;
  if (beta_floor_) {
    require(*beta_floor_ > 0.0 && *beta_floor_ <= 1.0, ErrorCode::invalid_argument,
            "beta floor must lie in (0,1]");
    require(min_keep() >= *beta_floor_ - 1e-15, ErrorCode::invalid_argument,
            "entrywise keep probability below the declared beta floor");
  }
}

FilterModel FilterModel::block_bernoulli(int n, std::vector<std::vector<int>> blocks,
                                         Eigen::VectorXd keep_prob,
                                         std::optional<double> beta_floor) {
  FilterModel m;
  m.n_ = n;
  m.bernoulli_ = true;
  m.blocks_ = std::move(blocks);
  m.keep_ = std::move(keep_prob);
  m.finalize(beta_floor);
  return m;
}

FilterModel FilterModel::explicit_pmf(int n,
                                      std::vector<std::pair<std::vector<std::uint8_t>, double>> pmf,
                                      std::optional<double> beta_floor) {
  require(n >= 1 && n <= kMaxExplicitEntries, ErrorCode::invalid_argument,
          "explicit pmf supports 1 <= n <= 20 entries");
  require(!pmf.empty(), ErrorCode::invalid_argument, "pmf must be non-empty");
  for (const auto& [outcome, prob] : pmf) {
    (void)prob;
    require(static_cast<int>(outcome.size()) == n, ErrorCode::shape_mismatch,
            "pmf outcome length != n");
    for (auto b : outcome)
      require(b == 0 || b == 1, ErrorCode::invalid_argument, "outcomes must be {0,1}-valued");
  }

  // Infer the coarsest block partition: entries are equivalent when they agree
  // on every support outcome with positive probability.
  std::vector<std::vector<std::uint8_t>> columns(static_cast<std::size_t>(n));
  for (const auto& [outcome, prob] : pmf) {
    if (prob <= 0.0) continue;
    for (int i = 0; i < n; ++i) columns[static_cast<std::size_t>(i)].push_back(outcome[static_cast<std::size_t>(i)]);
  }
  FilterModel m;
  m.n_ = n;
  m.bernoulli_ = false;
  std::map<std::vector<std::uint8_t>, int> seen;
  std::vector<int> entry_to_block(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto [it, inserted] = seen.emplace(columns[static_cast<std::size_t>(i)], static_cast<int>(m.blocks_.size()));
    if (inserted) m.blocks_.emplace_back();
    entry_to_block[static_cast<std::size_t>(i)] = it->second;
    m.blocks_[static_cast<std::size_t>(it->second)].push_back(i);
  }

  std::map<std::uint32_t, double> merged;
  for (const auto& [outcome, prob] : pmf) {
    if (prob <= 0.0) continue;
    std::uint32_t pattern = 0;
    for (int i = 0; i < n; ++i)
      if (outcome[static_cast<std::size_t>(i)]) pattern |= 1u << entry_to_block[static_cast<std::size_t>(i)];
    merged[pattern] += prob;
  }
  m.pattern_pmf_.assign(merged.begin(), merged.end());
  m.finalize(beta_floor);
  return m;
}

FilterModel FilterModel::unit_mass_ones(int n) {
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  return block_bernoulli(n, {all}, Eigen::VectorXd::Ones(1));
}

const Eigen::VectorXd& FilterModel::block_keep() const {
  require(bernoulli_, ErrorCode::unsupported_model, "block_keep applies to Bernoulli models");
  return keep_;
}

Eigen::VectorXd FilterModel::block_expectation() const {
  if (bernoulli_) return keep_;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(block_count());
  for (const auto& [pattern, prob] : pattern_pmf_)
    for (int s = 0; s < block_count(); ++s)
      if (pattern & (1u << s)) e[s] += prob;
  return e;
}

double FilterModel::min_keep() const { return block_expectation().minCoeff(); }

std::vector<std::pair<std::uint32_t, double>> FilterModel::support() const {
  if (!bernoulli_) return pattern_pmf_;
  require(enumerable(), ErrorCode::unsupported_model, "model has too many blocks to enumerate");
  const int r = block_count();
  std::vector<std::pair<std::uint32_t, double>> out;
  out.reserve(static_cast<std::size_t>(1) << r);
  for (std::uint32_t pattern = 0; pattern < (1u << r); ++pattern) {
    double p = 1.0;
    for (int s = 0; s < r; ++s) p *= (pattern & (1u << s)) ? keep_[s] : 1.0 - keep_[s];
    if (p > 0.0) out.emplace_back(pattern, p);
  }
  return out;
}

double FilterModel::pattern_prob(std::uint32_t pattern) const {
  if (bernoulli_) {
    double p = 1.0;
    for (int s = 0; s < block_count(); ++s) p *= (pattern & (1u << s)) ? keep_[s] : 1.0 - keep_[s];
    return p;
  }
  for (const auto& [pat, prob] : pattern_pmf_)
    if (pat == pattern) return prob;
  return 0.0;
}

double FilterModel::prob_on_superset(std::uint32_t pattern) const {
  if (bernoulli_) {
    double p = 1.0;
    for (int s = 0; s < block_count(); ++s)
      if (pattern & (1u << s)) p *= keep_[s];
    return p;
  }
  double p = 0.0;
  for (const auto& [pat, prob] : pattern_pmf_)
    if ((pat & pattern) == pattern) p += prob;
  return p;
}

std::uint32_t FilterModel::sample_pattern(const rng::Source& rng, std::uint64_t draw) const {
  if (bernoulli_) {
    std::uint32_t pattern = 0;
    for (int s = 0; s < block_count(); ++s)
      if (rng::unit(rng, draw, static_cast<std::uint64_t>(s)) < keep_[s]) pattern |= 1u << s;
    return pattern;
  }
  const double u = rng::unit(rng, draw, 0);
  for (std::size_t k = 0; k < pattern_pmf_.size(); ++k)
    if (u < pattern_cdf_[k]) return pattern_pmf_[k].first;
  return pattern_pmf_.back().first;
}

std::vector<std::uint8_t> FilterModel::sample(const rng::Source& rng, std::uint64_t draw) const {
  const std::uint32_t pattern = sample_pattern(rng, draw);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(n_));
  for (int i = 0; i < n_; ++i)
    out[static_cast<std::size_t>(i)] =
        (pattern & (1u << entry_block_[static_cast<std::size_t>(i)])) ? 1 : 0;
  return out;
}

Eigen::VectorXd FilterModel::expectation() const {
  const Eigen::VectorXd be = block_expectation();
  Eigen::VectorXd e(n_);
  for (int i = 0; i < n_; ++i) e[i] = be[entry_block_[static_cast<std::size_t>(i)]];
  return e;
}

double FilterModel::pmf(const std::vector<std::uint8_t>& outcome) const {
  require(static_cast<int>(outcome.size()) == n_, ErrorCode::shape_mismatch,
          "outcome length != model size");
  require(enumerable(), ErrorCode::unsupported_model, "model has too many blocks to enumerate");
  std::uint32_t pattern = 0;
  for (int s = 0; s < block_count(); ++s) {
    const std::uint8_t first = outcome[static_cast<std::size_t>(blocks_[static_cast<std::size_t>(s)].front())];
    for (int i : blocks_[static_cast<std::size_t>(s)])
      if (outcome[static_cast<std::size_t>(i)] != first) return 0.0;  // block-inconsistent
    if (first) pattern |= 1u << s;
  }
  return pattern_prob(pattern);
}

Eigen::VectorXd FilterModel::expand_pattern(std::uint32_t pattern) const {
  Eigen::VectorXd mask(n_);
  for (int i = 0; i < n_; ++i)
    mask[i] = (pattern & (1u << entry_block_[static_cast<std::size_t>(i)])) ? 1.0 : 0.0;
  return mask;
}

namespace {

// Shared builder: per-layer weight blocks keyed by the grouping function,
// plus one always-on bias block per layer.
FilterModel build_network_model(const Network& net,
                                const std::function<void(int layer, int r, int c, int flat,
                                                         std::vector<std::vector<int>>&,
                                                         std::vector<double>&)>& add_weight) {
  std::vector<std::vector<int>> blocks;
  std::vector<double> keep;
  for (int j = 1; j <= net.depth(); ++j) {
    const Layer& l = net.layer(j);
    int flat = net.layer_offset(j);
    for (int r = 0; r < l.rows(); ++r)
      for (int c = 0; c < l.cols(); ++c) add_weight(j, r, c, flat++, blocks, keep);
    std::vector<int> bias_block;
    for (int r = 0; r < l.rows(); ++r) bias_block.push_back(flat++);
    blocks.push_back(std::move(bias_block));
    keep.push_back(1.0);
  }
  Eigen::VectorXd q(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t s = 0; s < keep.size(); ++s) q[static_cast<Eigen::Index>(s)] = keep[s];
  return FilterModel::block_bernoulli(net.param_count(), std::move(blocks), std::move(q));
}

}  // namespace

FilterModel node_dropout_model(const Network& net, const std::vector<double>& p_per_layer) {
  require(static_cast<int>(p_per_layer.size()) == net.depth(), ErrorCode::invalid_argument,
          "need one drop probability per layer");
  for (double p : p_per_layer)
    require(p >= 0.0 && p < 1.0, ErrorCode::invalid_argument,
            "drop probability must lie in [0,1)");
  // One block per weight-matrix column; starts of per-layer column blocks are
  // tracked so row-major traversal can append into them.
  std::vector<int> column_block_start;
  return build_network_model(net, [&](int layer, int r, int c, int flat,
                                      std::vector<std::vector<int>>& blocks, std::vector<double>& keep) {
    if (r == 0 && c == 0) {
      column_block_start.push_back(static_cast<int>(blocks.size()));
      const int cols = net.layer(layer).cols();
      for (int k = 0; k < cols; ++k) {
        blocks.emplace_back();
        keep.push_back(1.0 - p_per_layer[static_cast<std::size_t>(layer - 1)]);
      }
    }
    blocks[static_cast<std::size_t>(column_block_start.back() + c)].push_back(flat);
  });
}

FilterModel dropconnect_model(const Network& net, double p) {
  std::vector<int> all(static_cast<std::size_t>(net.depth()));
  for (int j = 1; j <= net.depth(); ++j) all[static_cast<std::size_t>(j - 1)] = j;
  return dropconnect_model(net, p, all);
}

FilterModel dropconnect_model(const Network& net, double p, const std::vector<int>& filtered_layers) {
  require(p >= 0.0 && p < 1.0, ErrorCode::invalid_argument, "drop probability must lie in [0,1)");
  std::vector<bool> filtered(static_cast<std::size_t>(net.depth() + 1), false);
  for (int j : filtered_layers) {
    require(j >= 1 && j <= net.depth(), ErrorCode::invalid_argument, "filtered layer out of range");
    filtered[static_cast<std::size_t>(j)] = true;
  }
  std::vector<int> layer_on_block;  // index of the layer's always-on weight block, -1 if none yet
  return build_network_model(net, [&](int layer, int r, int c, int flat,
                                      std::vector<std::vector<int>>& blocks, std::vector<double>& keep) {
    if (r == 0 && c == 0) layer_on_block.push_back(-1);
    if (filtered[static_cast<std::size_t>(layer)]) {
      blocks.push_back({flat});
      keep.push_back(1.0 - p);
    } else {
      if (layer_on_block.back() < 0) {
        layer_on_block.back() = static_cast<int>(blocks.size());
        blocks.emplace_back();
        keep.push_back(1.0);
      }
      blocks[static_cast<std::size_t>(layer_on_block.back())].push_back(flat);
    }
  });
}

FilterModel matrix_bernoulli(int rows, int cols, double keep_prob) {
  require(rows >= 1 && cols >= 1, ErrorCode::invalid_argument, "matrix filter needs positive dims");
  const int n = rows * cols;
  std::vector<std::vector<int>> blocks;
  blocks.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) blocks.push_back({i});
  return FilterModel::block_bernoulli(n, std::move(blocks),
                                      Eigen::VectorXd::Constant(n, keep_prob));
}

FilterModel diagonal_bernoulli(int d, double keep_prob) { return matrix_bernoulli(d, 1, keep_prob); }

SubsetModels::SubsetModels(FilterModel shared) { models_.push_back(std::move(shared)); }

SubsetModels::SubsetModels(std::vector<FilterModel> per_subset) : models_(std::move(per_subset)) {
  require(!models_.empty(), ErrorCode::invalid_argument, "need at least one model");
  const int r = models_.front().block_count();
  require(models_.size() == (static_cast<std::size_t>(1) << r), ErrorCode::invalid_argument,
          "per-subset family needs exactly 2^r models");
  for (const FilterModel& m : models_) {
    require(m.block_count() == r && m.size() == models_.front().size(),
            ErrorCode::invalid_argument, "per-subset models must share the block structure");
    require(m.blocks() == models_.front().blocks(), ErrorCode::invalid_argument,
            "per-subset models must share the block partition");
  }
}

const FilterModel& SubsetModels::at(std::uint32_t subset) const {
  if (models_.size() == 1) return models_.front();
  return models_[subset];
}

}  // namespace dropnet
