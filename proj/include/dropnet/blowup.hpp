#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dropnet/coefficients.hpp"
#include "dropnet/estimators.hpp"
#include "dropnet/filter_model.hpp"
#include "dropnet/fit.hpp"
#include "dropnet/network.hpp"

namespace dropnet {

// The M-fold average of coefficient-weighted filtered copies of a base
// network. Kept in factored form (base, table, models, M); the concatenated
// parameter vector of the copies is never materialized -- evaluation is
// equivalent.
class BlowupNetwork {
 public:
  BlowupNetwork(Network base, CoefficientTable table, SubsetModels models, std::uint64_t copies);

  const Network& base() const { return base_; }
  const CoefficientTable& table() const { return table_; }
  const SubsetModels& models() const { return models_; }
  std::uint64_t copies() const { return copies_; }
  BlowupNetwork with_copies(std::uint64_t m) const { return {base_, table_, models_, m}; }

  // One realization of the blow-up at x: draws one filter per (copy, subset)
  // pair, draw index i*2^r + U, so results are reproducible and
  // order-independent.
  Eigen::VectorXd sample_eval(const Eigen::VectorXd& x, const rng::Source& rng,
                              std::uint64_t draw) const;

  // One realization of the blow-up as a function, evaluated on a whole grid
  // (the filters are shared across grid points).
  Eigen::MatrixXd sample_eval_grid(const std::vector<Eigen::VectorXd>& grid,
                                   const rng::Source& rng, std::uint64_t draw) const;

  // Exact expectation by enumeration; equals the base network whenever the
  // table was computed for these models.
  Eigen::VectorXd mean_eval(const Eigen::VectorXd& x) const;

  // Every filter replaced by its expectation (expectation-replacement mode).
  Eigen::VectorXd avg_filter_eval(const Eigen::VectorXd& x) const;

 private:
  std::vector<double> pattern_weights(const rng::Source& rng, std::uint64_t draw) const;

  Network base_;
  CoefficientTable table_;
  SubsetModels models_;
  std::uint64_t copies_;
  std::vector<Network> masked_;          // one per block subset
  std::vector<std::uint32_t> active_;    // subsets with a_U != 0
};

struct CertifyConfig {
  FitConfig fit;
  double q = 2.0;             // L^q exponent to certify
  int runs = 200;             // Monte Carlo runs per M
  std::uint64_t initial_copies = 1;
  std::uint64_t copies_cap = 1 << 16;
  int grid_points = 256;      // evaluation grid for the seminorm
  double confidence = 0.95;
  int jobs = 1;
};

struct CertifiedBlowup {
  BlowupNetwork blowup;
  FitResult fit;
  ErrorReport report;
  std::vector<std::uint64_t> tried_copies;
};

// Fits a base network to within eps/2 on the grid, then doubles M until the
// Wilson upper bound of P[sup-grid error > eps] and the L^q estimate are both
// below eps. model_for(net) builds the filter distribution for the fitted
// network (e.g. dropconnect at a chosen rate).
CertifiedBlowup certify_blowup(const TargetFunction& target, double eps,
                                  const std::function<FilterModel(const Network&)>& model_for,
                                  const CertifyConfig& config, rng::Source rng);

}  // namespace dropnet
