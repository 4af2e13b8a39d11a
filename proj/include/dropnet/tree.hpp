#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "dropnet/filter_model.hpp"
#include "dropnet/network.hpp"
#include "dropnet/rng.hpp"

namespace dropnet {

enum class EvalMode { sampled, avg_filt };

// Radii R_0..R_L bounding intermediate tree values: R_0 = (Q/beta) R + 1 and
// R_j = sup |sigma_j(x + b_j)| + 1 over the ball of radius
// beta^{-1} ||W_j||_HS R_{j-1} + 1, the sup evaluated per coordinate at the
// interval endpoints (every supported activation is monotone).
struct RadiiTable {
  double R = 1.0, Q = 5.0, beta = 0.5;
  std::vector<double> levels;  // R_0 .. R_L
  double at(int j) const { return levels[static_cast<std::size_t>(j)]; }
  double last() const { return levels.back(); }
};

RadiiTable compute_radii(const Network& net, double R, double Q, double beta);

// Rooted tree over the base network's layers. The root sits at level L; an
// edge into a vertex at level j carries a filter distribution shaped like
// W^(j) and the rescaled weight V^e = W^(j) / E[F^e]. Streams derive from the
// path hash of the child vertex, so copies attached at distinct leaves
// commute bit-exactly.
class DropoutTree {
 public:
  struct Vertex {
    int level;
    int parent;  // -1 for the root
    std::uint64_t path;
    std::vector<int> children;
  };
  struct Edge {
    FilterModel filter;
    Eigen::MatrixXd rescaled;     // V^e = W / E[F]
    Eigen::MatrixXd mean_scaled;  // V^e elementwise E[F] (deterministic mode)
    std::uint64_t stream;
  };

  explicit DropoutTree(Network base);

  const Network& base() const { return base_; }
  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  const Vertex& vertex(int v) const { return vertices_[static_cast<std::size_t>(v)]; }
  const Edge& edge(int v) const { return edges_[static_cast<std::size_t>(v - 1)]; }
  bool is_leaf(int v) const { return vertices_[static_cast<std::size_t>(v)].children.empty(); }
  std::vector<int> leaves() const;
  bool full() const;            // every leaf at level 1
  int max_leaf_level() const;

  // Attaches `copies` children to the leaf, each new edge labeled with an
  // independent stream of mu. The leaf must sit above level 1.
  void input_copy(int leaf, const FilterModel& mu, int copies);

 private:
  Network base_;
  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
};

// Per-level magnitude check against a radii table.
struct RadiiRecorder {
  const RadiiTable* radii = nullptr;
  std::int64_t checks = 0;
  std::int64_t violations = 0;
  double max_ratio = 0.0;

  void record(int level, double norm) {
    ++checks;
    const double ratio = norm / radii->at(level);
    if (ratio > max_ratio) max_ratio = ratio;
    if (norm >= radii->at(level)) ++violations;
  }
};

// Reusable evaluation workspace for one tree. Filters are sampled once per
// draw and shared across inputs, matching the one-random-function semantics.
class TreeEvaluator {
 public:
  explicit TreeEvaluator(const DropoutTree& tree);

  Eigen::VectorXd& leaf_input(int v);
  void sample_filters(const rng::Source& rng, std::uint64_t draw);
  void use_mean_filters();
  const Eigen::VectorXd& eval_current(RadiiRecorder* recorder = nullptr);

  // One-call form: leaf inputs keyed by vertex id.
  Eigen::VectorXd eval(const std::vector<std::pair<int, Eigen::VectorXd>>& leaf_inputs,
                       EvalMode mode, const rng::Source& rng, std::uint64_t draw);

 private:
  const DropoutTree* tree_;
  std::vector<Eigen::VectorXd> value_;
  std::vector<Eigen::MatrixXd> current_;  // realized V o F per non-root vertex
};

struct AppropParams {
  double delta = 0.05;
  double eps = 0.2;
  double q = 2.0;
  std::int64_t n_filter_samples = 0;  // 0: smallest count that can pass, +30% headroom
  int n_x_samples = 8;                // random ball points per draw
  int n_perturb_samples = 2;          // delta-sphere perturbations per point (center always tried)
  int x_grid_points = 9;              // fixed grid points
  std::int64_t max_filter_samples = 2'000'000;
  double confidence = 0.95;
  int jobs = 1;
};

struct AppropResult {
  std::int64_t violations = 0;
  std::int64_t samples = 0;
  double estimate = 0.0;
  double wilson_upper = 1.0;
  double threshold = 0.0;  // (eps / 4 R_L)^q
  bool pass = false;
  bool aborted_early = false;
};

// Monte Carlo estimate of the tree approximation property: the probability
// that sup over x in B(0,R) and leaf inputs within delta of In(x) of
// |Phi(x~) - Phi_det(In(x))| exceeds eps/2. PASS iff the Wilson upper bound
// stays below (eps / 4 R_L)^q.
AppropResult check_approp(const DropoutTree& tree, const RadiiTable& radii,
                          const AppropParams& params, rng::Source rng);

struct GrowthPolicy {
  int initial_copy_size = 16;
  int copy_size_cap = 4096;
  double delta0 = 0.0;     // 0: eps/4
  double keep_prob = 0.5;  // per-level mu: i.i.d. entries at this keep probability
  AppropParams approp;
};

struct GrowthRound {
  int level = 0;
  int copy_size = 0;
  double delta = 0.0;
  AppropResult check;
  std::vector<int> rejected_sizes;
};

struct GrowthLog {
  std::vector<GrowthRound> rounds;
};

// Starting from the trivial tree, copies every leaf above level 1 with a
// doubling copy size until check_approp passes, halving delta per level, until
// all leaves reach level 1.
DropoutTree grow_full_tree(const Network& base, const RadiiTable& radii, double eps, double q,
                           const GrowthPolicy& policy, rng::Source rng, GrowthLog* log = nullptr);

}  // namespace dropnet
