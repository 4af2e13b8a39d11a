#include "dropnet/tree.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <thread>

#include "dropnet/error.hpp"
#include "dropnet/estimators.hpp"

namespace dropnet {

RadiiTable compute_radii(const Network& net, double R, double Q, double beta) {
  require(R > 0.0, ErrorCode::invalid_argument, "R must be positive");
  require(Q > 1.0, ErrorCode::invalid_argument, "Q must exceed 1");
  require(beta > 0.0 && beta < 1.0, ErrorCode::invalid_argument, "beta must lie in (0,1)");
  RadiiTable t;
  t.R = R;
  t.Q = Q;
  t.beta = beta;
  t.levels.push_back(Q / beta * R + 1.0);
  for (int j = 1; j <= net.depth(); ++j) {
    const Layer& l = net.layer(j);
    const double rho = hs_norm(l.weight) * t.levels.back() / beta + 1.0;
    double sq = 0.0;
    for (int c = 0; c < l.rows(); ++c) {
      const double hi = std::abs(l.activation(rho + l.bias[c]));
      const double lo = std::abs(l.activation(-rho + l.bias[c]));
      const double m = std::max(hi, lo);
      sq += m * m;
    }
    const double r_j = std::sqrt(sq) + 1.0;
    require(std::isfinite(r_j), ErrorCode::numeric, "radii recursion overflowed");
    t.levels.push_back(r_j);
  }
  return t;
}

DropoutTree::DropoutTree(Network base) : base_(std::move(base)) {
  vertices_.push_back(Vertex{base_.depth(), -1, rng::splitmix(0x726f6f74ULL), {}});
}

std::vector<int> DropoutTree::leaves() const {
  std::vector<int> out;
  for (int v = 0; v < vertex_count(); ++v)
    if (is_leaf(v)) out.push_back(v);
  return out;
}

bool DropoutTree::full() const {
  for (int v = 0; v < vertex_count(); ++v)
    if (is_leaf(v) && vertices_[static_cast<std::size_t>(v)].level != 1) return false;
  return true;
}

int DropoutTree::max_leaf_level() const {
  int m = 0;
  for (int v = 0; v < vertex_count(); ++v)
    if (is_leaf(v)) m = std::max(m, vertices_[static_cast<std::size_t>(v)].level);
  return m;
}

void DropoutTree::input_copy(int leaf, const FilterModel& mu, int copies) {
  require(leaf >= 0 && leaf < vertex_count(), ErrorCode::invalid_argument, "no such vertex");
  require(is_leaf(leaf), ErrorCode::invalid_argument, "input copy target must be a leaf");
  const int k = vertices_[static_cast<std::size_t>(leaf)].level;
  require(k > 1, ErrorCode::invalid_argument, "input copy needs a leaf above level 1");
  require(copies >= 1, ErrorCode::invalid_argument, "need at least one copy");

  const Layer& layer = base_.layer(k);
  require(mu.size() == layer.rows() * layer.cols(), ErrorCode::shape_mismatch,
          "mu must match the level-k weight shape");
  const Eigen::VectorXd ef = mu.expectation();
  Eigen::MatrixXd rescaled(layer.rows(), layer.cols());
  Eigen::MatrixXd mean_scaled(layer.rows(), layer.cols());
  for (int r = 0; r < layer.rows(); ++r)
    for (int c = 0; c < layer.cols(); ++c) {
      const double e = ef[r * layer.cols() + c];
      rescaled(r, c) = layer.weight(r, c) / e;
      mean_scaled(r, c) = rescaled(r, c) * e;
    }

  Vertex& parent = vertices_[static_cast<std::size_t>(leaf)];
  const std::uint64_t parent_path = parent.path;
  const int first_ordinal = static_cast<int>(parent.children.size());
  for (int i = 0; i < copies; ++i) {
    const std::uint64_t path =
        rng::absorb(parent_path, static_cast<std::uint64_t>(first_ordinal + i) + 1);
    vertices_.push_back(Vertex{k - 1, leaf, path, {}});
    vertices_[static_cast<std::size_t>(leaf)].children.push_back(vertex_count() - 1);
    edges_.push_back(Edge{mu, rescaled, mean_scaled, path});
  }
}

TreeEvaluator::TreeEvaluator(const DropoutTree& tree) : tree_(&tree) {
  value_.resize(static_cast<std::size_t>(tree.vertex_count()));
  current_.resize(static_cast<std::size_t>(tree.vertex_count() - 1));
  for (int v = 0; v < tree.vertex_count(); ++v) {
    const int level = tree.vertex(v).level;
    const int d = level == 0 ? tree.base().input_dim() : tree.base().layer(level).rows();
    value_[static_cast<std::size_t>(v)] = Eigen::VectorXd::Zero(d);
    if (v >= 1) current_[static_cast<std::size_t>(v - 1)] = tree.edge(v).mean_scaled;
  }
}

Eigen::VectorXd& TreeEvaluator::leaf_input(int v) {
  return value_[static_cast<std::size_t>(v)];
}

void TreeEvaluator::sample_filters(const rng::Source& rng, std::uint64_t draw) {
  for (int v = 1; v < tree_->vertex_count(); ++v) {
    const DropoutTree::Edge& e = tree_->edge(v);
    const std::uint32_t pattern = e.filter.sample_pattern(rng.sub(e.stream), draw);
    Eigen::MatrixXd& cur = current_[static_cast<std::size_t>(v - 1)];
    const int cols = static_cast<int>(cur.cols());
    for (int r = 0; r < cur.rows(); ++r)
      for (int c = 0; c < cols; ++c) {
        const int b = e.filter.entry_block(r * cols + c);
        cur(r, c) = (pattern & (1u << b)) ? e.rescaled(r, c) : 0.0;
      }
  }
}

void TreeEvaluator::use_mean_filters() {
  for (int v = 1; v < tree_->vertex_count(); ++v)
    current_[static_cast<std::size_t>(v - 1)] = tree_->edge(v).mean_scaled;
}

const Eigen::VectorXd& TreeEvaluator::eval_current(RadiiRecorder* recorder) {
  // Children always carry larger indices than their parent, so a reverse
  // sweep evaluates leaves before internal vertices.
  for (int v = tree_->vertex_count() - 1; v >= 0; --v) {
    const DropoutTree::Vertex& vx = tree_->vertex(v);
    if (!vx.children.empty()) {
      const Layer& layer = tree_->base().layer(vx.level);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(layer.rows());
      for (int c : vx.children)
        acc.noalias() += current_[static_cast<std::size_t>(c - 1)] * value_[static_cast<std::size_t>(c)];
      acc /= static_cast<double>(vx.children.size());
      acc += layer.bias;
      for (int r = 0; r < acc.size(); ++r) acc[r] = layer.activation(acc[r]);
      value_[static_cast<std::size_t>(v)] = std::move(acc);
    }
    if (recorder) recorder->record(vx.level, value_[static_cast<std::size_t>(v)].norm());
  }
  return value_[0];
}

Eigen::VectorXd TreeEvaluator::eval(const std::vector<std::pair<int, Eigen::VectorXd>>& leaf_inputs,
                                    EvalMode mode, const rng::Source& rng, std::uint64_t draw) {
  std::size_t assigned = 0;
  for (const auto& [v, x] : leaf_inputs) {
    require(tree_->is_leaf(v), ErrorCode::invalid_argument, "input assigned to a non-leaf");
    const int level = tree_->vertex(v).level;
    const int d = level == 0 ? tree_->base().input_dim() : tree_->base().layer(level).rows();
    require(x.size() == d, ErrorCode::shape_mismatch, "leaf input has wrong dimension");
    leaf_input(v) = x;
    ++assigned;
  }
  require(assigned == tree_->leaves().size(), ErrorCode::shape_mismatch,
          "every leaf needs an input");
  if (mode == EvalMode::sampled)
    sample_filters(rng, draw);
  else
    use_mean_filters();
  return eval_current();
}

namespace {

// Largest violation count that still passes the Wilson bound, for early abort.
std::int64_t max_passing_violations(std::int64_t n, double threshold, double confidence) {
  std::int64_t v = 0;
  while (v < n && wilson_interval(v + 1, n, confidence).hi < threshold) ++v;
  return v;
}

}  // namespace

AppropResult check_approp(const DropoutTree& tree, const RadiiTable& radii,
                          const AppropParams& params, rng::Source rng) {
  require(params.delta > 0.0 && params.eps > 0.0 && params.q >= 1.0, ErrorCode::invalid_argument,
          "delta, eps must be positive and q >= 1");
  const Network& net = tree.base();
  const double threshold = std::pow(params.eps / (4.0 * radii.last()), params.q);

  const double z = normal_quantile(0.5 + params.confidence / 2.0);
  std::int64_t n = params.n_filter_samples;
  if (n <= 0) n = static_cast<std::int64_t>(std::ceil(1.3 * z * z * (1.0 - threshold) / threshold)) + 1;
  if (n > params.max_filter_samples)
    throw_budget("check_approp: threshold " + std::to_string(threshold) +
                 " needs more filter samples than allowed");
  n = std::max<std::int64_t>(n, 30);
  const std::int64_t abort_above = max_passing_violations(n, threshold, params.confidence);

  // Fixed x grid inside B(0, R) plus random ball points per draw.
  const int d0 = net.input_dim();
  std::vector<Eigen::VectorXd> x_grid;
  if (params.x_grid_points > 0) {
    const double half = d0 == 1 ? radii.R : radii.R / std::sqrt(static_cast<double>(d0));
    Box box{Eigen::VectorXd::Constant(d0, -half), Eigen::VectorXd::Constant(d0, half)};
    const int per_axis =
        d0 == 1 ? params.x_grid_points
                : std::max(2, static_cast<int>(std::round(std::pow(params.x_grid_points, 1.0 / d0))));
    x_grid = uniform_grid(box, per_axis);
  }

  const std::vector<int> leaves = tree.leaves();
  // Leaf input dimensions and per-x data for the fixed grid.
  auto leaf_dim = [&](int v) {
    const int level = tree.vertex(v).level;
    return level == 0 ? d0 : net.layer(level).rows();
  };
  for (int v : leaves)
    require(leaf_dim(v) <= 64, ErrorCode::invalid_argument,
            "tree check supports leaf dimensions up to 64");
  struct XData {
    std::vector<Eigen::VectorXd> in_by_level;  // indexed by level
    Eigen::VectorXd base_out;
  };
  auto make_xdata = [&](const Eigen::VectorXd& x) {
    XData d;
    d.in_by_level.resize(static_cast<std::size_t>(net.depth()) + 1);
    for (int lvl = 0; lvl <= net.depth(); ++lvl) d.in_by_level[static_cast<std::size_t>(lvl)] = net.eval_prefix(x, lvl);
    d.base_out = d.in_by_level.back();
    return d;
  };
  std::vector<XData> grid_data;
  grid_data.reserve(x_grid.size());
  for (const auto& x : x_grid) grid_data.push_back(make_xdata(x));

  const rng::Source src_filters = rng.sub(0x617070726f70ULL);
  const rng::Source src_perturb = rng.sub(0x70657274ULL);
  const rng::Source src_x = rng.sub(0x78626c6cULL);

  const int jobs = std::max(1, params.jobs);
  std::vector<std::unique_ptr<TreeEvaluator>> evals;
  for (int t = 0; t < jobs; ++t) evals.push_back(std::make_unique<TreeEvaluator>(tree));

  // Single draw: one filter realization, sup over candidate inputs. The
  // center point In(x) is always tried; perturbed candidates place each leaf
  // at an independent sign-corner of its delta-sphere (the cheap boundary
  // points; Lipschitz maps attain their worst case on the boundary).
  auto draw_violates = [&](std::int64_t draw, TreeEvaluator& ev) -> bool {
    ev.sample_filters(src_filters, static_cast<std::uint64_t>(draw));
    auto try_x = [&](const XData& xd, std::uint64_t xlane) -> bool {
      for (int p = 0; p <= params.n_perturb_samples; ++p) {
        for (std::size_t li = 0; li < leaves.size(); ++li) {
          const int v = leaves[li];
          Eigen::VectorXd& slot = ev.leaf_input(v);
          slot = xd.in_by_level[static_cast<std::size_t>(tree.vertex(v).level)];
          if (p > 0) {
            const int d = leaf_dim(v);
            const std::uint64_t bits =
                rng::value(src_perturb, static_cast<std::uint64_t>(draw),
                           (xlane * 8 + static_cast<std::uint64_t>(p)) * leaves.size() + li);
            const double step = params.delta / std::sqrt(static_cast<double>(d));
            for (int k = 0; k < d; ++k)
              slot[k] += (bits >> k) & 1 ? step : -step;
          }
        }
        const Eigen::VectorXd& out = ev.eval_current();
        if ((out - xd.base_out).norm() > params.eps / 2.0) return true;
      }
      return false;
    };
    for (std::size_t g = 0; g < grid_data.size(); ++g)
      if (try_x(grid_data[g], g)) return true;
    for (int s = 0; s < params.n_x_samples; ++s) {
      Eigen::VectorXd x(d0);
      for (int k = 0; k < d0; ++k)
        x[k] = rng::normal(src_x, static_cast<std::uint64_t>(draw),
                           static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(d0) +
                               static_cast<std::uint64_t>(k) + 1);
      const double nrm = x.norm();
      const double radius =
          radii.R * std::pow(rng::unit(src_x, static_cast<std::uint64_t>(draw),
                                       0x52000000ULL + static_cast<std::uint64_t>(s)),
                             1.0 / d0);
      x = nrm > 0.0 ? Eigen::VectorXd(radius / nrm * x) : Eigen::VectorXd::Zero(d0);
      if (try_x(make_xdata(x), 0x40 + static_cast<std::uint64_t>(s))) return true;
    }
    return false;
  };

  AppropResult res;
  res.threshold = threshold;
  std::int64_t done = 0;
  std::int64_t violations = 0;
  // Fixed block size: the early-abort boundary (and with it every reported
  // count) must not depend on the worker count.
  const std::int64_t block = 2048;
  while (done < n) {
    const std::int64_t count = std::min(block, n - done);
    std::vector<std::uint8_t> flag(static_cast<std::size_t>(count), 0);
    if (jobs == 1) {
      for (std::int64_t i = 0; i < count; ++i)
        flag[static_cast<std::size_t>(i)] = draw_violates(done + i, *evals[0]) ? 1 : 0;
    } else {
      std::vector<std::thread> threads;
      const std::int64_t chunk = (count + jobs - 1) / jobs;
      for (int t = 0; t < jobs; ++t) {
        const std::int64_t b = t * chunk, e = std::min(count, b + chunk);
        if (b >= e) break;
        threads.emplace_back([&, b, e, t] {
          for (std::int64_t i = b; i < e; ++i)
            flag[static_cast<std::size_t>(i)] = draw_violates(done + i, *evals[static_cast<std::size_t>(t)]) ? 1 : 0;
        });
      }
      for (auto& th : threads) th.join();
    }
    for (std::int64_t i = 0; i < count; ++i) violations += flag[static_cast<std::size_t>(i)];
    done += count;
    if (violations > abort_above) {  // cannot pass anymore
      res.aborted_early = done < n;
      break;
    }
  }
  res.violations = violations;
  res.samples = done;
  res.estimate = static_cast<double>(violations) / static_cast<double>(done);
  res.wilson_upper = wilson_interval(violations, done, params.confidence).hi;
  res.pass = !res.aborted_early && res.wilson_upper < threshold;
  return res;
}

DropoutTree grow_full_tree(const Network& base, const RadiiTable& radii, double eps, double q,
                           const GrowthPolicy& policy, rng::Source rng, GrowthLog* log) {
  require(base.depth() >= 2, ErrorCode::invalid_argument, "tree growth needs L >= 2");
  require(policy.keep_prob >= radii.beta, ErrorCode::invalid_argument,
          "tree filter keep probability below the beta floor");
  DropoutTree tree(base);
  double delta = policy.delta0 > 0.0 ? policy.delta0 : eps / 4.0;
  int round = 0;
  while (!tree.full()) {
    const int k = tree.max_leaf_level();
    delta /= 2.0;
    const FilterModel mu =
        matrix_bernoulli(base.layer(k).rows(), base.layer(k).cols(), policy.keep_prob);
    GrowthRound entry;
    entry.level = k;
    entry.delta = delta;
    bool grown = false;
    for (int copies = policy.initial_copy_size; copies <= policy.copy_size_cap; copies *= 2) {
      DropoutTree candidate = tree;
      for (int leaf : candidate.leaves())
        if (candidate.vertex(leaf).level == k) candidate.input_copy(leaf, mu, copies);
      AppropParams ap = policy.approp;
      ap.delta = delta;
      ap.eps = eps;
      ap.q = q;
      const AppropResult check =
          check_approp(candidate, radii, ap,
                       rng.sub(0x67726f77ULL + static_cast<std::uint64_t>(round)).sub(
                           static_cast<std::uint64_t>(copies)));
      if (check.pass) {
        entry.copy_size = copies;
        entry.check = check;
        tree = std::move(candidate);
        grown = true;
        break;
      }
      entry.rejected_sizes.push_back(copies);
    }
    if (!grown)
      throw_budget("grow_full_tree: copy size cap " + std::to_string(policy.copy_size_cap) +
                   " reached at level " + std::to_string(k) + " without passing the tree check");
    if (log) log->rounds.push_back(std::move(entry));
    ++round;
  }
  return tree;
}

}  // namespace dropnet
