#include "dropnet/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dropnet/error.hpp"

namespace dropnet {
namespace {

struct HiddenStack {
  std::vector<Layer> layers;  // layers 1..L-1

  Eigen::MatrixXd features(const std::vector<Eigen::VectorXd>& grid) const {
    const int n = static_cast<int>(grid.size());
    const int h = layers.empty() ? static_cast<int>(grid.front().size()) : layers.back().rows();
    Eigen::MatrixXd phi(n, h + 1);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd v = grid[static_cast<std::size_t>(i)];
      for (const Layer& l : layers) {
        Eigen::VectorXd z = l.weight * v + l.bias;
        for (int r = 0; r < z.size(); ++r) z[r] = l.activation(z[r]);
        v = std::move(z);
      }
      phi.row(i).head(h) = v.transpose();
      phi(i, h) = 1.0;
    }
    return phi;
  }

  double* param(int flat_index) {
    int k = flat_index;
    for (Layer& l : layers) {
      const int nw = l.rows() * l.cols();
      if (k < nw) return &l.weight(k / l.cols(), k % l.cols());
      k -= nw;
      if (k < l.rows()) return &l.bias(k);
      k -= l.rows();
    }
    return nullptr;
  }

  int param_count() const {
    int n = 0;
    for (const Layer& l : layers) n += l.rows() * l.cols() + l.rows();
    return n;
  }
};

// Solves the identity-activation output layer by ridge least squares and
// returns the sup error on the grid.
double solve_output(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& targets, double ridge,
                    Eigen::MatrixXd* coefs) {
  Eigen::MatrixXd gram = phi.transpose() * phi;
  gram.diagonal().array() += ridge;
  *coefs = gram.ldlt().solve(phi.transpose() * targets);
  return (phi * *coefs - targets).cwiseAbs().maxCoeff();
}

}  // namespace

FitResult fit_base_network(const TargetFunction& target, const FitConfig& config, rng::Source rng) {
  const std::size_t L = config.dims.size() - 1;
  require(config.dims.size() >= 2, ErrorCode::invalid_argument, "fit needs at least one layer");
  require(config.activations.size() == L, ErrorCode::invalid_argument,
          "need one activation per layer");
  require(config.activations.back().kind == ActivationKind::identity, ErrorCode::invalid_argument,
          "fitter requires an identity output activation");
  require(config.dims.front() == target.domain.dim(), ErrorCode::shape_mismatch,
          "architecture input dim != target domain dim");

  const std::vector<Eigen::VectorXd> grid = uniform_grid(target.domain, config.grid_points);
  const int n = static_cast<int>(grid.size());
  const int dout = config.dims.back();
  Eigen::MatrixXd targets(n, dout);
  for (int i = 0; i < n; ++i) {
    const double y = target.f(grid[static_cast<std::size_t>(i)]);
    require(std::isfinite(y), ErrorCode::invalid_argument, "target not finite on the domain grid");
    targets.row(i).setConstant(y);
  }
  require(dout == 1, ErrorCode::invalid_argument, "fitter targets scalar outputs");

  // Restarts cycle through a few init scales around the configured one.
  auto random_hidden = [&](int restart) {
    HiddenStack h;
    rng::Sequence seq(rng.sub(0x66697430ULL + static_cast<std::uint64_t>(restart)));
    static constexpr double kScaleCycle[4] = {1.0, 1.5, 0.5, 2.0};
    const double scale = config.init_scale * kScaleCycle[restart % 4];
    for (std::size_t j = 0; j + 1 < L; ++j) {
      Layer l;
      l.weight = Eigen::MatrixXd::Zero(config.dims[j + 1], config.dims[j]);
      l.bias = Eigen::VectorXd::Zero(config.dims[j + 1]);
      l.activation = config.activations[j];
      for (int r = 0; r < l.rows(); ++r) {
        for (int c = 0; c < l.cols(); ++c) l.weight(r, c) = seq.uniform(-scale, scale);
        l.bias(r) = seq.uniform(-scale, scale);
      }
      h.layers.push_back(std::move(l));
    }
    return h;
  };

  // Pattern search over hidden parameters with the output layer re-solved at
  // every probe.
  auto refine = [&](HiddenStack& hidden, double& err, Eigen::MatrixXd& coefs) {
    if (config.budget <= 0) return;
    double step = 0.25 * config.init_scale;
    const int np = hidden.param_count();
    for (int it = 0; it < config.budget && step > 1e-12; ++it) {
      bool improved = false;
      for (int p = 0; p < np; ++p) {
        double* slot = hidden.param(p);
        const double saved = *slot;
        for (const double delta : {step, -step}) {
          *slot = saved + delta;
          Eigen::MatrixXd probe_coefs;
          const double probe = solve_output(hidden.features(grid), targets, config.ridge, &probe_coefs);
          if (std::isfinite(probe) && probe < err) {
            err = probe;
            coefs = std::move(probe_coefs);
            improved = true;
            break;
          }
          *slot = saved;
        }
      }
      if (!improved) step *= 0.5;
    }
  };

  // For a single-layer architecture the fit is one linear solve.
  struct Candidate {
    HiddenStack hidden;
    Eigen::MatrixXd coefs;
    double err;
  };
  std::vector<Candidate> candidates;
  const int restarts = L == 1 ? 1 : std::max(1, config.restarts);
  for (int s = 0; s < restarts; ++s) {
    Candidate c;
    c.hidden = random_hidden(s);
    c.err = solve_output(c.hidden.features(grid), targets, config.ridge, &c.coefs);
    if (!std::isfinite(c.err)) throw_numeric("fit diverged: non-finite loss");
    candidates.push_back(std::move(c));
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.err < b.err; });
  const int refine_count = L == 1 ? 0 : std::min<int>(3, static_cast<int>(candidates.size()));
  for (int k = 0; k < refine_count; ++k)
    refine(candidates[static_cast<std::size_t>(k)].hidden, candidates[static_cast<std::size_t>(k)].err,
           candidates[static_cast<std::size_t>(k)].coefs);
  std::size_t best = 0;
  for (std::size_t k = 1; k < candidates.size(); ++k)
    if (candidates[k].err < candidates[best].err) best = k;
  HiddenStack best_hidden = std::move(candidates[best].hidden);
  Eigen::MatrixXd best_coefs = std::move(candidates[best].coefs);
  const double best_err = candidates[best].err;

  if (!std::isfinite(best_err)) throw_numeric("fit diverged: non-finite loss");

  std::vector<Layer> layers = best_hidden.layers;
  Layer out;
  const int h = L == 1 ? config.dims.front() : config.dims[L - 1];
  out.weight = Eigen::MatrixXd::Zero(dout, h);
  out.bias = Eigen::VectorXd::Zero(dout);
  out.activation = config.activations.back();
  for (int c = 0; c < h; ++c) out.weight(0, c) = best_coefs(c, 0);
  out.bias(0) = best_coefs(h, 0);
  layers.push_back(std::move(out));
  return FitResult{Network(std::move(layers)), best_err};
}

}  // namespace dropnet
