#include "dropnet/precompose.hpp"

#include <cmath>
#include <optional>

#include "dropnet/error.hpp"

namespace dropnet {

Precomposition Precomposition::make(const Network& base, Activation sigma0, double alpha,
                                    int copy_pairs, FilterModel mu, FilterModel nu) {
  require(alpha > 0.0, ErrorCode::invalid_argument, "alpha must be positive");
  require(copy_pairs >= 1, ErrorCode::invalid_argument, "need at least one copy pair");
  require(sigma0.admissible_as_zeroth(), ErrorCode::invalid_argument,
          "inadmissible zeroth activation: sigma0(0) != 0");
  const double s = sigma0.sigma_minus() + sigma0.sigma_plus();
  require(s != 0.0, ErrorCode::invalid_argument,
          "inadmissible zeroth activation: sigma_- + sigma_+ = 0");

  const Layer& l1 = base.layer(1);
  require(mu.size() == l1.rows() * l1.cols(), ErrorCode::shape_mismatch,
          "mu must be shaped like the first weight matrix");
  require(nu.size() == l1.cols(), ErrorCode::shape_mismatch,
          "nu must be a diagonal filter over the input dimension");

  Precomposition p;
  p.alpha_ = alpha;
  p.copy_pairs_ = copy_pairs;
  p.sigma0_ = sigma0;
  p.mu_ = std::move(mu);
  p.nu_ = std::move(nu);
  p.f_mean_ = p.mu_.expectation();
  p.g_mean_ = p.nu_.expectation();
  p.w1_ = l1.weight;
  p.b1_ = l1.bias;
  p.sigma1_ = l1.activation;
  p.v_ = Eigen::MatrixXd(l1.rows(), l1.cols());
  for (int r = 0; r < l1.rows(); ++r)
    for (int c = 0; c < l1.cols(); ++c)
      p.v_(r, c) = l1.weight(r, c) / (alpha * s * p.f_mean_[r * l1.cols() + c] * p.g_mean_[c]);
  return p;
}

Precomposition Precomposition::exact_first_layer(const Network& base) {
  const Layer& l1 = base.layer(1);
  return make(base, Activation::identity(), 1e-2, 1,
              FilterModel::unit_mass_ones(l1.rows() * l1.cols()),
              FilterModel::unit_mass_ones(l1.cols()));
}

Precomposition Precomposition::with_alpha(double alpha) const {
  Precomposition p = *this;
  const double s = sigma0_.sigma_minus() + sigma0_.sigma_plus();
  p.alpha_ = alpha;
  for (int r = 0; r < p.v_.rows(); ++r)
    for (int c = 0; c < p.v_.cols(); ++c)
      p.v_(r, c) = p.w1_(r, c) / (alpha * s * p.f_mean_[r * p.v_.cols() + c] * p.g_mean_[c]);
  return p;
}

Precomposition Precomposition::with_copy_pairs(int n) const {
  Precomposition p = *this;
  require(n >= 1, ErrorCode::invalid_argument, "need at least one copy pair");
  p.copy_pairs_ = n;
  return p;
}

Eigen::VectorXd Precomposition::eval(const Eigen::VectorXd& x, EvalMode mode,
                                     const rng::Source& leaf_rng, std::uint64_t draw) const {
  const int d1 = static_cast<int>(v_.rows());
  const int d0 = static_cast<int>(v_.cols());
  require(x.size() == d0, ErrorCode::shape_mismatch, "input length != first-layer input dim");

  Eigen::VectorXd z = Eigen::VectorXd::Zero(d1);
  if (mode == EvalMode::avg_filt) {
    // (1/N) sum (-1)^i (V o EF) sigma0((-1)^i alpha EG x) collapses to one
    // sign pair.
    Eigen::VectorXd up(d0), down(d0);
    for (int c = 0; c < d0; ++c) {
      const double scaled = alpha_ * g_mean_[c] * x[c];
      up[c] = sigma0_(scaled);
      down[c] = sigma0_(-scaled);
    }
    for (int r = 0; r < d1; ++r) {
      double acc = 0.0;
      for (int c = 0; c < d0; ++c)
        acc += v_(r, c) * f_mean_[r * d0 + c] * (up[c] - down[c]);
      z[r] = acc;
    }
  } else {
    const rng::Source f_src = leaf_rng.sub(0x707265fULL);
    const rng::Source g_src = leaf_rng.sub(0x70726567ULL);
    Eigen::VectorXd u(d0);
    for (int i = 1; i <= 2 * copy_pairs_; ++i) {
      const double sign = (i % 2 == 0) ? 1.0 : -1.0;
      const std::uint32_t gpat = nu_.sample_pattern(g_src.sub(static_cast<std::uint64_t>(i)), draw);
      for (int c = 0; c < d0; ++c) {
        const double g = (gpat & (1u << nu_.entry_block(c))) ? 1.0 : 0.0;
        u[c] = sigma0_(sign * alpha_ * g * x[c]);
      }
      const std::uint32_t fpat = mu_.sample_pattern(f_src.sub(static_cast<std::uint64_t>(i)), draw);
      for (int r = 0; r < d1; ++r) {
        double acc = 0.0;
        for (int c = 0; c < d0; ++c) {
          const int block = mu_.entry_block(r * d0 + c);
          if (fpat & (1u << block)) acc += v_(r, c) * u[c];
        }
        z[r] += sign * acc;
      }
    }
    z /= static_cast<double>(copy_pairs_);
  }

  z += b1_;
  for (int r = 0; r < d1; ++r) z[r] = sigma1_(z[r]);
  return z;
}

bool q_condition_ok(const Activation& sigma0, double Q) {
  const double s = sigma0.sigma_minus() + sigma0.sigma_plus();
  require(s != 0.0, ErrorCode::invalid_argument,
          "inadmissible zeroth activation: sigma_- + sigma_+ = 0");
  return 4.0 * (std::abs(sigma0.sigma_minus()) + std::abs(sigma0.sigma_plus())) / std::abs(s) < Q;
}

Eigen::VectorXd nn_eval(const DropoutTree& tree, const Precomposition& pre,
                        const Eigen::VectorXd& x, EvalMode mode, const rng::Source& rng,
                        std::uint64_t draw, TreeEvaluator* evaluator, RadiiRecorder* recorder) {
  require(tree.full(), ErrorCode::invalid_argument, "nn_eval needs a full dropout-tree");
  std::optional<TreeEvaluator> local;
  if (!evaluator) local.emplace(tree);
  TreeEvaluator& ev = evaluator ? *evaluator : *local;
  for (int v : tree.leaves())
    ev.leaf_input(v) = pre.eval(x, mode, rng.sub(tree.vertex(v).path), draw);
  if (mode == EvalMode::sampled)
    ev.sample_filters(rng.sub(0x74726565ULL), draw);
  else
    ev.use_mean_filters();
  return ev.eval_current(recorder);
}

}  // namespace dropnet
