#include "dropnet/coefficients.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "dropnet/error.hpp"

namespace dropnet {

namespace {
constexpr double kSumTol = 1e-12;

std::vector<std::vector<int>> singleton_blocks(int r) {
  std::vector<std::vector<int>> blocks;
  blocks.reserve(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) blocks.push_back({i});
  return blocks;
}
}  // namespace

CoefficientTable::CoefficientTable(std::vector<double> values, std::vector<std::vector<int>> blocks)
    : values_(std::move(values)), blocks_(std::move(blocks)) {
  require(!values_.empty() && (values_.size() & (values_.size() - 1)) == 0,
          ErrorCode::invalid_argument, "coefficient table needs 2^r entries");
  r_ = 0;
  while ((static_cast<std::size_t>(1) << r_) < values_.size()) ++r_;
  require(static_cast<int>(blocks_.size()) == r_, ErrorCode::invalid_argument,
          "embedding needs one block per coefficient index");
}

const CoefficientTable& CoefficientTable::checked() const {
  require(std::abs(sum() - 1.0) <= kSumTol, ErrorCode::invalid_argument,
          "coefficients must sum to 1");
  return *this;
}

double CoefficientTable::sum() const {
  // Neumaier-compensated sum: entries alternate in sign and can be large,
  // while the invariant pins the total to 1 within 1e-12.
  double s = 0.0, comp = 0.0;
  for (double v : values_) {
    const double t = s + v;
    comp += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
    s = t;
  }
  return s + comp;
}

CoefficientTable coeffs_closed_form(const Eigen::VectorXd& drop_prob,
                                    std::vector<std::vector<int>> blocks) {
  const int r = static_cast<int>(drop_prob.size());
  require(r >= 1 && r <= 20, ErrorCode::invalid_argument, "closed form supports 1 <= r <= 20");
  for (int i = 0; i < r; ++i)
    require(drop_prob[i] >= 0.0 && drop_prob[i] < 1.0, ErrorCode::invalid_argument,
            "drop probability must lie in [0,1)");
  if (blocks.empty()) blocks = singleton_blocks(r);
  std::vector<double> a(static_cast<std::size_t>(1) << r);
  for (std::uint32_t v = 0; v < a.size(); ++v) {
    double prod = 1.0;
    for (int i = 0; i < r; ++i) {
      const double q = 1.0 - drop_prob[i];
      prod *= (v & (1u << i)) ? 1.0 / q : -drop_prob[i] / q;
    }
    a[v] = prod;
  }
  CoefficientTable t(std::move(a), std::move(blocks));
  t.checked();
  return t;
}

CoefficientTable coeffs_general(const SubsetModels& models) {
  const int r = models.block_count();
  require(r <= 20, ErrorCode::unsupported_model, "general coefficients need r <= 20 blocks");
  const std::uint32_t nsub = 1u << r;

  // span[V] is the representation of Psi(., w \odot 1_V) as a coefficient
  // vector over the expectation terms E_U. Induction on |V|:
  //   c_V * Psi(1_V) = E_V - sum_{T proper subset of V} P_V[on-set = T] span[T]
  // where c_V = P[on-set of f^V contains V] and P_V groups the support of f^V
  // by its intersection with V. span[V] is supported on subsets of V.
  std::vector<std::vector<double>> span(nsub);
  std::vector<std::uint32_t> order(nsub);
  for (std::uint32_t v = 0; v < nsub; ++v) order[v] = v;
  std::stable_sort(order.begin(), order.end(), [](std::uint32_t a, std::uint32_t b) {
    return std::popcount(a) < std::popcount(b);
  });

  for (std::uint32_t v : order) {
    const FilterModel& model = models.at(v);
    const double c_v = model.prob_on_superset(v);
    require(c_v > 0.0, ErrorCode::invalid_argument,
            "P[f^U = all-ones] must be positive for every subset");
    std::vector<double> coeffs(nsub, 0.0);
    coeffs[v] = 1.0;  // the E_V term
    if (v != 0) {
      // Group support outcomes by their intersection with V.
      std::vector<double> mass(nsub, 0.0);
      for (const auto& [pattern, prob] : model.support()) mass[pattern & v] += prob;
      for (std::uint32_t t = 0; t < nsub; ++t) {
        if (t == v || mass[t] == 0.0 || (t & v) != t) continue;
        const double w = mass[t];
        const std::vector<double>& sub = span[t];
        for (std::uint32_t u = 0; u < nsub; ++u)
          if (sub[u] != 0.0) coeffs[u] -= w * sub[u];
      }
    }
    for (double& c : coeffs) c /= c_v;
    span[v] = std::move(coeffs);
  }

  CoefficientTable t(std::move(span[nsub - 1]), models.any().blocks());
  t.checked();
  return t;
}

double verify_decomposition(const Network& net, const CoefficientTable& table,
                            const SubsetModels& models,
                            const std::vector<Eigen::VectorXd>& x_grid) {
  const int r = table.block_count();
  require(r <= 12, ErrorCode::unsupported_model, "verification enumerates at most r <= 12 blocks");
  require(models.block_count() == r, ErrorCode::invalid_argument,
          "table and models disagree on block count");
  require(models.any().size() == net.param_count(), ErrorCode::shape_mismatch,
          "model length != network parameter count");
  require(models.any().blocks() == table.blocks(), ErrorCode::invalid_argument,
          "table and models disagree on the block partition");
  const std::uint32_t nsub = 1u << r;

  // sum_U a_U E[Psi((w o 1_U) o f^U)] = sum_T weight_T Psi(w o 1_T) with
  // weight_T = sum_U a_U P_U[on-set cap U = T].
  std::vector<double> weight(nsub, 0.0);
  for (std::uint32_t u = 0; u < nsub; ++u) {
    const double a_u = table.at(u);
    if (a_u == 0.0) continue;
    for (const auto& [pattern, prob] : models.at(u).support()) weight[pattern & u] += a_u * prob;
  }

  double residual = 0.0;
  std::vector<Network> masked;
  masked.reserve(nsub);
  const FilterModel& any = models.any();
  for (std::uint32_t t = 0; t < nsub; ++t) masked.push_back(net.apply_mask(any.lift_subset(t)));
  for (const Eigen::VectorXd& x : x_grid) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(net.output_dim());
    for (std::uint32_t t = 0; t < nsub; ++t)
      if (weight[t] != 0.0) acc += weight[t] * masked[t].eval(x);
    const double dev = (acc - net.eval(x)).cwiseAbs().maxCoeff();
    residual = std::max(residual, dev);
  }
  return residual;
}

double mu_identity_max_deviation(const Eigen::VectorXd& q) {
  const int r = static_cast<int>(q.size());
  require(r >= 1 && r <= 20, ErrorCode::invalid_argument, "mu identity supports 1 <= r <= 20");
  for (int i = 0; i < r; ++i)
    require(q[i] > 0.0 && q[i] <= 1.0, ErrorCode::invalid_argument,
            "success probabilities must lie in (0,1]");
  const std::uint32_t nsub = 1u << r;
  double worst = 0.0;
  for (std::uint32_t k = 0; k < nsub; ++k) {
    double mu = 0.0;
    for (std::uint32_t s = 0; s < nsub; ++s) {
      if ((s & k) != k) continue;  // need K subset of S
      // Per-index factor grouping keeps every partial product O(1).
      double term = 1.0;
      for (int i = 0; i < r; ++i) {
        const std::uint32_t bit = 1u << i;
        if (s & bit) {
          if (k & bit)
            term *= q[i] * (1.0 / q[i]);
          else
            term *= q[i] * (1.0 - 1.0 / q[i]);
        } else {
          term *= 1.0 - q[i];
        }
      }
      mu += term;
    }
    const double target = (k == nsub - 1) ? 1.0 : 0.0;
    worst = std::max(worst, std::abs(mu - target));
  }
  return worst;
}

}  // namespace dropnet
