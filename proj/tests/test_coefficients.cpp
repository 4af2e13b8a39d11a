#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dropnet/coefficients.hpp"
#include "dropnet/error.hpp"
#include "dropnet/json_io.hpp"

using namespace dropnet;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Random small network for decomposition checks.
Network random_net(rng::Sequence& seq, int d0, int d1, bool two_layers) {
  std::vector<Layer> layers;
  Layer l1;
  l1.weight = Eigen::MatrixXd(d1, d0);
  l1.bias = Eigen::VectorXd(d1);
  for (int r = 0; r < d1; ++r) {
    for (int c = 0; c < d0; ++c) l1.weight(r, c) = seq.uniform(-1.0, 1.0);
    l1.bias[r] = seq.uniform(-1.0, 1.0);
  }
  l1.activation = two_layers ? Activation::tanh() : Activation::identity();
  layers.push_back(std::move(l1));
  if (two_layers) {
    Layer l2;
    l2.weight = Eigen::MatrixXd(1, d1);
    l2.bias = Eigen::VectorXd(1);
    for (int c = 0; c < d1; ++c) l2.weight(0, c) = seq.uniform(-1.0, 1.0);
    l2.bias[0] = seq.uniform(-1.0, 1.0);
    l2.activation = Activation::identity();
    layers.push_back(std::move(l2));
  }
  return Network(std::move(layers));
}

std::vector<Eigen::VectorXd> grid1d(double lo, double hi, int points) {
  Box b{Eigen::VectorXd::Constant(1, lo), Eigen::VectorXd::Constant(1, hi)};
  return uniform_grid(b, points);
}

// Random partition of 0..n-1 into r blocks, each non-empty.
std::vector<std::vector<int>> random_partition(rng::Sequence& seq, int n, int r) {
  std::vector<std::vector<int>> blocks(static_cast<std::size_t>(r));
  for (int i = 0; i < n; ++i) {
    const int s = i < r ? i : static_cast<int>(seq.uniform(0, r - 1e-9));
    blocks[static_cast<std::size_t>(s)].push_back(i);
  }
  return blocks;
}

}  // namespace

TEST_CASE("closed form, r = 1, p = 0.5") {
  const CoefficientTable t = coeffs_closed_form(vec({0.5}));
  CHECK(t.at(0b1) == doctest::Approx(2.0));
  CHECK(t.at(0b0) == doctest::Approx(-1.0));
}

TEST_CASE("closed form, r = 2, p = (0.5, 0.5)") {
  const CoefficientTable t = coeffs_closed_form(vec({0.5, 0.5}));
  CHECK(t.at(0b11) == doctest::Approx(4.0));
  CHECK(t.at(0b01) == doctest::Approx(-2.0));
  CHECK(t.at(0b10) == doctest::Approx(-2.0));
  CHECK(t.at(0b00) == doctest::Approx(1.0));
}

TEST_CASE("closed form with p = 0 everywhere is the point mass on the full set") {
  for (int r : {1, 3, 5}) {
    const CoefficientTable t = coeffs_closed_form(Eigen::VectorXd::Zero(r));
    for (std::uint32_t v = 0; v < t.subset_count(); ++v)
      CHECK(t.at(v) == (v == t.subset_count() - 1 ? 1.0 : 0.0));
  }
}

TEST_CASE("closed form rejects p = 1") {
  CHECK_THROWS_AS(coeffs_closed_form(vec({0.2, 1.0})), Error);
}

TEST_CASE("general recursion matches the closed form for a single Bernoulli block") {
  for (double q : {0.3, 0.5, 0.8, 1.0}) {
    const FilterModel m = FilterModel::block_bernoulli(1, {{0}}, vec({q}));
    const CoefficientTable t = coeffs_general(SubsetModels(m));
    CHECK(t.at(1) == doctest::Approx(1.0 / q).epsilon(1e-12));
    CHECK(t.at(0) == doctest::Approx(-(1.0 - q) / q).epsilon(1e-12));
  }
}

TEST_CASE("general recursion on the fully correlated pair") {
  // P[11] = P[00] = 1/2; the coarsest block partition has one block, and the
  // identity collapses to 2 E[Psi(w o f)] - Psi(0) = Psi(w).
  const FilterModel m = FilterModel::explicit_pmf(2, {{{1, 1}, 0.5}, {{0, 0}, 0.5}});
  REQUIRE(m.block_count() == 1);
  const CoefficientTable t = coeffs_general(SubsetModels(m));
  CHECK(t.at(1) == doctest::Approx(2.0));
  CHECK(t.at(0) == doctest::Approx(-1.0));
}

TEST_CASE("general recursion with unit mass on all-ones") {
  const FilterModel m = FilterModel::explicit_pmf(3, {{{1, 1, 1}, 1.0}});
  const CoefficientTable t = coeffs_general(SubsetModels(m));
  for (std::uint32_t v = 0; v < t.subset_count(); ++v)
    CHECK(t.at(v) == (v == t.subset_count() - 1 ? 1.0 : 0.0));
}

TEST_CASE("general equals closed form for independent blocks, randomized") {
  rng::Sequence seq(rng::Source{31, 0});
  for (int trial = 0; trial < 25; ++trial) {
    const int r = 1 + static_cast<int>(seq.uniform(0, 4.999));
    Eigen::VectorXd p(r);
    for (int i = 0; i < r; ++i) p[i] = seq.uniform(0.0, 0.5);
    std::vector<std::vector<int>> blocks;
    for (int i = 0; i < r; ++i) blocks.push_back({i});
    const FilterModel m = FilterModel::block_bernoulli(r, blocks, Eigen::VectorXd::Ones(r) - p);
    const CoefficientTable closed = coeffs_closed_form(p, blocks);
    const CoefficientTable general = coeffs_general(SubsetModels(m));
    CHECK(std::abs(closed.sum() - 1.0) <= 1e-12);
    CHECK(std::abs(general.sum() - 1.0) <= 1e-12);
    for (std::uint32_t v = 0; v < closed.subset_count(); ++v)
      CHECK(std::abs(closed.at(v) - general.at(v)) < 1e-12);
  }
}

TEST_CASE("coefficients do not depend on any weight vector") {
  const FilterModel m = matrix_bernoulli(2, 1, 0.6);
  const CoefficientTable a = coeffs_general(SubsetModels(m));
  const CoefficientTable b = coeffs_general(SubsetModels(m));
  for (std::uint32_t v = 0; v < a.subset_count(); ++v) CHECK(a.at(v) == b.at(v));
}

TEST_CASE("verify_decomposition") {
  rng::Sequence seq(rng::Source{77, 0});
  const auto grid = grid1d(-1.0, 1.0, 33);

  SUBCASE("closed-form table with the matching block model has a tiny residual") {
    const Network net = random_net(seq, 1, 2, true);
    const FilterModel m = dropconnect_model(net, 0.4);
    const Eigen::VectorXd drop = Eigen::VectorXd::Ones(m.block_count()) - m.block_keep();
    const CoefficientTable t = coeffs_closed_form(drop, m.blocks());
    CHECK(verify_decomposition(net, t, SubsetModels(m), grid) < 1e-9);
  }
  SUBCASE("constant network: residual vanishes because the coefficients sum to 1") {
    Layer l{Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Constant(1, 0.9), Activation::identity()};
    const Network net({l});
    const FilterModel m = dropconnect_model(net, 0.3);
    const Eigen::VectorXd drop = Eigen::VectorXd::Ones(m.block_count()) - m.block_keep();
    const CoefficientTable t = coeffs_closed_form(drop, m.blocks());
    CHECK(verify_decomposition(net, t, SubsetModels(m), grid) < 1e-12);
  }
  SUBCASE("corrupting a low-order coefficient by 0.1 shifts a constant net's residual by 0.1|c|") {
    // Constant net: zero weight, bias 2. The bias-block-only subset evaluates
    // to the constant, so bumping its coefficient moves the sum by exactly
    // 0.1 * |const| (linearity).
    Layer l{Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Constant(1, 2.0), Activation::identity()};
    const Network net({l});
    const FilterModel m = dropconnect_model(net, 0.5);  // blocks: weight, bias(always on)
    const Eigen::VectorXd drop = Eigen::VectorXd::Ones(m.block_count()) - m.block_keep();
    const CoefficientTable good = coeffs_closed_form(drop, m.blocks());
    CHECK(verify_decomposition(net, good, SubsetModels(m), grid) < 1e-12);
    std::vector<double> corrupted = good.values();
    corrupted[0b10] += 0.1;  // {bias block} only
    const CoefficientTable bad(corrupted, good.blocks());
    CHECK_THROWS_AS(bad.checked(), Error);
    const double residual = verify_decomposition(net, bad, SubsetModels(m), grid);
    CHECK(residual == doctest::Approx(0.1 * 2.0).epsilon(1e-12));
  }
}

TEST_CASE("expectation decomposition holds for random nets, weights, and block models") {
  rng::Sequence seq(rng::Source{123, 0});
  for (int trial = 0; trial < 40; ++trial) {
    const bool two_layers = seq.unit() < 0.5;
    const Network net = two_layers ? random_net(seq, 1, 2, true) : random_net(seq, 2, 2, false);
    std::vector<Eigen::VectorXd> grid;
    for (const auto& x : grid1d(-1.0, 1.0, 17))
      grid.push_back(Eigen::VectorXd::Constant(net.input_dim(), x[0]));
    const int n = net.param_count();
    const int r = 1 + static_cast<int>(seq.uniform(0, 3.999));
    const auto blocks = random_partition(seq, n, std::min(r, n));
    Eigen::VectorXd keep(static_cast<Eigen::Index>(blocks.size()));
    for (Eigen::Index s = 0; s < keep.size(); ++s) keep[s] = seq.uniform(0.3, 0.9);
    const FilterModel m = FilterModel::block_bernoulli(n, blocks, keep);
    const CoefficientTable t = coeffs_general(SubsetModels(m));
    CHECK(verify_decomposition(net, t, SubsetModels(m), grid) < 1e-9);
  }
}

TEST_CASE("per-subset families: distinct enumerable models per subset still decompose") {
  rng::Sequence seq(rng::Source{321, 0});
  const auto grid = grid1d(-1.0, 1.0, 9);
  const Network net = random_net(seq, 1, 1, true);  // 4 parameters
  const int n = net.param_count();
  const auto blocks = random_partition(seq, n, 2);
  std::vector<FilterModel> models;
  for (std::uint32_t u = 0; u < 4; ++u) {
    Eigen::VectorXd keep(2);
    keep << seq.uniform(0.4, 0.9), seq.uniform(0.4, 0.9);
    models.push_back(FilterModel::block_bernoulli(n, blocks, keep));
  }
  const SubsetModels family(std::move(models));
  const CoefficientTable t = coeffs_general(family);
  CHECK(verify_decomposition(net, t, family, grid) < 1e-9);
}

TEST_CASE("mu identity") {
  SUBCASE("r = 2, q = (0.5, 0.5)") {
    CHECK(mu_identity_max_deviation(vec({0.5, 0.5})) < 1e-12);
  }
  SUBCASE("r = 1, q = 1 is exact") {
    CHECK(mu_identity_max_deviation(vec({1.0})) == 0.0);
  }
  SUBCASE("r = 6, random q in (0.1, 1)") {
    rng::Sequence seq(rng::Source{55, 0});
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd q(6);
      for (int i = 0; i < 6; ++i) q[i] = seq.uniform(0.1, 1.0);
      CHECK(mu_identity_max_deviation(q) < 1e-10);
    }
  }
  SUBCASE("q = 0 is invalid") {
    CHECK_THROWS_AS(mu_identity_max_deviation(vec({0.0, 0.5})), Error);
  }
}

TEST_CASE("figure-style restricted dropconnect has exactly four active subsets") {
  // One input, two hidden units, filters on the two input-side weights only:
  // every subset missing an always-on block gets coefficient zero, leaving
  // the four filtered combinations.
  Layer l1{Eigen::MatrixXd::Ones(2, 1), Eigen::VectorXd::Zero(2), Activation::sigmoid()};
  Layer l2{Eigen::MatrixXd::Ones(1, 2), Eigen::VectorXd::Zero(1), Activation::identity()};
  const Network net({l1, l2});
  const FilterModel m = dropconnect_model(net, 0.5, {1});
  const Eigen::VectorXd drop = Eigen::VectorXd::Ones(m.block_count()) - m.block_keep();
  const CoefficientTable t = coeffs_closed_form(drop, m.blocks());
  int nonzero = 0;
  for (std::uint32_t v = 0; v < t.subset_count(); ++v)
    if (t.at(v) != 0.0) ++nonzero;
  CHECK(nonzero == 4);
  CHECK(t.at(t.subset_count() - 1) == doctest::Approx(4.0));
}

TEST_CASE("coefficient table json round-trip") {
  const CoefficientTable t = coeffs_closed_form(vec({0.25, 0.5}));
  const CoefficientTable back = coeff_table_from_json(coeff_table_to_json(t), t.blocks());
  for (std::uint32_t v = 0; v < t.subset_count(); ++v) CHECK(back.at(v) == t.at(v));
}

TEST_CASE("checked() enforces the sum invariant") {
  CHECK_THROWS_AS(CoefficientTable({0.5, 0.6}, {{0}}).checked(), Error);
  CHECK_NOTHROW(CoefficientTable({0.4, 0.6}, {{0}}).checked());
}
