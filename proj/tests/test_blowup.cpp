#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "dropnet/blowup.hpp"
#include "dropnet/error.hpp"

using namespace dropnet;

namespace {

Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }

// zeta(x) = relu(x - 1) as a two-layer network with unit output weight.
Network example6_net(Activation act = Activation::relu()) {
  Layer l1{Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Constant(1, -1.0), act};
  Layer l2{Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Zero(1), Activation::identity()};
  return Network({l1, l2});
}

BlowupNetwork example6_blowup(std::uint64_t m, Activation act = Activation::relu()) {
  const Network net = example6_net(act);
  const FilterModel model = dropconnect_model(net, 0.5);
  const Eigen::VectorXd drop = Eigen::VectorXd::Ones(model.block_count()) - model.block_keep();
  const CoefficientTable table = coeffs_closed_form(drop, model.blocks());
  return BlowupNetwork(net, table, SubsetModels(model), m);
}

BlowupNetwork unit_mass_blowup(const Network& net, std::uint64_t m) {
  // Deterministic all-on filters: blocks collapse to one, a_full = 1.
  const FilterModel model = dropconnect_model(net, 0.0);
  const Eigen::VectorXd drop = Eigen::VectorXd::Zero(model.block_count());
  const CoefficientTable table = coeffs_closed_form(drop, model.blocks());
  return BlowupNetwork(net, table, SubsetModels(model), m);
}

}  // namespace

TEST_CASE("unit-mass model: sample_eval equals the base network exactly") {
  rng::Sequence seq(rng::Source{2, 0});
  Layer l1{(Eigen::MatrixXd(2, 1) << 0.7, -0.3).finished(), (Eigen::VectorXd(2) << 0.1, 0.2).finished(),
           Activation::tanh()};
  Layer l2{(Eigen::MatrixXd(1, 2) << 1.0, 0.5).finished(), Eigen::VectorXd::Zero(1),
           Activation::identity()};
  const Network net({l1, l2});
  for (std::uint64_t m : {1ull, 7ull, 32ull}) {
    const BlowupNetwork bn = unit_mass_blowup(net, m);
    for (int i = 0; i < 10; ++i) {
      const Eigen::VectorXd x = vec1(seq.uniform(-2, 2));
      CHECK(bn.sample_eval(x, rng::Source{10, 1}, static_cast<std::uint64_t>(i))[0] ==
            doctest::Approx(net.eval(x)[0]).epsilon(1e-15));
    }
  }
}

TEST_CASE("example 6: single-copy expectation at x = 2 is relu(1) = 1") {
  const BlowupNetwork bn = example6_blowup(1);
  CHECK(bn.mean_eval(vec1(2.0))[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mean_eval equals the base network on a grid") {
  const BlowupNetwork bn = example6_blowup(4);
  for (double x = 0.0; x <= 4.0; x += 0.25)
    CHECK(bn.mean_eval(vec1(x))[0] == doctest::Approx(bn.base().eval(vec1(x))[0]).epsilon(1e-12));
}

TEST_CASE("mean_eval of a zero-weight base is the bias image regardless of model") {
  Layer l{Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Constant(1, 0.4), Activation::identity()};
  const Network net({l});
  const FilterModel model = dropconnect_model(net, 0.7);
  const Eigen::VectorXd drop = Eigen::VectorXd::Ones(model.block_count()) - model.block_keep();
  const BlowupNetwork bn(net, coeffs_closed_form(drop, model.blocks()), SubsetModels(model), 2);
  CHECK(bn.mean_eval(vec1(3.0))[0] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("corrupted table is caught by the mean_eval regression guard") {
  const Network net = example6_net();
  const FilterModel model = dropconnect_model(net, 0.5);
  const Eigen::VectorXd drop = Eigen::VectorXd::Ones(model.block_count()) - model.block_keep();
  const CoefficientTable good = coeffs_closed_form(drop, model.blocks());
  std::vector<double> corrupted = good.values();
  corrupted[good.subset_count() - 1] += 0.25;
  const BlowupNetwork bn(net, CoefficientTable(corrupted, good.blocks()), SubsetModels(model), 1);
  // The corrupted coefficient shifts the expectation by 0.25 E_full(2) = 1/16.
  const double mismatch = std::abs(bn.mean_eval(vec1(2.0))[0] - net.eval(vec1(2.0))[0]);
  CHECK(mismatch == doctest::Approx(0.0625).epsilon(1e-9));
}

TEST_CASE("avg-filt on example 6 reproduces 2 relu(x/2 - 1)") {
  const BlowupNetwork bn = example6_blowup(16);
  SUBCASE("x = 4: value 2 while the base gives 3") {
    CHECK(bn.avg_filter_eval(vec1(4.0))[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(bn.base().eval(vec1(4.0))[0] == doctest::Approx(3.0));
  }
  SUBCASE("matches the closed form on the interval") {
    for (double x = 0.0; x <= 4.0; x += 0.125) {
      const double expect = 2.0 * std::max(0.0, x / 2.0 - 1.0);
      CHECK(bn.avg_filter_eval(vec1(x))[0] == doctest::Approx(expect).epsilon(1e-14));
    }
  }
}

TEST_CASE("avg-filt with the unit-mass model equals the base") {
  const Network net = example6_net();
  const BlowupNetwork bn = unit_mass_blowup(net, 3);
  for (double x = -1.0; x <= 4.0; x += 0.5)
    CHECK(bn.avg_filter_eval(vec1(x))[0] == doctest::Approx(net.eval(vec1(x))[0]).epsilon(1e-15));
}

TEST_CASE("identity-activation base: avg-filt is exact (affine case), cross-checked by enumeration") {
  const BlowupNetwork bn = example6_blowup(8, Activation::identity());
  for (double x = 0.0; x <= 4.0; x += 0.5) {
    const double base = bn.base().eval(vec1(x))[0];
    CHECK(bn.avg_filter_eval(vec1(x))[0] == doctest::Approx(base).epsilon(1e-12));
    CHECK(bn.mean_eval(vec1(x))[0] == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("unbiasedness: seeded sample mean approaches mean_eval") {
  const BlowupNetwork bn = example6_blowup(4);
  const Eigen::VectorXd x = vec1(3.0);
  const int n = 10000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = bn.sample_eval(x, rng::Source{77, 3}, static_cast<std::uint64_t>(i))[0];
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sumsq / n - mean * mean);
  CHECK(std::abs(mean - bn.mean_eval(x)[0]) < 4.0 * sd / 100.0);
}

TEST_CASE("sample variance shrinks like 1/M") {
  const Eigen::VectorXd x = vec1(2.0);
  const int runs = 160;
  std::vector<double> log_m, log_var;
  for (std::uint64_t m : {16ull, 64ull, 256ull, 1024ull}) {
    const BlowupNetwork bn = example6_blowup(m);
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < runs; ++i) {
      const double v = bn.sample_eval(x, rng::Source{5, m}, static_cast<std::uint64_t>(i))[0];
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / runs;
    log_m.push_back(std::log(static_cast<double>(m)));
    log_var.push_back(std::log(sumsq / runs - mean * mean));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < log_m.size(); ++i) {
    sx += log_m[i];
    sy += log_var[i];
    sxx += log_m[i] * log_m[i];
    sxy += log_m[i] * log_var[i];
  }
  const double n = static_cast<double>(log_m.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope == doctest::Approx(-1.0).epsilon(0.2));
}

TEST_CASE("expectation-variance split: independent MSE estimate matches bias^2 + variance") {
  const BlowupNetwork bn = example6_blowup(8);
  const double zeta_x = 1.0;  // relu(2 - 1)
  const Eigen::VectorXd x = vec1(2.0);
  const int n = 4000;
  // Two disjoint seeded sample sets.
  double mse = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = bn.sample_eval(x, rng::Source{100, 1}, static_cast<std::uint64_t>(i))[0];
    mse += (v - zeta_x) * (v - zeta_x);
  }
  mse /= n;
  double sum = 0.0, sumsq = 0.0, m4 = 0.0;
  std::vector<double> vals(n);
  for (int i = 0; i < n; ++i) {
    const double v = bn.sample_eval(x, rng::Source{100, 2}, static_cast<std::uint64_t>(i))[0];
    vals[static_cast<std::size_t>(i)] = v;
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  const double bias2 = (mean - zeta_x) * (mean - zeta_x);
  for (double v : vals) m4 += std::pow((v - zeta_x) * (v - zeta_x) - mse, 2.0);
  const double se_mse = std::sqrt(m4 / n / n);
  CHECK(std::abs(mse - (bias2 + var)) < 3.0 * std::max(se_mse, 1e-6) + 0.05 * mse);
}

TEST_CASE("monotone reliability: exceedance probability non-increasing in M up to CI overlap") {
  Box box{vec1(0.0), vec1(4.0)};
  const auto grid = uniform_grid(box, 33);
  const double eps = 0.35;
  const int runs = 120;
  std::vector<WilsonInterval> cis;
  std::vector<double> estimates;
  for (std::uint64_t m : {16ull, 64ull, 256ull, 1024ull}) {
    const BlowupNetwork bn = example6_blowup(m);
    Eigen::VectorXd base_values(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t g = 0; g < grid.size(); ++g)
      base_values[static_cast<Eigen::Index>(g)] = bn.base().eval(grid[g])[0];
    std::int64_t exceed = 0;
    for (int i = 0; i < runs; ++i) {
      const Eigen::MatrixXd v = bn.sample_eval_grid(grid, rng::Source{9, m}, static_cast<std::uint64_t>(i));
      if ((v.col(0) - base_values).cwiseAbs().maxCoeff() > eps) ++exceed;
    }
    estimates.push_back(static_cast<double>(exceed) / runs);
    cis.push_back(wilson_interval(exceed, runs, 0.95));
  }
  for (std::size_t i = 0; i + 1 < estimates.size(); ++i)
    CHECK(estimates[i + 1] <= cis[i].hi + 1e-12);
}

TEST_CASE("certify_blowup") {
  CertifyConfig cc;
  cc.fit.dims = {1, 2, 1};
  cc.fit.activations = {Activation::sigmoid(), Activation::identity()};
  cc.fit.budget = 40;
  cc.fit.grid_points = 65;
  cc.runs = 64;
  cc.grid_points = 65;

  SUBCASE("unit-mass model: M = 1 suffices") {
    TargetFunction t;
    t.domain = Box{vec1(-1.0), vec1(1.0)};
    t.f = [](const Eigen::VectorXd& x) { return 0.3 * x[0]; };
    const CertifiedBlowup res = certify_blowup(
        t, 0.1, [](const Network& n) { return dropconnect_model(n, 0.0); }, cc, rng::Source{3, 0});
    CHECK(res.blowup.copies() == 1);
    CHECK(res.report.exceedance->estimate == 0.0);
  }
  SUBCASE("representable network target certifies eps = 0.1 with M <= 4096") {
    Layer l1{(Eigen::MatrixXd(2, 1) << 0.9, -1.1).finished(),
             (Eigen::VectorXd(2) << 0.2, -0.3).finished(), Activation::sigmoid()};
    Layer l2{(Eigen::MatrixXd(1, 2) << 0.3, -0.25).finished(), Eigen::VectorXd::Zero(1),
             Activation::identity()};
    auto target_net = std::make_shared<Network>(Network({l1, l2}));
    TargetFunction t;
    t.domain = Box{vec1(-3.0), vec1(3.0)};
    t.f = [target_net](const Eigen::VectorXd& x) { return target_net->eval(x)[0]; };
    CertifyConfig rich = cc;
    rich.fit.budget = 150;
    rich.fit.restarts = 8;
    rich.runs = 100;
    const CertifiedBlowup res = certify_blowup(
        t, 0.1, [](const Network& n) { return dropconnect_model(n, 0.5, {1}); }, rich,
        rng::Source{12, 0});
    CHECK(res.fit.sup_error < 0.05);
    CHECK(res.blowup.copies() <= 4096);
    CHECK(res.report.exceedance->ci.hi < 0.1);
  }
  SUBCASE("step target is unreachable: base-fit-failed") {
    TargetFunction t;
    t.domain = Box{vec1(-1.0), vec1(1.0)};
    t.f = [](const Eigen::VectorXd& x) { return x[0] >= 0.0 ? 1.0 : 0.0; };
    CertifyConfig tight = cc;
    tight.fit.budget = 10;
    tight.fit.restarts = 1;
    try {
      certify_blowup(
          t, 0.05, [](const Network& n) { return dropconnect_model(n, 0.5, {1}); }, tight,
          rng::Source{4, 0});
      FAIL("expected base-fit-failed");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::budget_exceeded);
      CHECK(std::string(e.what()).find("base-fit-failed") != std::string::npos);
    }
  }
  SUBCASE("tiny M cap triggers budget-exceeded") {
    TargetFunction t;
    t.domain = Box{vec1(-1.0), vec1(1.0)};
    t.f = [](const Eigen::VectorXd& x) { return std::tanh(2.0 * x[0]); };
    CertifyConfig capped = cc;
    capped.fit.dims = {1, 6, 1};
    capped.fit.activations = {Activation::tanh(), Activation::identity()};
    capped.fit.budget = 80;
    capped.copies_cap = 2;
    try {
      certify_blowup(
          t, 0.02, [](const Network& n) { return dropconnect_model(n, 0.5, {1}); }, capped,
          rng::Source{6, 0});
      FAIL("expected budget-exceeded");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::budget_exceeded);
    }
  }
}
