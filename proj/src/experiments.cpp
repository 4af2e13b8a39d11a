#include "dropnet/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <sstream>

#include "dropnet/blowup.hpp"
#include "dropnet/error.hpp"
#include "dropnet/parallel.hpp"
#include "dropnet/pipeline.hpp"

namespace dropnet {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& hash, std::uint64_t seed, const std::string& columns) {
    ss_ << "# config_hash=" << hash << " seed=" << seed << "\n" << columns << "\n";
  }
  std::ostringstream& line() { return ss_; }
  std::string str() const { return ss_.str(); }

 private:
  std::ostringstream ss_;
};

Box box_from_json(const json& j) {
  Box b;
  const auto lo = j.at("lo").get<std::vector<double>>();
  const auto hi = j.at("hi").get<std::vector<double>>();
  require(lo.size() == hi.size() && !lo.empty(), ErrorCode::invalid_argument,
          "grid lo/hi must have equal positive length");
  b.lo = Eigen::VectorXd(static_cast<Eigen::Index>(lo.size()));
  b.hi = Eigen::VectorXd(static_cast<Eigen::Index>(hi.size()));
  for (std::size_t i = 0; i < lo.size(); ++i) {
    b.lo[static_cast<Eigen::Index>(i)] = lo[i];
    b.hi[static_cast<Eigen::Index>(i)] = hi[i];
  }
  return b;
}

Network network_from_config(const json& config) {
  if (config.contains("network")) return network_from_json(config.at("network"));
  if (config.contains("network_path"))
    return network_from_json(json::parse(read_text_file(config.at("network_path").get<std::string>())));
  throw_invalid("config needs network or network_path");
}

FitConfig fit_config_from_json(const json& j) {
  FitConfig fc;
  const json& arch = j.at("arch");
  fc.dims = arch.at("dims").get<std::vector<int>>();
  for (const json& a : arch.at("activations")) fc.activations.push_back(activation_from_json(a));
  if (j.contains("budget")) fc.budget = j.at("budget").get<int>();
  if (j.contains("grid_points")) fc.grid_points = j.at("grid_points").get<int>();
  if (j.contains("restarts")) fc.restarts = j.at("restarts").get<int>();
  if (j.contains("init_scale")) fc.init_scale = j.at("init_scale").get<double>();
  if (j.contains("ridge")) fc.ridge = j.at("ridge").get<double>();
  return fc;
}

std::uint64_t resolve_seed(const json& config, std::optional<std::uint64_t> seed_override) {
  if (const char* env = std::getenv("DROPNET_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  if (seed_override) return *seed_override;
  require(config.contains("seed"), ErrorCode::invalid_argument, "config needs a seed");
  return config.at("seed").get<std::uint64_t>();
}

json base_report(const std::string& command, const json& config, std::uint64_t seed) {
  return json{{"command", command}, {"config_hash", config_hash(config)}, {"seed", seed}};
}

void write_report(const std::string& out_dir, const json& report) {
  write_text_file(out_dir + "/report.json", report.dump(2) + "\n");
}

// ---- decompose ------------------------------------------------------------

ExperimentOutcome run_decompose(const json& config, const std::string& out_dir, std::uint64_t seed,
                                int jobs) {
  (void)jobs;
  const Network net = network_from_config(config);
  const FilterModel model = filter_from_json_spec(config.at("filter"), net);
  require(model.enumerable() && model.block_count() <= 12, ErrorCode::invalid_argument,
          "decompose needs an enumerable model with r <= 12");
  const SubsetModels models(model);
  const CoefficientTable table = coeffs_general(models);

  json report = base_report("decompose", config, seed);
  if (model.independent_bernoulli()) {
    const Eigen::VectorXd drop = Eigen::VectorXd::Ones(model.block_count()) - model.block_keep();
    const CoefficientTable closed = coeffs_closed_form(drop, model.blocks());
    double diff = 0.0;
    for (std::uint32_t v = 0; v < table.subset_count(); ++v)
      diff = std::max(diff, std::abs(table.at(v) - closed.at(v)));
    report["closed_vs_general_max_diff"] = diff;
  }

  const json grid_spec = config.at("grid");
  const std::vector<Eigen::VectorXd> grid =
      uniform_grid(box_from_json(grid_spec), grid_spec.at("points").get<int>());
  const double residual = verify_decomposition(net, table, models, grid);

  json table_json = coeff_table_to_json(table);
  table_json["config_hash"] = config_hash(config);
  table_json["seed"] = seed;
  write_text_file(out_dir + "/coefficients.json", table_json.dump(2) + "\n");

  report["residual"] = residual;
  report["coefficient_sum"] = table.sum();
  report["block_count"] = table.block_count();
  report["grid_spec"] = grid_spec;
  const int exit_code = residual < 1e-9 ? 0 : 1;
  report["exit_code"] = exit_code;
  write_report(out_dir, report);
  return {exit_code, report};
}

// ---- mu-check ---------------------------------------------------------------

ExperimentOutcome run_mu_check(const json& config, const std::string& out_dir, std::uint64_t seed,
                               int jobs) {
  (void)jobs;
  const double tol = config.value("tol", 1e-10);
  std::vector<Eigen::VectorXd> qs;
  if (config.contains("q")) {
    const auto vals = config.at("q").get<std::vector<double>>();
    Eigen::VectorXd q(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) q[static_cast<Eigen::Index>(i)] = vals[i];
    qs.push_back(std::move(q));
  } else {
    const int r = config.at("r").get<int>();
    require(r >= 1 && r <= 10, ErrorCode::invalid_argument, "mu-check supports r <= 10");
    const int count = config.value("num_random", 100);
    const double qmin = config.value("q_min", 0.1);
    const double qmax = config.value("q_max", 1.0);
    require(qmin > 0.0 && qmax <= 1.0 && qmin < qmax, ErrorCode::invalid_argument,
            "q range must satisfy 0 < q_min < q_max <= 1");
    rng::Sequence seq(rng::Source{seed, 0x6d75ULL});
    for (int k = 0; k < count; ++k) {
      Eigen::VectorXd q(r);
      for (int i = 0; i < r; ++i) q[i] = seq.uniform(qmin, qmax);
      qs.push_back(std::move(q));
    }
  }
  double worst = 0.0;
  for (const auto& q : qs) worst = std::max(worst, mu_identity_max_deviation(q));
  json report = base_report("mu-check", config, seed);
  report["max_deviation"] = worst;
  report["vectors_checked"] = qs.size();
  report["tol"] = tol;
  const int exit_code = worst < tol ? 0 : 1;
  report["exit_code"] = exit_code;
  write_report(out_dir, report);
  return {exit_code, report};
}

// ---- fit --------------------------------------------------------------------

ExperimentOutcome run_fit(const json& config, const std::string& out_dir, std::uint64_t seed,
                          int jobs) {
  (void)jobs;
  const TargetFunction target = target_from_json(config.at("target"));
  const FitConfig fc = fit_config_from_json(config);
  const FitResult fit = fit_base_network(target, fc, rng::Source{seed, 0x666974ULL});

  json net_json = network_to_json(fit.net);
  net_json["config_hash"] = config_hash(config);
  net_json["seed"] = seed;
  write_text_file(out_dir + "/network.json", net_json.dump(2) + "\n");

  json report = base_report("fit", config, seed);
  report["sup_error"] = fit.sup_error;
  int exit_code = 0;
  if (config.contains("threshold")) {
    report["threshold"] = config.at("threshold").get<double>();
    if (!(fit.sup_error < config.at("threshold").get<double>())) exit_code = 3;
  }
  report["exit_code"] = exit_code;
  write_report(out_dir, report);
  return {exit_code, report};
}

// ---- blowup -----------------------------------------------------------------

struct BlowupSetup {
  Network net;
  FilterModel model;
  CoefficientTable table;
  std::optional<double> fit_error;
};

BlowupSetup blowup_setup(const json& config, std::uint64_t seed) {
  std::optional<double> fit_error;
  Network net = [&] {
    if (config.contains("fit")) {
      const json& fj = config.at("fit");
      FitResult fit = fit_base_network(target_from_json(fj.at("target")), fit_config_from_json(fj),
                                       rng::Source{seed, 0x666974ULL});
      fit_error = fit.sup_error;
      return fit.net;
    }
    return network_from_config(config);
  }();
  FilterModel model = filter_from_json_spec(config.at("filter"), net);
  require(model.independent_bernoulli(), ErrorCode::invalid_argument,
          "blowup needs an independent block model");
  require(model.block_count() <= 12, ErrorCode::invalid_argument, "blowup needs r <= 12");
  const Eigen::VectorXd drop = Eigen::VectorXd::Ones(model.block_count()) - model.block_keep();
  CoefficientTable table = coeffs_closed_form(drop, model.blocks());
  return BlowupSetup{std::move(net), std::move(model), std::move(table), fit_error};
}

ExperimentOutcome run_blowup(const json& config, const std::string& out_dir, std::uint64_t seed,
                             int jobs) {
  const std::string mode = config.value("mode", "sweep");
  json report = base_report("blowup", config, seed);

  if (mode == "certify") {
    const json& cj = config.at("certify");
    CertifyConfig cc;
    cc.fit = fit_config_from_json(config.at("fit"));
    cc.q = cj.value("q", 2.0);
    cc.runs = cj.value("runs", 200);
    cc.initial_copies = cj.value("initial_M", std::uint64_t{1});
    cc.copies_cap = cj.value("M_cap", std::uint64_t{1} << 16);
    cc.grid_points = cj.value("grid_points", 256);
    cc.jobs = jobs;
    const double eps = cj.at("eps").get<double>();
    const TargetFunction target = target_from_json(config.at("fit").at("target"));
    const json filter_spec = config.at("filter");
    CertifiedBlowup res = certify_blowup(
        target, eps, [&](const Network& n) { return filter_from_json_spec(filter_spec, n); }, cc,
        rng::Source{seed, 0x636f72ULL});
    // Per-run curves at the certified M; base_value is the fitted base net.
    const int curve_runs = cj.value("csv_runs", 20);
    const std::vector<Eigen::VectorXd> grid = uniform_grid(target.domain, cc.grid_points);
    CsvWriter csv(config_hash(config), seed, "M,x,run_id,value,base_value,abs_err");
    const rng::Source curves{seed, 0x6375ULL};
    for (int run = 0; run < curve_runs; ++run) {
      const Eigen::MatrixXd v =
          res.blowup.sample_eval_grid(grid, curves, static_cast<std::uint64_t>(run));
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const double b = res.fit.net.eval(grid[g])[0];
        const double val = v(static_cast<Eigen::Index>(g), 0);
        csv.line() << res.blowup.copies() << "," << fmt(grid[g][0]) << "," << run << ","
                   << fmt(val) << "," << fmt(b) << "," << fmt(std::abs(val - b)) << "\n";
      }
    }
    write_text_file(out_dir + "/runs.csv", csv.str());
    report["M"] = res.blowup.copies();
    report["tried_M"] = res.tried_copies;
    report["fit_sup_error"] = res.fit.sup_error;
    report["report"] = error_report_to_json(res.report);
    report["exit_code"] = 0;
    write_report(out_dir, report);
    return {0, report};
  }

  BlowupSetup setup = blowup_setup(config, seed);
  if (setup.fit_error) report["fit_sup_error"] = *setup.fit_error;
  const json grid_spec = config.at("grid");
  const std::vector<Eigen::VectorXd> grid =
      uniform_grid(box_from_json(grid_spec), grid_spec.at("points").get<int>());
  Eigen::VectorXd base_values(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t g = 0; g < grid.size(); ++g)
    base_values[static_cast<Eigen::Index>(g)] = setup.net.eval(grid[g])[0];

  const int runs = config.value("runs", 20);
  std::vector<std::uint64_t> m_list;
  if (mode == "sweep")
    for (const json& m : config.at("M_list")) m_list.push_back(m.get<std::uint64_t>());
  else
    m_list.push_back(config.at("M").get<std::uint64_t>());

  CsvWriter csv(config_hash(config), seed, "M,x,run_id,value,base_value,abs_err");
  json per_m = json::array();
  const rng::Source mc{seed, 0x626c6fULL};
  for (std::uint64_t m : m_list) {
    BlowupNetwork bn(setup.net, setup.table, SubsetModels(setup.model), m);
    std::vector<double> sups(static_cast<std::size_t>(runs), 0.0);
    std::vector<Eigen::MatrixXd> values(static_cast<std::size_t>(runs));
    parallel_for(runs, jobs, [&](std::int64_t run) {
      const Eigen::MatrixXd v = bn.sample_eval_grid(grid, mc.sub(m), static_cast<std::uint64_t>(run));
      sups[static_cast<std::size_t>(run)] = (v.col(0) - base_values).cwiseAbs().maxCoeff();
      values[static_cast<std::size_t>(run)] = v;
    });
    for (int run = 0; run < runs; ++run) {
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const double v = values[static_cast<std::size_t>(run)](static_cast<Eigen::Index>(g), 0);
        const double b = base_values[static_cast<Eigen::Index>(g)];
        csv.line() << m << "," << fmt(grid[g][0]) << "," << run << "," << fmt(v) << "," << fmt(b)
                   << "," << fmt(std::abs(v - b)) << "\n";
      }
    }
    double mean_sup = pairwise_sum(sups) / runs;
    double max_sup = *std::max_element(sups.begin(), sups.end());
    json entry{{"M", m}, {"mean_sup_error", mean_sup}, {"max_sup_error", max_sup}};
    if (config.contains("eps")) {
      const double eps = config.at("eps").get<double>();
      std::int64_t in_band = 0;
      for (double s : sups)
        if (s <= eps) ++in_band;
      entry["eps"] = eps;
      entry["runs_in_band"] = in_band;
      entry["runs"] = runs;
      const WilsonInterval ci =
          wilson_interval(static_cast<std::int64_t>(runs) - in_band, runs, 0.95);
      entry["exceed_wilson_hi"] = ci.hi;
    }
    per_m.push_back(std::move(entry));
  }
  write_text_file(out_dir + "/runs.csv", csv.str());
  report["per_M"] = per_m;

  int exit_code = 0;
  if (mode == "sweep" && m_list.size() >= 2) {
    // log-log regression of mean sup error against M.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const json& e : per_m) {
      const double x = std::log(static_cast<double>(e.at("M").get<std::uint64_t>()));
      const double y = std::log(e.at("mean_sup_error").get<double>());
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double n = static_cast<double>(per_m.size());
    report["loglog_slope"] = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  if (mode == "band") {
    const double frac = config.value("band_fraction", 0.75);
    const json& e = per_m.front();
    const bool ok = e.at("runs_in_band").get<double>() >= frac * runs;
    report["band_fraction_required"] = frac;
    exit_code = ok ? 0 : 1;
  }
  report["exit_code"] = exit_code;
  write_report(out_dir, report);
  return {exit_code, report};
}

// ---- counterexample ---------------------------------------------------------

ExperimentOutcome run_counterexample(const json& config, const std::string& out_dir,
                                     std::uint64_t seed, int jobs) {
  const Activation act = config.contains("activation")
                             ? activation_from_json(config.at("activation"))
                             : Activation::relu();
  // zeta(x) = sigma(x - 1) as a two-layer network with unit output weight.
  std::vector<Layer> layers(2);
  layers[0].weight = Eigen::MatrixXd::Constant(1, 1, 1.0);
  layers[0].bias = Eigen::VectorXd::Constant(1, -1.0);
  layers[0].activation = act;
  layers[1].weight = Eigen::MatrixXd::Constant(1, 1, 1.0);
  layers[1].bias = Eigen::VectorXd::Zero(1);
  layers[1].activation = Activation::identity();
  const Network net{std::move(layers)};

  const FilterModel model = dropconnect_model(net, 0.5);
  const Eigen::VectorXd drop = Eigen::VectorXd::Ones(model.block_count()) - model.block_keep();
  const CoefficientTable table = coeffs_closed_form(drop, model.blocks());
  const std::uint64_t m = config.value("M", std::uint64_t{4096});
  const BlowupNetwork bn(net, table, SubsetModels(model), m);

  json grid_spec = config.contains("grid")
                       ? config.at("grid")
                       : json{{"lo", {0.0}}, {"hi", {4.0}}, {"points", 512}};
  const std::vector<Eigen::VectorXd> grid =
      uniform_grid(box_from_json(grid_spec), grid_spec.at("points").get<int>());
  Eigen::VectorXd base_values(static_cast<Eigen::Index>(grid.size()));
  Eigen::VectorXd avg_values(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    base_values[static_cast<Eigen::Index>(g)] = net.eval(grid[g])[0];
    avg_values[static_cast<Eigen::Index>(g)] = bn.avg_filter_eval(grid[g])[0];
  }
  const double avg_sup = (avg_values - base_values).cwiseAbs().maxCoeff();

  const int runs = config.value("runs", 200);
  const double exceed_eps = config.value("exceed_eps", 0.2);
  const Seminorm l2 = Seminorm::lr(grid, 2.0);
  std::vector<double> sup_err(static_cast<std::size_t>(runs));
  std::vector<double> l2_err(static_cast<std::size_t>(runs));
  const rng::Source mc{seed, 0x636578ULL};
  parallel_for(runs, jobs, [&](std::int64_t run) {
    const Eigen::MatrixXd v = bn.sample_eval_grid(grid, mc, static_cast<std::uint64_t>(run));
    sup_err[static_cast<std::size_t>(run)] = (v.col(0) - base_values).cwiseAbs().maxCoeff();
    l2_err[static_cast<std::size_t>(run)] = l2.apply(v.col(0), base_values);
  });
  std::int64_t exceed = 0;
  std::vector<double> l2sq(l2_err.size());
  for (std::size_t i = 0; i < sup_err.size(); ++i) {
    if (sup_err[i] > exceed_eps) ++exceed;
    l2sq[i] = l2_err[i] * l2_err[i];
  }
  const WilsonInterval ci = wilson_interval(exceed, runs, 0.95);
  const double l2_estimate = std::sqrt(pairwise_sum(l2sq) / runs);

  CsvWriter csv(config_hash(config), seed, "M,x,run_id,value,base_value,abs_err");
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double b = base_values[static_cast<Eigen::Index>(g)];
    const double a = avg_values[static_cast<Eigen::Index>(g)];
    csv.line() << m << "," << fmt(grid[g][0]) << ",-1," << fmt(a) << "," << fmt(b) << ","
               << fmt(std::abs(a - b)) << "\n";
  }
  write_text_file(out_dir + "/runs.csv", csv.str());

  const double avg_expected = config.value("avg_filt_expected", 1.0);
  const double avg_tol = config.value("avg_filt_tol", 1e-9);
  const double prob_bound = config.value("prob_bound", 0.1);
  const double l2_bound = config.value("l2_bound", 0.1);
  const bool avg_finding = std::abs(avg_sup - avg_expected) <= avg_tol;
  const bool random_finding = ci.hi < prob_bound && l2_estimate < l2_bound;

  json report = base_report("counterexample", config, seed);
  report["M"] = m;
  report["avg_filt_sup_error"] = avg_sup;
  report["avg_filt_expected"] = avg_expected;
  report["random_mode"] = json{{"runs", runs},
                               {"exceed_eps", exceed_eps},
                               {"exceed_count", exceed},
                               {"wilson_hi", ci.hi},
                               {"l2_estimate", l2_estimate}};
  report["grid_spec"] = grid_spec;
  const int exit_code = (avg_finding && random_finding) ? 0 : 1;
  report["exit_code"] = exit_code;
  write_report(out_dir, report);
  return {exit_code, report};
}

// ---- tree ---------------------------------------------------------------------

ExperimentOutcome run_tree(const json& config, const std::string& out_dir, std::uint64_t seed,
                           int jobs) {
  const Network net = network_from_config(config);
  const TreePipelineConfig tc = tree_config_from_json(config, jobs);
  TreePipelineResult res = run_tree_pipeline(net, tc, rng::Source{seed, 0x74726570ULL});

  json tree_json = tree_to_json(res.tree);
  tree_json["config_hash"] = config_hash(config);
  tree_json["seed"] = seed;
  write_text_file(out_dir + "/tree.json", tree_json.dump() + "\n");

  // Grid curves for a handful of draws in both modes.
  const int csv_draws = config.value("csv_draws", 8);
  const int d0 = net.input_dim();
  const double half = d0 == 1 ? tc.R : tc.R / std::sqrt(static_cast<double>(d0));
  const Box box{Eigen::VectorXd::Constant(d0, -half), Eigen::VectorXd::Constant(d0, half)};
  const std::vector<Eigen::VectorXd> grid = uniform_grid(
      box, d0 == 1 ? tc.verify_grid_points
                   : std::max(2, static_cast<int>(std::round(std::pow(tc.verify_grid_points, 1.0 / d0)))));
  CsvWriter csv(config_hash(config), seed, "x,mode,run_id,value,base_value");
  TreeEvaluator ev(res.tree);
  const rng::Source csv_rng{seed, 0x63737674ULL};
  for (const Eigen::VectorXd& x : grid) {
    const double b = net.eval(x)[0];
    const double a = nn_eval(res.tree, res.pre, x, EvalMode::avg_filt, csv_rng, 0, &ev)[0];
    csv.line() << fmt(x[0]) << ",avg_filt,0," << fmt(a) << "," << fmt(b) << "\n";
  }
  for (int run = 0; run < csv_draws; ++run)
    for (const Eigen::VectorXd& x : grid) {
      const double b = net.eval(x)[0];
      const double v =
          nn_eval(res.tree, res.pre, x, EvalMode::sampled, csv_rng, static_cast<std::uint64_t>(run), &ev)[0];
      csv.line() << fmt(x[0]) << ",sampled," << run << "," << fmt(v) << "," << fmt(b) << "\n";
    }
  write_text_file(out_dir + "/runs.csv", csv.str());

  json report = base_report("tree", config, seed);
  report["radii"] = res.radii.levels;
  report["vertices"] = res.tree.vertex_count();
  report["leaves"] = res.tree.leaves().size();
  json rounds = json::array();
  for (const GrowthRound& r : res.growth.rounds)
    rounds.push_back(json{{"level", r.level},
                          {"copy_size", r.copy_size},
                          {"delta", r.delta},
                          {"violations", r.check.violations},
                          {"samples", r.check.samples},
                          {"wilson_hi", r.check.wilson_upper},
                          {"threshold", r.check.threshold},
                          {"rejected_sizes", r.rejected_sizes}});
  report["growth"] = std::move(rounds);
  report["alpha"] = res.pre.alpha();
  report["pre_copy_pairs"] = res.pre.copy_pairs();
  report["rejected_pre_copies"] = res.rejected_pre_copies;
  report["avg_filt_sup_error"] = res.avg_filt_sup;
  report["exceedance"] = json{{"eps", res.exceedance.eps},
                              {"estimate", res.exceedance.estimate},
                              {"exceed_count", res.exceedance.exceed_count},
                              {"samples", res.exceedance.samples},
                              {"wilson_hi", res.exceedance.ci.hi}};
  report["lq_estimate"] = res.lq_estimate;
  report["q"] = tc.q;
  report["pass_avg_filt"] = res.pass_avg_filt;
  report["pass_prob"] = res.pass_prob;
  report["pass_lq"] = res.pass_lq;
  report["radii_checks"] = res.radii_check.checks;
  report["radii_violations"] = res.radii_check.violations;
  report["radii_max_ratio"] = res.radii_check.max_ratio;
  const int exit_code = res.all_pass() ? 0 : 3;
  report["exit_code"] = exit_code;
  write_report(out_dir, report);
  return {exit_code, report};
}

}  // namespace

TreePipelineConfig tree_config_from_json(const json& config, int jobs) {
  TreePipelineConfig tc;
  tc.eps = config.at("eps").get<double>();
  tc.q = config.value("q", 2.0);
  tc.Q = config.value("Q", 5.0);
  tc.R = config.value("R", 1.0);
  tc.keep_prob = config.value("keep_prob", 0.5);
  tc.input_keep = config.value("input_keep", tc.keep_prob);
  tc.pre_keep = config.value("pre_keep", tc.keep_prob);
  if (config.contains("sigma0")) tc.sigma0 = activation_from_json(config.at("sigma0"));
  tc.alpha0 = config.value("alpha0", 1e-2);
  if (config.contains("growth")) {
    const json& g = config.at("growth");
    tc.growth_initial_copy = g.value("initial_copy", 16);
    tc.growth_copy_cap = g.value("cap", 4096);
    tc.delta0 = g.value("delta0", 0.0);
    tc.approp.n_filter_samples = g.value("n_filter_samples", std::int64_t{0});
    tc.approp.n_x_samples = g.value("n_x_samples", 8);
    tc.approp.n_perturb_samples = g.value("n_perturb_samples", 2);
    tc.approp.x_grid_points = g.value("x_grid_points", 9);
    tc.approp.max_filter_samples = g.value("max_filter_samples", std::int64_t{2'000'000});
  }
  if (config.contains("precomp")) {
    tc.pre_initial_copies = config.at("precomp").value("initial_copies", 16);
    tc.pre_copy_cap = config.at("precomp").value("cap", 4096);
  }
  if (config.contains("verify")) {
    tc.verify_draws = config.at("verify").value("draws", std::int64_t{500});
    tc.verify_grid_points = config.at("verify").value("grid_points", 65);
    tc.confidence = config.at("verify").value("confidence", 0.95);
  }
  tc.jobs = jobs;
  return tc;
}

TargetFunction target_from_json(const json& spec) {
  TargetFunction t;
  t.domain = box_from_json(spec.at("domain"));
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "constant") {
    const double v = spec.at("value").get<double>();
    t.f = [v](const Eigen::VectorXd&) { return v; };
  } else if (kind == "relu_shifted") {
    const double shift = spec.value("shift", 1.0);
    t.f = [shift](const Eigen::VectorXd& x) { return std::max(0.0, x[0] - shift); };
  } else if (kind == "sin_exp") {
    t.f = [](const Eigen::VectorXd& x) { return std::sin(x[0] + 3.0) * std::exp(-std::abs(x[0] - 3.0)); };
  } else if (kind == "step") {
    const double at = spec.value("threshold", 0.0);
    t.f = [at](const Eigen::VectorXd& x) { return x[0] >= at ? 1.0 : 0.0; };
  } else if (kind == "network") {
    auto net = std::make_shared<Network>(
        spec.contains("network")
            ? network_from_json(spec.at("network"))
            : network_from_json(json::parse(read_text_file(spec.at("path").get<std::string>()))));
    t.f = [net](const Eigen::VectorXd& x) { return net->eval(x)[0]; };
  } else {
    throw_invalid("unknown target kind: " + kind);
  }
  return t;
}

FilterModel filter_from_json_spec(const json& spec, const Network& net) {
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "dropconnect") {
    const double p = spec.at("p").get<double>();
    if (spec.contains("layers"))
      return dropconnect_model(net, p, spec.at("layers").get<std::vector<int>>());
    return dropconnect_model(net, p);
  }
  if (kind == "node_dropout")
    return node_dropout_model(net, spec.at("p_per_layer").get<std::vector<double>>());
  if (kind == "model") return filter_model_from_json(spec.at("model"));
  throw_invalid("unknown filter kind: " + kind);
}

ExperimentOutcome run_command(const std::string& command, const json& config,
                              const std::string& out_dir,
                              std::optional<std::uint64_t> seed_override, int jobs) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  json error_report;
  int exit_code = 1;
  try {
    const std::uint64_t seed = resolve_seed(config, seed_override);
    if (command == "decompose") return run_decompose(config, out_dir, seed, jobs);
    if (command == "blowup") return run_blowup(config, out_dir, seed, jobs);
    if (command == "counterexample") return run_counterexample(config, out_dir, seed, jobs);
    if (command == "tree") return run_tree(config, out_dir, seed, jobs);
    if (command == "mu-check") return run_mu_check(config, out_dir, seed, jobs);
    if (command == "fit") return run_fit(config, out_dir, seed, jobs);
    throw_invalid("unknown command: " + command);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::invalid_argument:
      case ErrorCode::shape_mismatch:
      case ErrorCode::unsupported_model:
      case ErrorCode::io:
        exit_code = 2;
        break;
      case ErrorCode::budget_exceeded:
        exit_code = 3;
        break;
      case ErrorCode::numeric:
        exit_code = 1;
        break;
    }
    error_report = json{{"command", command}, {"error", e.what()}, {"exit_code", exit_code}};
  } catch (const std::exception& e) {
    error_report = json{{"command", command}, {"error", e.what()}, {"exit_code", 1}};
    exit_code = 1;
  }
  try {
    write_report(out_dir, error_report);
  } catch (...) {
  }
  return {exit_code, error_report};
}

}  // namespace dropnet
