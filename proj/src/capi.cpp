#include "dropnet.h"

#include <cstring>
#include <string>

#include "dropnet/blowup.hpp"
#include "dropnet/error.hpp"
#include "dropnet/experiments.hpp"
#include "dropnet/fit.hpp"
#include "dropnet/pipeline.hpp"

using namespace dropnet;

namespace {

thread_local std::string g_last_error;

dn_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return DN_INVALID_ARGUMENT;
    case ErrorCode::shape_mismatch: return DN_SHAPE_MISMATCH;
    case ErrorCode::unsupported_model: return DN_UNSUPPORTED_MODEL;
    case ErrorCode::budget_exceeded: return DN_BUDGET_EXCEEDED;
    case ErrorCode::numeric: return DN_ERROR;
    case ErrorCode::io: return DN_IO_ERROR;
  }
  return DN_ERROR;
}

template <typename Fn>
dn_status guarded(Fn&& fn) {
  try {
    fn();
    return DN_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return DN_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DN_ERROR;
  } catch (...) {
    g_last_error = "unknown error";
    return DN_ERROR;
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Eigen::VectorXd to_vector(const double* data, int len) {
  Eigen::VectorXd v(len);
  for (int i = 0; i < len; ++i) v[i] = data[i];
  return v;
}

void store_vector(const Eigen::VectorXd& v, double* out, int len) {
  require(static_cast<int>(v.size()) == len, ErrorCode::shape_mismatch,
          "output buffer length mismatch");
  for (int i = 0; i < len; ++i) out[i] = v[i];
}

}  // namespace

struct dn_network {
  Network net;
};
struct dn_filter_model {
  FilterModel model;
};
struct dn_coeff_table {
  CoefficientTable table;
};
struct dn_blowup {
  BlowupNetwork blowup;
};
struct dn_tree_pipeline {
  TreePipelineResult result;
  rng::Source eval_rng;
};

extern "C" {

const char* dn_last_error(void) { return g_last_error.c_str(); }

void dn_string_free(char* s) { delete[] s; }

dn_status dn_network_from_json(const char* json_text, dn_network** out) {
  return guarded([&] {
    require(json_text && out, ErrorCode::invalid_argument, "null argument");
    *out = new dn_network{network_from_json(json::parse(json_text))};
  });
}

dn_status dn_network_load(const char* path, dn_network** out) {
  return guarded([&] {
    require(path && out, ErrorCode::invalid_argument, "null argument");
    *out = new dn_network{network_from_json(json::parse(read_text_file(path)))};
  });
}

dn_status dn_network_to_json(const dn_network* net, char** json_out) {
  return guarded([&] {
    require(net && json_out, ErrorCode::invalid_argument, "null argument");
    *json_out = dup_string(network_to_json(net->net).dump());
  });
}

void dn_network_free(dn_network* net) { delete net; }

int dn_network_input_dim(const dn_network* net) { return net ? net->net.input_dim() : -1; }
int dn_network_output_dim(const dn_network* net) { return net ? net->net.output_dim() : -1; }
int dn_network_param_count(const dn_network* net) { return net ? net->net.param_count() : -1; }

dn_status dn_network_eval(const dn_network* net, const double* x, int x_len, double* y,
                          int y_len) {
  return guarded([&] {
    require(net && x && y, ErrorCode::invalid_argument, "null argument");
    store_vector(net->net.eval(to_vector(x, x_len)), y, y_len);
  });
}

dn_status dn_network_eval_masked(const dn_network* net, const double* mask, int mask_len,
                                 const double* x, int x_len, double* y, int y_len) {
  return guarded([&] {
    require(net && mask && x && y, ErrorCode::invalid_argument, "null argument");
    store_vector(net->net.eval_masked(to_vector(mask, mask_len), to_vector(x, x_len)), y, y_len);
  });
}

dn_status dn_hs_norm(const double* entries, int rows, int cols, double* out) {
  return guarded([&] {
    require(entries && out && rows >= 1 && cols >= 1, ErrorCode::invalid_argument,
            "null argument or bad dims");
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = entries[r * cols + c];
    *out = hs_norm(m);
  });
}

dn_status dn_network_fit(dn_target_fn target, void* target_ctx, const double* domain_lo,
                         const double* domain_hi, int dim, const int* dims, int n_dims,
                         const char** activations, int budget, uint64_t seed, dn_network** out,
                         double* sup_error) {
  return guarded([&] {
    require(target && domain_lo && domain_hi && dims && activations && out && sup_error,
            ErrorCode::invalid_argument, "null argument");
    TargetFunction t;
    t.domain.lo = to_vector(domain_lo, dim);
    t.domain.hi = to_vector(domain_hi, dim);
    t.f = [target, target_ctx, dim](const Eigen::VectorXd& x) {
      return target(x.data(), dim, target_ctx);
    };
    FitConfig fc;
    fc.dims.assign(dims, dims + n_dims);
    for (int i = 0; i + 1 < n_dims; ++i) {
      Activation a;
      a.kind = activation_kind_from_string(activations[i]);
      fc.activations.push_back(a);
    }
    fc.budget = budget;
    FitResult res = fit_base_network(t, fc, rng::Source{seed, 0x666974ULL});
    *out = new dn_network{std::move(res.net)};
    *sup_error = res.sup_error;
  });
}

dn_status dn_filter_model_node_dropout(const dn_network* net, const double* p_per_layer,
                                       int n_layers, dn_filter_model** out) {
  return guarded([&] {
    require(net && p_per_layer && out, ErrorCode::invalid_argument, "null argument");
    *out = new dn_filter_model{
        node_dropout_model(net->net, std::vector<double>(p_per_layer, p_per_layer + n_layers))};
  });
}

dn_status dn_filter_model_dropconnect(const dn_network* net, double p, dn_filter_model** out) {
  return guarded([&] {
    require(net && out, ErrorCode::invalid_argument, "null argument");
    *out = new dn_filter_model{dropconnect_model(net->net, p)};
  });
}

dn_status dn_filter_model_from_json(const char* json_text, dn_filter_model** out) {
  return guarded([&] {
    require(json_text && out, ErrorCode::invalid_argument, "null argument");
    *out = new dn_filter_model{filter_model_from_json(json::parse(json_text))};
  });
}

dn_status dn_filter_model_to_json(const dn_filter_model* m, char** json_out) {
  return guarded([&] {
    require(m && json_out, ErrorCode::invalid_argument, "null argument");
    *json_out = dup_string(filter_model_to_json(m->model).dump());
  });
}

void dn_filter_model_free(dn_filter_model* m) { delete m; }

int dn_filter_model_size(const dn_filter_model* m) { return m ? m->model.size() : -1; }
int dn_filter_model_block_count(const dn_filter_model* m) {
  return m ? m->model.block_count() : -1;
}

dn_status dn_filter_model_sample(const dn_filter_model* m, uint64_t seed, uint64_t stream,
                                 uint64_t draw, uint8_t* outcome, int len) {
  return guarded([&] {
    require(m && outcome, ErrorCode::invalid_argument, "null argument");
    require(len == m->model.size(), ErrorCode::shape_mismatch, "outcome buffer length mismatch");
    const std::vector<std::uint8_t> s = m->model.sample(rng::Source{seed, stream}, draw);
    std::memcpy(outcome, s.data(), s.size());
  });
}

dn_status dn_filter_model_expectation(const dn_filter_model* m, double* out, int len) {
  return guarded([&] {
    require(m && out, ErrorCode::invalid_argument, "null argument");
    store_vector(m->model.expectation(), out, len);
  });
}

dn_status dn_filter_model_pmf(const dn_filter_model* m, const uint8_t* outcome, int len,
                              double* prob) {
  return guarded([&] {
    require(m && outcome && prob, ErrorCode::invalid_argument, "null argument");
    *prob = m->model.pmf(std::vector<std::uint8_t>(outcome, outcome + len));
  });
}

dn_status dn_coeffs_closed_form(const double* drop_prob, int r, dn_coeff_table** out) {
  return guarded([&] {
    require(drop_prob && out, ErrorCode::invalid_argument, "null argument");
    *out = new dn_coeff_table{coeffs_closed_form(to_vector(drop_prob, r))};
  });
}

dn_status dn_coeffs_general(const dn_filter_model* m, dn_coeff_table** out) {
  return guarded([&] {
    require(m && out, ErrorCode::invalid_argument, "null argument");
    *out = new dn_coeff_table{coeffs_general(SubsetModels(m->model))};
  });
}

void dn_coeff_table_free(dn_coeff_table* t) { delete t; }

int dn_coeff_table_block_count(const dn_coeff_table* t) { return t ? t->table.block_count() : -1; }

double dn_coeff_table_value(const dn_coeff_table* t, uint32_t subset) {
  return t ? t->table.at(subset) : 0.0;
}

double dn_coeff_table_sum(const dn_coeff_table* t) { return t ? t->table.sum() : 0.0; }

dn_status dn_coeff_table_to_json(const dn_coeff_table* t, char** json_out) {
  return guarded([&] {
    require(t && json_out, ErrorCode::invalid_argument, "null argument");
    *json_out = dup_string(coeff_table_to_json(t->table).dump());
  });
}

dn_status dn_verify_decomposition(const dn_network* net, const dn_coeff_table* t,
                                  const dn_filter_model* m, const double* grid_lo,
                                  const double* grid_hi, int grid_points, double* max_residual) {
  return guarded([&] {
    require(net && t && m && grid_lo && grid_hi && max_residual, ErrorCode::invalid_argument,
            "null argument");
    const int d = net->net.input_dim();
    Box box{to_vector(grid_lo, d), to_vector(grid_hi, d)};
    *max_residual = verify_decomposition(net->net, t->table, SubsetModels(m->model),
                                         uniform_grid(box, grid_points));
  });
}

dn_status dn_mu_identity_check(const double* q, int r, double* max_deviation) {
  return guarded([&] {
    require(q && max_deviation, ErrorCode::invalid_argument, "null argument");
    *max_deviation = mu_identity_max_deviation(to_vector(q, r));
  });
}

dn_status dn_blowup_create(const dn_network* net, const dn_coeff_table* t,
                           const dn_filter_model* m, uint64_t copies, dn_blowup** out) {
  return guarded([&] {
    require(net && t && m && out, ErrorCode::invalid_argument, "null argument");
    *out = new dn_blowup{BlowupNetwork(net->net, t->table, SubsetModels(m->model), copies)};
  });
}

void dn_blowup_free(dn_blowup* b) { delete b; }

dn_status dn_blowup_sample_eval(const dn_blowup* b, const double* x, int x_len, uint64_t seed,
                                uint64_t stream, uint64_t draw, double* y, int y_len) {
  return guarded([&] {
    require(b && x && y, ErrorCode::invalid_argument, "null argument");
    store_vector(b->blowup.sample_eval(to_vector(x, x_len), rng::Source{seed, stream}, draw), y,
                 y_len);
  });
}

dn_status dn_blowup_mean_eval(const dn_blowup* b, const double* x, int x_len, double* y,
                              int y_len) {
  return guarded([&] {
    require(b && x && y, ErrorCode::invalid_argument, "null argument");
    store_vector(b->blowup.mean_eval(to_vector(x, x_len)), y, y_len);
  });
}

dn_status dn_blowup_avg_filter_eval(const dn_blowup* b, const double* x, int x_len, double* y,
                                    int y_len) {
  return guarded([&] {
    require(b && x && y, ErrorCode::invalid_argument, "null argument");
    store_vector(b->blowup.avg_filter_eval(to_vector(x, x_len)), y, y_len);
  });
}

dn_status dn_tree_pipeline_run(const dn_network* net, const char* config_json, uint64_t seed,
                               int jobs, dn_tree_pipeline** out, char** report_json) {
  return guarded([&] {
    require(net && config_json && out, ErrorCode::invalid_argument, "null argument");
    const TreePipelineConfig tc = tree_config_from_json(json::parse(config_json), jobs);
    TreePipelineResult res = run_tree_pipeline(net->net, tc, rng::Source{seed, 0x74726570ULL});
    if (report_json) {
      json rep{{"avg_filt_sup_error", res.avg_filt_sup},
               {"lq_estimate", res.lq_estimate},
               {"exceed_wilson_hi", res.exceedance.ci.hi},
               {"pass_avg_filt", res.pass_avg_filt},
               {"pass_prob", res.pass_prob},
               {"pass_lq", res.pass_lq},
               {"vertices", res.tree.vertex_count()},
               {"radii", res.radii.levels}};
      *report_json = dup_string(rep.dump());
    }
    *out = new dn_tree_pipeline{std::move(res), rng::Source{seed, 0x6e6e65ULL}};
  });
}

void dn_tree_pipeline_free(dn_tree_pipeline* p) { delete p; }

dn_status dn_tree_pipeline_eval(const dn_tree_pipeline* p, const double* x, int x_len, int mode,
                                uint64_t draw, double* y, int y_len) {
  return guarded([&] {
    require(p && x && y, ErrorCode::invalid_argument, "null argument");
    require(mode == 0 || mode == 1, ErrorCode::invalid_argument, "mode must be 0 or 1");
    const Eigen::VectorXd out =
        nn_eval(p->result.tree, p->result.pre, to_vector(x, x_len),
                mode == 0 ? EvalMode::sampled : EvalMode::avg_filt, p->eval_rng, draw);
    store_vector(out, y, y_len);
  });
}

dn_status dn_tree_pipeline_tree_json(const dn_tree_pipeline* p, char** json_out) {
  return guarded([&] {
    require(p && json_out, ErrorCode::invalid_argument, "null argument");
    *json_out = dup_string(tree_to_json(p->result.tree).dump());
  });
}

dn_status dn_experiment_run(const char* command, const char* config_json, const char* out_dir,
                            const uint64_t* seed_override, int jobs, char** report_json) {
  dn_status code = DN_OK;
  const dn_status guard = guarded([&] {
    require(command && config_json && out_dir, ErrorCode::invalid_argument, "null argument");
    std::optional<std::uint64_t> seed;
    if (seed_override) seed = *seed_override;
    const ExperimentOutcome outcome =
        run_command(command, json::parse(config_json), out_dir, seed, jobs);
    if (report_json) *report_json = dup_string(outcome.report.dump());
    switch (outcome.exit_code) {
      case 0: code = DN_OK; break;
      case 2: code = DN_INVALID_ARGUMENT; break;
      case 3: code = DN_BUDGET_EXCEEDED; break;
      default: code = DN_ERROR; break;
    }
    if (outcome.exit_code != 0 && outcome.report.contains("error"))
      g_last_error = outcome.report.at("error").get<std::string>();
  });
  return guard == DN_OK ? code : guard;
}

}  // extern "C"
