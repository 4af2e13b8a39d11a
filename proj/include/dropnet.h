/* C API for the dropnet library: dropout-network approximation constructions
 * and their numerical verification.
 *
 * All objects are opaque handles created and destroyed through this API.
 * Functions return dn_status; on failure dn_last_error() describes the
 * problem (message is thread-local). Strings returned through char** are
 * heap-allocated and must be released with dn_string_free().
 *
 * Randomness is counter-based: results are pure functions of
 * (seed, stream, draw), so replays are exact and order-independent.
 */
#ifndef DROPNET_H
#define DROPNET_H

#include <stdint.h>

#if defined(_WIN32)
#define DN_API __declspec(dllexport)
#else
#define DN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dn_status {
  DN_OK = 0,
  DN_ERROR = 1,             /* internal / numeric failure */
  DN_INVALID_ARGUMENT = 2,  /* bad input or violated precondition */
  DN_BUDGET_EXCEEDED = 3,   /* doubling cap or fit budget exhausted */
  DN_UNSUPPORTED_MODEL = 4, /* operation needs an enumerable model */
  DN_SHAPE_MISMATCH = 5,    /* dimension or length mismatch */
  DN_IO_ERROR = 6
} dn_status;

typedef struct dn_network dn_network;
typedef struct dn_filter_model dn_filter_model;
typedef struct dn_coeff_table dn_coeff_table;
typedef struct dn_blowup dn_blowup;
typedef struct dn_tree_pipeline dn_tree_pipeline;

DN_API const char* dn_last_error(void);
DN_API void dn_string_free(char* s);

/* ---- networks ---------------------------------------------------------- */

DN_API dn_status dn_network_from_json(const char* json_text, dn_network** out);
DN_API dn_status dn_network_load(const char* path, dn_network** out);
DN_API dn_status dn_network_to_json(const dn_network* net, char** json_out);
DN_API void dn_network_free(dn_network* net);

DN_API int dn_network_input_dim(const dn_network* net);
DN_API int dn_network_output_dim(const dn_network* net);
DN_API int dn_network_param_count(const dn_network* net);

DN_API dn_status dn_network_eval(const dn_network* net, const double* x, int x_len, double* y,
                                 int y_len);
/* mask entries may be reals in [0,1]; expectation replacement uses E[f]. */
DN_API dn_status dn_network_eval_masked(const dn_network* net, const double* mask, int mask_len,
                                        const double* x, int x_len, double* y, int y_len);
DN_API dn_status dn_hs_norm(const double* entries, int rows, int cols, double* out);

typedef double (*dn_target_fn)(const double* x, int dim, void* ctx);

/* Random-feature fit with ridge-solved output layer and pattern-search
 * refinement; activations[i] names the activation of layer i+1, the last one
 * must be "identity". */
DN_API dn_status dn_network_fit(dn_target_fn target, void* target_ctx, const double* domain_lo,
                                const double* domain_hi, int dim, const int* dims, int n_dims,
                                const char** activations, int budget, uint64_t seed,
                                dn_network** out, double* sup_error);

/* ---- filter models ------------------------------------------------------ */

DN_API dn_status dn_filter_model_node_dropout(const dn_network* net, const double* p_per_layer,
                                              int n_layers, dn_filter_model** out);
DN_API dn_status dn_filter_model_dropconnect(const dn_network* net, double p,
                                             dn_filter_model** out);
DN_API dn_status dn_filter_model_from_json(const char* json_text, dn_filter_model** out);
DN_API dn_status dn_filter_model_to_json(const dn_filter_model* m, char** json_out);
DN_API void dn_filter_model_free(dn_filter_model* m);

DN_API int dn_filter_model_size(const dn_filter_model* m);
DN_API int dn_filter_model_block_count(const dn_filter_model* m);
DN_API dn_status dn_filter_model_sample(const dn_filter_model* m, uint64_t seed, uint64_t stream,
                                        uint64_t draw, uint8_t* outcome, int len);
DN_API dn_status dn_filter_model_expectation(const dn_filter_model* m, double* out, int len);
DN_API dn_status dn_filter_model_pmf(const dn_filter_model* m, const uint8_t* outcome, int len,
                                     double* prob);

/* ---- expectation-matching coefficients ---------------------------------- */

DN_API dn_status dn_coeffs_closed_form(const double* drop_prob, int r, dn_coeff_table** out);
DN_API dn_status dn_coeffs_general(const dn_filter_model* m, dn_coeff_table** out);
DN_API void dn_coeff_table_free(dn_coeff_table* t);
DN_API int dn_coeff_table_block_count(const dn_coeff_table* t);
DN_API double dn_coeff_table_value(const dn_coeff_table* t, uint32_t subset);
DN_API double dn_coeff_table_sum(const dn_coeff_table* t);
DN_API dn_status dn_coeff_table_to_json(const dn_coeff_table* t, char** json_out);

/* Max residual of the expectation decomposition over a uniform grid. */
DN_API dn_status dn_verify_decomposition(const dn_network* net, const dn_coeff_table* t,
                                         const dn_filter_model* m, const double* grid_lo,
                                         const double* grid_hi, int grid_points,
                                         double* max_residual);
DN_API dn_status dn_mu_identity_check(const double* q, int r, double* max_deviation);

/* ---- blow-up networks ---------------------------------------------------- */

DN_API dn_status dn_blowup_create(const dn_network* net, const dn_coeff_table* t,
                                  const dn_filter_model* m, uint64_t copies, dn_blowup** out);
DN_API void dn_blowup_free(dn_blowup* b);
DN_API dn_status dn_blowup_sample_eval(const dn_blowup* b, const double* x, int x_len,
                                       uint64_t seed, uint64_t stream, uint64_t draw, double* y,
                                       int y_len);
DN_API dn_status dn_blowup_mean_eval(const dn_blowup* b, const double* x, int x_len, double* y,
                                     int y_len);
DN_API dn_status dn_blowup_avg_filter_eval(const dn_blowup* b, const double* x, int x_len,
                                           double* y, int y_len);

/* ---- expectation-replacement pipeline ------------------------------------ */

/* Runs the full dropout-tree pipeline (radii, growth, precomposition tuning,
 * guarantee verification) for the given network. config_json uses the same
 * schema as the `tree` CLI command (without the network field). */
DN_API dn_status dn_tree_pipeline_run(const dn_network* net, const char* config_json,
                                      uint64_t seed, int jobs, dn_tree_pipeline** out,
                                      char** report_json);
DN_API void dn_tree_pipeline_free(dn_tree_pipeline* p);
/* mode: 0 sampled, 1 avg-filt. */
DN_API dn_status dn_tree_pipeline_eval(const dn_tree_pipeline* p, const double* x, int x_len,
                                       int mode, uint64_t draw, double* y, int y_len);
DN_API dn_status dn_tree_pipeline_tree_json(const dn_tree_pipeline* p, char** json_out);

/* ---- experiment driver ---------------------------------------------------- */

/* Runs one experiment command (decompose | blowup | counterexample | tree |
 * mu-check | fit) with a JSON config, writing artifacts into out_dir. The
 * returned status mirrors the CLI exit code contract. seed_override may be
 * NULL; the DROPNET_SEED environment variable takes precedence over both the
 * override and the config. */
DN_API dn_status dn_experiment_run(const char* command, const char* config_json,
                                   const char* out_dir, const uint64_t* seed_override, int jobs,
                                   char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* DROPNET_H */
