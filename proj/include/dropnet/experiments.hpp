#pragma once

#include <optional>
#include <string>

#include "dropnet/json_io.hpp"
#include "dropnet/pipeline.hpp"

namespace dropnet {

struct ExperimentOutcome {
  int exit_code = 0;
  json report;
};

// Experiment driver behind the CLI. Commands: decompose | blowup |
// counterexample | tree | mu-check | fit. Writes report.json plus
// command-specific CSV/JSON artifacts into out_dir; every output embeds the
// config hash and the resolved seed. Seed precedence: DROPNET_SEED
// environment variable, then seed_override, then config["seed"].
//
// Exit codes: 0 pass, 2 invalid input/preconditions, 3 budget exceeded,
// 1 internal error.
ExperimentOutcome run_command(const std::string& command, const json& config,
                              const std::string& out_dir,
                              std::optional<std::uint64_t> seed_override, int jobs);

// Named targets for configs: constant {value}, relu_shifted {shift},
// sin_exp (sin(x+3) exp(-|x-3|)), step {threshold}, network {network|path}.
TargetFunction target_from_json(const json& spec);

FilterModel filter_from_json_spec(const json& spec, const Network& net);

// Shared schema of the `tree` command and dn_tree_pipeline_run (all fields
// optional except eps).
TreePipelineConfig tree_config_from_json(const json& config, int jobs);

}  // namespace dropnet
