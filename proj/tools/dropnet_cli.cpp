// Experiment driver CLI. Thin wrapper over the dropnet C API: parses flags,
// reads the JSON config, and forwards to dn_experiment_run.

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "dropnet.h"

namespace {

int run(const std::string& command, const std::string& config_path, const std::string& out_dir,
        bool has_seed, std::uint64_t seed, int jobs, bool quiet) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read config " << config_path << "\n";
    return 2;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string config = ss.str();

  char* report = nullptr;
  const std::uint64_t* override_ptr = has_seed ? &seed : nullptr;
  const dn_status status =
      dn_experiment_run(command.c_str(), config.c_str(), out_dir.c_str(), override_ptr, jobs,
                        &report);
  if (report) {
    if (!quiet) std::cout << report << "\n";
    dn_string_free(report);
  }
  const std::string message = dn_last_error();
  if (status != DN_OK && !message.empty()) std::cerr << "error: " << message << "\n";
  switch (status) {
    case DN_OK:
      return 0;
    case DN_INVALID_ARGUMENT:
    case DN_UNSUPPORTED_MODEL:
    case DN_SHAPE_MISMATCH:
    case DN_IO_ERROR:
      return 2;
    case DN_BUDGET_EXCEEDED:
      return 3;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dropout-network approximation experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int jobs = 1;
  bool quiet = false;

  const std::vector<std::string> commands = {"decompose", "blowup", "counterexample",
                                             "tree",      "mu-check", "fit"};
  for (const std::string& name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config path")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "seed override (DROPNET_SEED env wins over this)");
    sub->add_option("--jobs", jobs, "worker threads for independent runs");
    sub->add_flag("--quiet", quiet, "suppress the report on stdout");
  }

  CLI11_PARSE(app, argc, argv);

  const CLI::App* sub = app.get_subcommands().front();
  const bool has_seed = sub->count("--seed") > 0;
  return run(sub->get_name(), config_path, out_dir, has_seed, seed, jobs, quiet);
}
