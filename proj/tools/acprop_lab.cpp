// Command-line front end: flags or a JSON config in, CSV/SVG/JSON artifacts out.

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "acprop_lab/experiment.hpp"

namespace {

struct CommandFlags {
  std::map<std::string, std::string> values;
  std::string config;
  std::string seed;
  std::string output_dir;
  std::size_t workers = 0;
  CLI::Option* config_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* output_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
};

void usage_error(const std::string& message) {
  std::cerr << nlohmann::json{{"error", "usage"}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimizer lab: convergence sweeps, limits, rate and stability experiments"};
  app.require_subcommand(1);

  std::map<std::string, CommandFlags> flags;
  const std::map<std::string, std::string> about = {
      {"sweep", "convergence verdicts over a (P, beta2) grid per optimizer"},
      {"trajectory", "one run on one problem, every step recorded"},
      {"limits", "closed-form EMA limits next to long-run simulation"},
      {"rate", "running mean of ||grad||^2 against T on the noisy quadratic"},
      {"mlp", "small MLP run with accumulator traces and gradient replay"},
      {"harmonic", "partial zeta sums against their asymptotic expansion"}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& cmd : acprop_lab::experiment_commands()) {
    auto* sub = app.add_subcommand(cmd, about.at(cmd));
    auto& f = flags[cmd];
    for (const auto& key : acprop_lab::command_keys(cmd)) {
      sub->add_option("--" + key, f.values[key], "config key '" + key + "'");
    }
    f.config_opt = sub->add_option("--config", f.config, "flat JSON config file; flags override it")
                       ->check(CLI::ExistingFile);
    f.seed_opt = sub->add_option("--seed", f.seed, "seed (falls back to config, then ACPROP_LAB_SEED)");
    f.output_opt = sub->add_option("--output_dir", f.output_dir, "artifact directory (default: results)");
    f.workers_opt = sub->add_option("--workers", f.workers, "worker threads (default: all cores)");
    subs[cmd] = sub;
  }

  std::string render_in;
  std::string render_out;
  auto* render = app.add_subcommand("render", "re-render an SVG from a CSV artifact");
  render->add_option("--input", render_in, "CSV artifact")->required()->check(CLI::ExistingFile);
  render->add_option("--output", render_out, "SVG path (default: input with .svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    usage_error(e.what());
    return acprop_lab::kExitUsage;
  }

  try {
    if (render->parsed()) {
      std::filesystem::path out = render_out.empty() ? std::filesystem::path(render_in).replace_extension(".svg")
                                                     : std::filesystem::path(render_out);
      acprop_lab::render_file(render_in, out);
      return acprop_lab::kExitOk;
    }
    for (const auto& [cmd, sub] : subs) {
      if (!sub->parsed()) continue;
      auto& f = flags[cmd];
      std::map<std::string, std::string> given;
      for (const auto& [key, value] : f.values) {
        if (sub->count("--" + key) > 0) given[key] = value;
      }
      const auto cfg = acprop_lab::make_config(
          cmd, f.config_opt->count() ? std::optional<std::filesystem::path>(f.config) : std::nullopt, given,
          f.seed_opt->count() ? std::optional<std::string>(f.seed) : std::nullopt,
          f.output_opt->count() ? std::optional<std::string>(f.output_dir) : std::nullopt,
          f.workers_opt->count() ? std::optional<std::size_t>(f.workers) : std::nullopt);
      return acprop_lab::run_experiment(cfg, std::cout, std::cerr);
    }
  } catch (const acprop_lab::UsageError& e) {
    usage_error(e.what());
    return acprop_lab::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "compute"}, {"message", e.what()}}.dump() << '\n';
    return acprop_lab::kExitCompute;
  }
  return acprop_lab::kExitUsage;
}
