// Command-line front end: spikesamp <subcommand> [--config f] [--seed n] [--out dir] [--paper-scale]
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "spikesamp/errors.hpp"
#include "spikesamp/experiments.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kOther = 1 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool paper_scale = false;
  std::string figure;
  std::optional<double> scale;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "base seed (overrides the config)");
  sub->add_option("--out", o.out, "output directory (overrides the config)");
  sub->add_flag("--paper-scale", o.paper_scale, "use the full-size protocol");
}

spikesamp::ExperimentConfig load(const Options& o, const std::string& command) {
  spikesamp::ExperimentConfig cfg;
  if (!o.config.empty()) cfg = spikesamp::experiment_from_json(spikesamp::read_json_file(o.config));
  cfg.command = command;
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out = o.out;
  if (o.paper_scale) cfg.paper_scale = true;
  if (!o.figure.empty()) cfg.figure = o.figure;
  if (o.scale) cfg.scale = *o.scale;
  if (cfg.scale < 0.0) throw spikesamp::ConfigError("scale must be >= 0");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spike-train posterior sampling for coupled GLM networks"};
  app.require_subcommand(1);
  Options o;
  auto* simulate = app.add_subcommand("simulate", "simulate a network and write the raster");
  auto* sample = app.add_subcommand("sample", "sample hidden spike trains given the observed neurons");
  auto* calcium = app.add_subcommand("infer-calcium", "sample hidden trains given observed neurons and fluorescence");
  auto* sweep = app.add_subcommand("sweep", "acceptance rate over a parameter grid");
  auto* reproduce = app.add_subcommand("reproduce", "regenerate the data behind one figure");
  for (auto* s : {simulate, sample, calcium, sweep, reproduce}) add_common(s, o);
  std::string ids;
  for (const auto& id : spikesamp::figure_ids()) ids += (ids.empty() ? "" : ", ") + id;
  reproduce->add_option("figure", o.figure, "figure id: " + ids)->required();
  reproduce->add_option("--scale", o.scale, "multiplier on trials and samples; 0 echoes the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (simulate->parsed()) spikesamp::run_simulate(load(o, "simulate"));
    if (sample->parsed()) spikesamp::run_sample(load(o, "sample"));
    if (calcium->parsed()) spikesamp::run_infer_calcium(load(o, "infer-calcium"));
    if (sweep->parsed()) spikesamp::run_sweep_command(load(o, "sweep"));
    if (reproduce->parsed()) spikesamp::run_reproduce(load(o, "reproduce"));
  } catch (const spikesamp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const spikesamp::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOk;
}
