#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "witgame/experiment.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out, "output directory");
  cmd->add_option("--seed", opts.seed, "override the config seed");
}

int run(const CommonOptions& opts,
        const std::vector<std::string>& allowed_tasks) {
  std::ifstream in(opts.config);
  nlohmann::json config = nlohmann::json::parse(in);
  if (opts.seed) config["seed"] = *opts.seed;
  const std::string task = config.value("task", "");
  bool ok = false;
  for (const auto& t : allowed_tasks) ok = ok || t == task;
  if (!ok) {
    std::fprintf(stderr, "error: config task '%s' does not fit this command\n",
                 task.c_str());
    return 1;
  }
  return witgame::run_experiment(config, opts.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Game-trained transparent witnesses: experiments, solvers, metrics"};
  app.require_subcommand(1);

  CommonOptions synth_opts, train_opts, fp_opts, bounds_opts, metrics_opts,
      plot_opts;
  auto* synth = app.add_subcommand("synth", "generate synthetic data files");
  add_common(synth, synth_opts);
  auto* train = app.add_subcommand("train", "run a training experiment");
  add_common(train, train_opts);
  auto* fixed = app.add_subcommand("fixed-point", "closed-form equilibrium");
  add_common(fixed, fp_opts);
  auto* bounds =
      app.add_subcommand("bounds", "effective-neighborhood-size bounds");
  add_common(bounds, bounds_opts);
  auto* metrics =
      app.add_subcommand("metrics", "score reference/prediction pairs");
  add_common(metrics, metrics_opts);
  auto* plot = app.add_subcommand("plot", "emit an SVG from a CSV");
  add_common(plot, plot_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run(synth_opts, {"synth"});
    if (train->parsed())
      return run(train_opts, {"synth_1d", "synth_multilabel", "sequence"});
    if (fixed->parsed()) return run(fp_opts, {"fixed_point"});
    if (bounds->parsed()) return run(bounds_opts, {"bounds"});
    if (metrics->parsed()) return run(metrics_opts, {"metrics"});
    if (plot->parsed()) return run(plot_opts, {"plot"});
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
