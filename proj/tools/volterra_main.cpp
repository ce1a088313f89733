// Command-line front end for the kernel extraction pipeline.

#include <CLI11.hpp>
#include <iostream>

#include "volterra/cli.hpp"
#include "volterra/errors.hpp"

int main(int argc, char** argv) {
  using namespace volterra;
  CLI::App app{"Multi-tone Volterra kernel extraction and time-domain synthesis"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir, system;
  int jobs = 0;
  long long seed = -1;
  int tones = 0, order = 0, stride = 0, max_points = -1;
  std::vector<double> levels;
  std::string mode;

  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Artifact directory");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Seed for jittered amplitude rows and audits")->check(CLI::NonNegativeNumber);

  auto* enumerate = app.add_subcommand("enumerate", "List output frequencies and contributing kernels");
  enumerate->add_option("--tones", tones, "Tone count M")->check(CLI::PositiveNumber);
  enumerate->add_option("--order", order, "Maximum mixing order")->check(CLI::PositiveNumber);

  std::vector<CLI::App*> pipeline;
  for (const char* name : {"plan", "probe", "extract", "synthesize", "validate"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--system", system, "benchmark, surrogate or linear");
    sub->add_option("--stride", stride, "Keep every n-th axis point")->check(CLI::PositiveNumber);
    sub->add_option("--max-points", max_points, "Axis point limit (0 keeps all)")->check(CLI::NonNegativeNumber);
    sub->add_option("--levels", levels, "Tone power levels in dBm");
    sub->add_option("--mode", mode, "Probe data source: transient or analytic");
    pipeline.push_back(sub);
  }
  app.get_subcommand("plan")->description("Build and validate a sweep plan");
  app.get_subcommand("probe")->description("Generate a spectral dataset");
  app.get_subcommand("extract")->description("Extract kernels into an archive");
  app.get_subcommand("synthesize")->description("Predict the pulse response from an archive");
  app.get_subcommand("validate")->description("Compare predictions with direct simulation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = config_from_json(read_json(config_path));
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (jobs > 0) cfg.jobs = jobs;
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (tones > 0) cfg.tones = tones;
  if (order > 0) cfg.max_mixing_order = order;
  if (!system.empty()) cfg.system = system;
  if (stride > 0) cfg.plan_stride = stride;
  if (max_points >= 0) cfg.plan_max_points = max_points;
  if (!levels.empty()) cfg.levels_dbm = levels;
  if (!mode.empty()) cfg.probe_mode = mode;

  const std::string command = app.get_subcommands().front()->get_name();
  return run_command(command, cfg, std::cout, std::cerr);
}
