#pragma once

// Pipeline commands: enumerate, plan, probe, extract, synthesize, validate.
// Each command reads and writes files under RunConfig::out_dir and returns a
// process exit code.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "volterra/extractor.hpp"
#include "volterra/formats.hpp"

namespace volterra {

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitInput = 3 };

struct RunConfig {
  std::string out_dir = ".";
  int jobs = 1;
  std::uint64_t seed = 0;

  // enumerate
  int tones = 3;
  int max_mixing_order = 3;

  // plan
  std::string plan_preset = "table2";  // or "custom" with explicit axes
  int plan_stride = 1;
  int plan_max_points = 0;
  std::vector<double> levels_dbm;  // empty: preset levels
  int n_extra = -1;
  double delta_f_hz = 1e6;
  double z0 = 50.0;
  std::vector<LatticeAxis> axes;   // custom preset only

  // probe
  std::string system = "benchmark";
  std::string probe_mode = "transient";  // or "analytic"
  int analytic_truncation = 3;
  std::size_t capture_samples = 0;
  double settle_s = -1.0;

  ExtractionSettings extraction;

  // synthesize / validate stimulus
  double pulse_v0 = 1.0;
  double rise_s = 1e-9;
  double width_s = 5e-9;
  double fall_s = 1e-9;
  double period_factor = 4.0;
  double bin_cap = 1e-4;
  int max_bins = 200;
  std::size_t synth_samples = 1792;

  // validate
  double nrmse_threshold = 0.05;
  double window_after_s = 20e-9;
  int periods = 4;
  std::size_t oversample = 4;

  // artifact paths (relative to out_dir unless absolute)
  std::string plan_file = "plan.json";
  std::string dataset_file = "dataset.json";
  std::string archive_file = "archive.json";
};

Json config_to_json(const RunConfig& c);
RunConfig config_from_json(const Json& j, RunConfig base = {});
/// SHA-256 of the config sections that determine a command's output.
std::string config_hash(const RunConfig& c, const std::string& command);

/// Human table and machine-readable document for the index/kernel enumeration.
std::string enumeration_text(int tones, int max_mixing_order);
Json enumeration_json(int tones, int max_mixing_order, const std::string& config_hash);

SweepPlan plan_from_config(const RunConfig& c);

int cmd_enumerate(const RunConfig& c, std::ostream& out);
int cmd_plan(const RunConfig& c, std::ostream& out);
int cmd_probe(const RunConfig& c, std::ostream& out);
int cmd_extract(const RunConfig& c, std::ostream& out);
int cmd_synthesize(const RunConfig& c, std::ostream& out);
int cmd_validate(const RunConfig& c, std::ostream& out);

/// Dispatches a command name; maps InputError to kExitInput.
int run_command(const std::string& command, const RunConfig& c, std::ostream& out, std::ostream& err);

}  // namespace volterra
