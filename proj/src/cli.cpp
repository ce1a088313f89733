#include "volterra/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "volterra/errors.hpp"
#include "volterra/synthesizer.hpp"

namespace volterra {

namespace fs = std::filesystem;

namespace {

fs::path artifact(const RunConfig& c, const std::string& name) {
  const fs::path p(name);
  return p.is_absolute() ? p : fs::path(c.out_dir) / p;
}

void write_json(const fs::path& path, const Json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::vector<int> as_vector(const FrequencyIndex& k) { return {k.values().begin(), k.values().end()}; }

Json plan_section(const RunConfig& c) {
  Json axes = Json::array();
  for (const auto& a : c.axes) axes.push_back({{"start", a.start}, {"step", a.step}, {"count", a.count}});
  return Json{{"preset", c.plan_preset}, {"stride", c.plan_stride},       {"max_points", c.plan_max_points},
              {"levels_dbm", c.levels_dbm}, {"n_extra", c.n_extra},     {"delta_f_hz", c.delta_f_hz},
              {"z0", c.z0},                 {"max_mixing_order", c.max_mixing_order}, {"axes", axes},
              {"seed", c.seed}};
}

Json system_section(const RunConfig& c) { return Json{{"id", c.system}}; }

Json probe_section(const RunConfig& c) {
  return Json{{"mode", c.probe_mode},
              {"analytic_truncation", c.analytic_truncation},
              {"samples", c.capture_samples},
              {"settle_s", c.settle_s}};
}

Json stimulus_section(const RunConfig& c) {
  return Json{{"pulse_v0", c.pulse_v0},   {"rise_s", c.rise_s},         {"width_s", c.width_s},
              {"fall_s", c.fall_s},       {"period_factor", c.period_factor}, {"bin_cap", c.bin_cap},
              {"max_bins", c.max_bins},   {"samples", c.synth_samples}};
}

Json validate_section(const RunConfig& c) {
  return Json{{"nrmse_threshold", c.nrmse_threshold},
              {"window_after_s", c.window_after_s},
              {"periods", c.periods},
              {"oversample", c.oversample}};
}

PiecewiseLinear pulse_of(const RunConfig& c) { return trapezoid_pulse(c.pulse_v0, c.rise_s, c.width_s, c.fall_s); }

DiscreteSpectrum stimulus_spectrum(const RunConfig& c, const PiecewiseLinear& pulse) {
  SpectrumSettings ss;
  ss.bin_cap = c.bin_cap;
  ss.max_bins = c.max_bins;
  return spectrum_of(pulse, c.period_factor * pulse.support(), ss);
}

SynthesisSettings synthesis_settings(const RunConfig& c) {
  SynthesisSettings s;
  s.samples = c.synth_samples;
  return s;
}

struct KernelError {
  double pointwise = 0.0;  // max |H - H_ref| / |H_ref| over points with |H_ref| > 1e-6 max
  double normalized = 0.0; // max |H - H_ref| / max |H_ref|
};

KernelError kernel_error(const KernelGrid& g, const KernelOracle& oracle) {
  double peak = 0.0;
  std::vector<std::pair<std::complex<double>, std::complex<double>>> pairs;
  for (const auto& [key, acc] : g.samples()) {
    std::vector<double> f;
    for (auto u : key) f.push_back(static_cast<double>(u) * g.delta_f_hz());
    const auto ref = oracle(f);
    peak = std::max(peak, std::abs(ref));
    pairs.emplace_back(acc.value(), ref);
  }
  KernelError e;
  for (const auto& [v, ref] : pairs) {
    const double d = std::abs(v - ref);
    if (peak > 0.0) e.normalized = std::max(e.normalized, d / peak);
    if (std::abs(ref) > 1e-6 * peak) e.pointwise = std::max(e.pointwise, d / std::abs(ref));
  }
  return e;
}

// Largest deviation from exact permutation / conjugate symmetry of stored samples.
double symmetry_audit(const KernelSetArchive& archive, std::uint64_t seed) {
  double worst = 0.0;
  std::mt19937_64 rng(seed);
  for (const auto& g : archive.grids()) {
    for (const auto& [key, acc] : g.samples()) {
      const auto v = acc.value();
      Coordinate perm = key;
      std::shuffle(perm.begin(), perm.end(), rng);
      Coordinate neg = perm;
      for (auto& x : neg) x = -x;
      const auto p = g.query_exact_units(perm);
      const auto q = g.query_exact_units(neg);
      if (!p || !q) return std::numeric_limits<double>::infinity();
      const double scale = std::max(std::abs(v), 1e-300);
      worst = std::max({worst, std::abs(*p - v) / scale, std::abs(*q - std::conj(v)) / scale});
    }
  }
  return worst;
}

// max |y_n(alpha u) - alpha^n y_n(u)| / max |alpha^n y_n(u)|
double scaling_audit(const KernelSetArchive& archive, const DiscreteSpectrum& spec, const SynthesisSettings& ss) {
  const double alpha = 0.5;
  double worst = 0.0;
  const DiscreteSpectrum half = spec.scaled(alpha);
  for (int n = 1; n <= archive.max_order(); ++n) {
    const auto a = synthesize_order(archive, spec, n, ss).y;
    const auto b = synthesize_order(archive, half, n, ss).y;
    const double f = std::pow(alpha, n);
    double peak = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      peak = std::max(peak, std::abs(f * a.samples[i]));
      diff = std::max(diff, std::abs(b.samples[i] - f * a.samples[i]));
    }
    if (peak > 0.0) worst = std::max(worst, diff / peak);
  }
  return worst;
}

}  // namespace

Json config_to_json(const RunConfig& c) {
  return Json{{"out_dir", c.out_dir},
              {"jobs", c.jobs},
              {"seed", c.seed},
              {"enumerate", {{"tones", c.tones}, {"max_mixing_order", c.max_mixing_order}}},
              {"plan", plan_section(c)},
              {"system", system_section(c)},
              {"probe", probe_section(c)},
              {"extract", settings_json(c.extraction)},
              {"synthesize", stimulus_section(c)},
              {"validate", validate_section(c)},
              {"paths", {{"plan", c.plan_file}, {"dataset", c.dataset_file}, {"archive", c.archive_file}}}};
}

RunConfig config_from_json(const Json& j, RunConfig c) {
  try {
    c.out_dir = j.value("out_dir", c.out_dir);
    c.jobs = j.value("jobs", c.jobs);
    c.seed = j.value("seed", c.seed);
    if (j.contains("enumerate")) {
      const auto& e = j.at("enumerate");
      c.tones = e.value("tones", c.tones);
      c.max_mixing_order = e.value("max_mixing_order", c.max_mixing_order);
    }
    if (j.contains("plan")) {
      const auto& p = j.at("plan");
      c.plan_preset = p.value("preset", c.plan_preset);
      c.plan_stride = p.value("stride", c.plan_stride);
      c.plan_max_points = p.value("max_points", c.plan_max_points);
      c.levels_dbm = p.value("levels_dbm", c.levels_dbm);
      c.n_extra = p.value("n_extra", c.n_extra);
      c.delta_f_hz = p.value("delta_f_hz", c.delta_f_hz);
      c.z0 = p.value("z0", c.z0);
      c.max_mixing_order = p.value("max_mixing_order", c.max_mixing_order);
      if (p.contains("axes")) {
        c.axes.clear();
        for (const auto& a : p.at("axes")) {
          c.axes.push_back({a.at("start").get<std::int64_t>(), a.at("step").get<std::int64_t>(),
                            a.at("count").get<std::int64_t>()});
        }
      }
    }
    if (j.contains("system")) c.system = j.at("system").value("id", c.system);
    if (j.contains("probe")) {
      const auto& p = j.at("probe");
      c.probe_mode = p.value("mode", c.probe_mode);
      c.analytic_truncation = p.value("analytic_truncation", c.analytic_truncation);
      c.capture_samples = p.value("samples", c.capture_samples);
      c.settle_s = p.value("settle_s", c.settle_s);
    }
    if (j.contains("extract")) c.extraction = settings_from_json(j.at("extract"));
    if (j.contains("synthesize")) {
      const auto& s = j.at("synthesize");
      c.pulse_v0 = s.value("pulse_v0", c.pulse_v0);
      c.rise_s = s.value("rise_s", c.rise_s);
      c.width_s = s.value("width_s", c.width_s);
      c.fall_s = s.value("fall_s", c.fall_s);
      c.period_factor = s.value("period_factor", c.period_factor);
      c.bin_cap = s.value("bin_cap", c.bin_cap);
      c.max_bins = s.value("max_bins", c.max_bins);
      c.synth_samples = s.value("samples", c.synth_samples);
    }
    if (j.contains("validate")) {
      const auto& v = j.at("validate");
      c.nrmse_threshold = v.value("nrmse_threshold", c.nrmse_threshold);
      c.window_after_s = v.value("window_after_s", c.window_after_s);
      c.periods = v.value("periods", c.periods);
      c.oversample = v.value("oversample", c.oversample);
    }
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      c.plan_file = p.value("plan", c.plan_file);
      c.dataset_file = p.value("dataset", c.dataset_file);
      c.archive_file = p.value("archive", c.archive_file);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed config: ") + e.what());
  }
  return c;
}

std::string config_hash(const RunConfig& c, const std::string& command) {
  Json j{{"command", command}};
  if (command == "enumerate") {
    j["enumerate"] = {{"tones", c.tones}, {"max_mixing_order", c.max_mixing_order}};
  } else {
    j["plan"] = plan_section(c);
    if (command != "plan") {
      j["system"] = system_section(c);
      j["probe"] = probe_section(c);
    }
    if (command == "extract" || command == "validate") j["extract"] = settings_json(c.extraction);
    if (command == "synthesize" || command == "validate") j["synthesize"] = stimulus_section(c);
    if (command == "validate") j["validate"] = validate_section(c);
  }
  return sha256_hex(j.dump());
}

std::string enumeration_text(int tones, int max_mixing_order) {
  std::vector<KernelTable> tables;
  for (int n = 1; n <= max_mixing_order; ++n) tables.push_back(enumerate_kernels_for_order(tones, max_mixing_order, n));
  const auto indices = enumerate_output_indices(tones, max_mixing_order);

  std::ostringstream os;
  os << "output frequencies: " << indices.size() << " (tones " << tones << ", max mixing order "
     << max_mixing_order << ")\n";
  auto row = [&](const std::string& label, const FrequencyIndex& k) {
    os << std::left << std::setw(static_cast<int>(3 * tones + 6)) << label;
    bool first = true;
    for (const auto& t : tables) {
      const auto it = t.find(k);
      if (it == t.end()) continue;
      for (const auto& g : it->second) {
        os << (first ? "" : " ") << format_kernel(g);
        first = false;
      }
    }
    os << '\n';
  };
  for (const auto& k : indices) row(k.to_string(), k);
  row("dc", FrequencyIndex(std::vector<int>(static_cast<std::size_t>(tones), 0)));
  for (std::size_t n = 0; n < tables.size(); ++n) {
    std::size_t freqs = 0, dc = 0;
    for (const auto& [k, g] : tables[n]) {
      if (k.is_dc()) {
        dc += g.size();
      } else {
        ++freqs;
      }
    }
    os << "order " << n + 1 << ": " << kernel_count(tables[n], DcPolicy::exclude) << " kernels at " << freqs
       << " frequencies";
    if (dc > 0) os << " (+" << dc << " at dc)";
    os << ", " << count_terms(tones, static_cast<int>(n) + 1) << " summands\n";
  }
  return os.str();
}

Json enumeration_json(int tones, int max_mixing_order, const std::string& hash) {
  Json j = envelope("volterra-enumeration", hash);
  j["tones"] = tones;
  j["max_mixing_order"] = max_mixing_order;
  std::vector<KernelTable> tables;
  for (int n = 1; n <= max_mixing_order; ++n) tables.push_back(enumerate_kernels_for_order(tones, max_mixing_order, n));
  auto entry = [&](const FrequencyIndex& k) {
    Json kernels = Json::array();
    for (const auto& t : tables) {
      const auto it = t.find(k);
      if (it == t.end()) continue;
      for (const auto& g : it->second) {
        kernels.push_back({{"order", g.order}, {"r", g.r}, {"label", format_kernel(g)},
                           {"multiplicity", term_multiplicity(g)}});
      }
    }
    return Json{{"k", as_vector(k)}, {"mixing_order", k.mixing_order()}, {"kernels", kernels}};
  };
  Json freqs = Json::array();
  for (const auto& k : enumerate_output_indices(tones, max_mixing_order)) freqs.push_back(entry(k));
  j["frequencies"] = freqs;
  j["dc"] = entry(FrequencyIndex(std::vector<int>(static_cast<std::size_t>(tones), 0)));
  Json counts = Json::array();
  for (std::size_t n = 0; n < tables.size(); ++n) {
    counts.push_back({{"order", n + 1},
                      {"kernels", kernel_count(tables[n], DcPolicy::exclude)},
                      {"dc_kernels", kernel_count(tables[n], DcPolicy::include) - kernel_count(tables[n], DcPolicy::exclude)},
                      {"summands", count_terms(tones, static_cast<int>(n) + 1)}});
  }
  j["counts"] = counts;
  return j;
}

SweepPlan plan_from_config(const RunConfig& c) {
  SweepPlan p;
  if (c.plan_preset == "table2") {
    p = build_table2_plan();
  } else if (c.plan_preset == "custom") {
    if (c.axes.empty()) throw InputError("custom plan needs axes");
    p.id = "custom";
    p.axes = c.axes;
    p.delta_f_hz = c.delta_f_hz;
    p.max_mixing_order = c.max_mixing_order;
    p.levels_dbm = {5.0, 10.0};
  } else {
    throw InputError("unknown plan preset '" + c.plan_preset + "'");
  }
  p.z0 = c.z0;
  p.seed = c.seed;
  if (c.plan_stride != 1 || c.plan_max_points > 0) p = thin_plan(p, c.plan_stride, c.plan_max_points);
  std::vector<double> levels = c.levels_dbm.empty() ? p.levels_dbm : c.levels_dbm;
  return with_levels(std::move(p), std::move(levels), c.n_extra);
}

int cmd_enumerate(const RunConfig& c, std::ostream& out) {
  if (c.tones < 1 || c.max_mixing_order < 1) throw InputError("tones and max mixing order must be at least 1");
  const std::string text = enumeration_text(c.tones, c.max_mixing_order);
  const std::string stem = "enumerate_" + std::to_string(c.tones) + "_" + std::to_string(c.max_mixing_order);
  write_file_atomic(artifact(c, stem + ".txt"), text);
  write_json(artifact(c, stem + ".json"), enumeration_json(c.tones, c.max_mixing_order, config_hash(c, "enumerate")));
  out << text;
  return kExitOk;
}

namespace {

int report_plan(const SweepPlan& plan, std::ostream& out) {
  const PlanReport rep = validate_plan(plan);
  out << "plan " << plan.id << ": " << plan.triplet_count() << " triplets, " << plan.amplitudes.size()
      << " amplitude rows, effective resolution " << effective_resolution_hz(plan) / 1e6 << " MHz\n";
  for (const auto& p : rep.problems) out << "  problem: " << p << '\n';
  for (const auto& col : rep.collisions) {
    const auto f = plan.triplet_hz(col.triplet);
    out << "  collision in triplet " << col.triplet << " (" << f[0] / 1e6;
    for (std::size_t m = 1; m < f.size(); ++m) out << ", " << f[m] / 1e6;
    out << " MHz): " << col.k.to_string() << " and " << col.k_prime.to_string() << '\n';
  }
  if (rep.collision_count > rep.collisions.size()) {
    out << "  ... " << rep.collision_count - rep.collisions.size() << " more collisions\n";
  }
  out << (rep.ok ? "plan ok\n" : "plan INVALID\n");
  return rep.ok ? kExitOk : kExitValidation;
}

SweepPlan load_plan(const RunConfig& c) {
  const fs::path p = artifact(c, c.plan_file);
  if (fs::exists(p)) return plan_from_json(read_json(p));
  return plan_from_config(c);
}

}  // namespace

int cmd_plan(const RunConfig& c, std::ostream& out) {
  const SweepPlan plan = plan_from_config(c);
  const int code = report_plan(plan, out);
  if (code == kExitOk) write_json(artifact(c, c.plan_file), plan_to_json(plan, config_hash(c, "plan")));
  return code;
}

int cmd_probe(const RunConfig& c, std::ostream& out) {
  const SweepPlan plan = load_plan(c);
  if (report_plan(plan, out) != kExitOk) return kExitValidation;
  const ReferenceSystem sys = make_system(c.system);
  check_amplitude_bound(plan, saturation_bound(sys));
  SpectralDataset ds;
  if (c.probe_mode == "analytic") {
    ds = generate_dataset_analytic(oracle_kernels(sys), plan, c.analytic_truncation, c.jobs);
  } else if (c.probe_mode == "transient") {
    ProbeSettings ps;
    ps.capture.samples = c.capture_samples;
    ps.capture.settle_s = c.settle_s;
    ps.jobs = c.jobs;
    ds = generate_dataset(sys, plan, ps);
  } else {
    throw InputError("unknown probe mode '" + c.probe_mode + "'");
  }
  write_json(artifact(c, c.dataset_file), dataset_to_json(ds, config_hash(c, "probe")));
  out << "probed " << system_id(sys) << ": " << ds.blocks().size() << " operating points x " << ds.indices().size()
      << " indices (" << ds.capture.source << ")\n";
  return kExitOk;
}

int cmd_extract(const RunConfig& c, std::ostream& out) {
  const SweepPlan plan = load_plan(c);
  const SpectralDataset ds = dataset_from_json(read_json(artifact(c, c.dataset_file)));
  ExtractionSettings es = c.extraction;
  es.jobs = c.jobs;
  ExtractionResult res = extract(ds, plan, es);
  ArchiveMetadata meta = res.archive.metadata();
  meta.system_id = c.system;
  KernelSetArchive archive(meta, res.archive.grids());
  Json j = archive_to_json(archive, config_hash(c, "extract"));
  j["completeness"] = report_to_json(res.report);
  write_json(artifact(c, c.archive_file), j);
  const auto& r = res.report;
  out << "solved " << r.solved << " of " << r.systems << " systems (" << std::setprecision(4)
      << 100.0 * r.resolved_fraction() << "%), " << r.warnings << " residual warnings, max condition "
      << r.max_condition << '\n';
  for (std::size_t n = 0; n < r.points_per_order.size(); ++n) {
    out << "  H" << n + 1 << ": " << r.points_per_order[n] << " canonical points\n";
  }
  for (std::size_t i = 0; i < std::min<std::size_t>(r.failures.size(), 10); ++i) {
    out << "  failed: triplet " << r.failures[i].triplet << " " << r.failures[i].k.to_string() << ": "
        << r.failures[i].reason << '\n';
  }
  return r.success ? kExitOk : kExitValidation;
}

int cmd_synthesize(const RunConfig& c, std::ostream& out) {
  const KernelSetArchive archive = archive_from_json(read_json(artifact(c, c.archive_file)));
  const PiecewiseLinear pulse = pulse_of(c);
  const DiscreteSpectrum spec = stimulus_spectrum(c, pulse);
  const OrderedResponse r = synthesize_total(archive, spec, synthesis_settings(c));
  write_file_atomic(artifact(c, "synthesis.csv"), waveforms_csv(r.orders, r.total));
  out << "period " << spec.period * 1e9 << " ns, " << spec.bins.size() << " bins retained, dropped power fraction "
      << spec.dropped_fraction() << '\n';
  for (const auto& d : r.diagnostics) {
    out << "  order " << d.order << ": " << d.bins_used << " bins, " << d.multisets
        << " multisets, beyond-reach power fraction " << d.beyond_reach_power / spec.total_power
        << ", imaginary residue " << d.imag_residue << '\n';
  }
  return kExitOk;
}

int cmd_validate(const RunConfig& c, std::ostream& out) {
  const KernelSetArchive archive = archive_from_json(read_json(artifact(c, c.archive_file)));
  const ReferenceSystem sys = make_system(c.system);
  const PiecewiseLinear pulse = pulse_of(c);
  const DiscreteSpectrum spec = stimulus_spectrum(c, pulse);
  const SynthesisSettings ss = synthesis_settings(c);
  const OrderedResponse pred = synthesize_total(archive, spec, ss);
  const double t_end = pulse.support() + c.window_after_s;
  auto win = [&](const Waveform& y) { return window(y, 0.0, t_end); };

  // Direct runs at alpha = 1, 1/2, 1/4 give the order-separated reference.
  const std::vector<double> alphas{1.0, 0.5, 0.25};
  std::vector<Waveform> direct;
  for (double a : alphas) {
    direct.push_back(periodic_response(sys, scaled(pulse, a), spec.period, c.periods, c.synth_samples, c.oversample));
  }
  const auto parts = separate_orders(direct, alphas);

  Json rep = envelope("volterra-validation", config_hash(c, "validate"));
  rep["system"] = system_id(sys);
  const double total = nrmse(win(pred.total), win(direct[0]));
  const double linear = nrmse(win(pred.orders[0]), win(direct[0]));
  Json per_order = Json::array();
  for (std::size_t n = 0; n < pred.orders.size() && n < parts.size(); ++n) {
    const auto ref = win(parts[n]);
    double lo = 0.0, hi = 0.0;
    for (double v : ref.samples) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    per_order.push_back(hi > lo ? Json(nrmse(win(pred.orders[n]), ref)) : Json(nullptr));
  }
  rep["nrmse_total"] = total;
  rep["nrmse_linear_only"] = linear;
  rep["nrmse_per_order"] = per_order;
  rep["linear_only_pass"] = linear <= c.nrmse_threshold;

  Json kernels = Json::array();
  if (system_id(sys) == "benchmark") {
    const KernelOracle oracle = oracle_kernels(sys);
    for (const auto& g : archive.grids()) {
      const KernelError e = kernel_error(g, oracle);
      kernels.push_back({{"order", g.order()}, {"max_pointwise", e.pointwise}, {"max_normalized", e.normalized}});
    }
  }
  rep["kernel_errors"] = kernels;
  const double sym = symmetry_audit(archive, c.seed);
  const double scale = scaling_audit(archive, spec, ss);
  rep["symmetry_deviation"] = sym;
  rep["scaling_deviation"] = scale;
  const bool pass = total <= c.nrmse_threshold && sym == 0.0 && scale <= 1e-12;
  rep["pass"] = pass;
  write_json(artifact(c, "validation.json"), rep);
  write_file_atomic(artifact(c, "validation.csv"), waveforms_csv(pred.orders, pred.total));
  write_file_atomic(artifact(c, "direct.csv"), waveforms_csv(parts, direct[0]));

  out << std::setprecision(4) << "total NRMSE " << 100.0 * total << "% (threshold " << 100.0 * c.nrmse_threshold
      << "%), linear-only " << 100.0 * linear << "%" << (linear > c.nrmse_threshold ? " [fails]" : "") << '\n';
  out << "symmetry deviation " << sym << ", scaling deviation " << scale << '\n';
  out << (pass ? "validation PASS\n" : "validation FAIL\n");
  return pass ? kExitOk : kExitValidation;
}

int run_command(const std::string& command, const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    if (command == "enumerate") return cmd_enumerate(c, out);
    if (command == "plan") return cmd_plan(c, out);
    if (command == "probe") return cmd_probe(c, out);
    if (command == "extract") return cmd_extract(c, out);
    if (command == "synthesize") return cmd_synthesize(c, out);
    if (command == "validate") return cmd_validate(c, out);
    err << "unknown command '" << command << "'\n";
    return kExitInput;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace volterra
