// End-to-end acceptance run: one PASS/FAIL line per criterion, exit status 1
// if any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "volterra/extractor.hpp"
#include "volterra/mixing_index.hpp"
#include "volterra/synthesizer.hpp"

using namespace volterra;
using cd = std::complex<double>;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

std::vector<double> hz_of(const Coordinate& key, double df) {
  std::vector<double> f;
  for (auto u : key) f.push_back(static_cast<double>(u) * df);
  return f;
}

struct Pipeline {
  SweepPlan plan;
  SpectralDataset data;
  ExtractionResult result;
  double probe_s = 0.0;
};

Pipeline run_transient(const ReferenceSystem& sys, const SweepPlan& plan) {
  Pipeline p;
  p.plan = plan;
  ProbeSettings ps;
  ps.jobs = jobs();
  const auto t0 = std::chrono::steady_clock::now();
  p.data = generate_dataset(sys, plan, ps);
  p.probe_s = seconds_since(t0);
  ExtractionSettings es;
  es.jobs = jobs();
  p.result = extract(p.data, plan, es);
  return p;
}

double rms(const Waveform& a, const Waveform& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) s += (a.samples[i] - b.samples[i]) * (a.samples[i] - b.samples[i]);
  return std::sqrt(s / static_cast<double>(b.size()));
}

constexpr double kPeriod = 28e-9;
constexpr double kWindowEnd = 27e-9;  // pulse support plus 20 ns

// ---------------------------------------------------------------------------

Outcome enumeration() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto idx = enumerate_output_indices(3, 3);
  const auto t1 = enumerate_kernels_for_order(3, 3, 1);
  const auto t2 = enumerate_kernels_for_order(3, 3, 2);
  const auto t3 = enumerate_kernels_for_order(3, 3, 3);
  const std::size_t n1 = kernel_count(t1, DcPolicy::exclude);
  const std::size_t n2 = kernel_count(t2, DcPolicy::exclude);
  const std::size_t n3 = kernel_count(t3, DcPolicy::exclude);
  bool listed = false;
  if (const auto it = t3.find(FrequencyIndex{1, 1, 1}); it != t3.end()) {
    listed = it->second.size() == 1 && format_kernel(it->second.front()) == "H3(w1,w2,w3)";
  }
  const double dt = seconds_since(t0);
  return {idx.size() == 31 && n1 == 3 && n2 == 9 && n3 == 28 && listed && dt < 1.0,
          std::to_string(n1) + "/" + std::to_string(n2) + "/" + std::to_string(n3) + " kernels, " +
              std::to_string(idx.size()) + " frequencies, " + fmt(dt * 1e3) + " ms"};
}

Outcome plan_validity() {
  const auto t0 = std::chrono::steady_clock::now();
  const SweepPlan plan = build_table2_plan();
  const PlanReport rep = validate_plan(plan);
  const bool axes = plan.axes[0].stop() == 2047 && plan.axes[1].stop() == 2081 && plan.axes[2].stop() == 2127 &&
                    plan.axes[0].count == 18 && plan.delta_f_hz == 1e6;

  // Exhaustive integer check over the full cube for the 18 aligned triplets.
  std::size_t cube_collisions = 0;
  for (std::int64_t i = 0; i < 18; ++i) {
    const std::int64_t f[] = {plan.axes[0].at(i), plan.axes[1].at(i), plan.axes[2].at(i)};
    std::set<std::int64_t> seen;
    for (int a = -3; a <= 3; ++a)
      for (int b = -3; b <= 3; ++b)
        for (int c = -3; c <= 3; ++c)
          if (!seen.insert(a * f[0] + b * f[1] + c * f[2]).second) ++cube_collisions;
  }

  SweepPlan bad = plan;
  bad.axes = {{100, 120, 18}, {200, 240, 18}, {87, 120, 18}};  // f2 = 2 f1 on the aligned triplets
  const PlanReport bad_rep = validate_plan(bad);
  const double dt = seconds_since(t0);
  return {rep.ok && axes && cube_collisions == 0 && !bad_rep.ok && dt < 10.0,
          std::to_string(plan.triplet_count()) + " triplets collision-free, 18 aligned triplets clean over {-3..3}^3, "
              "commensurate plan: " + std::to_string(bad_rep.collision_count) + " collisions, " + fmt(dt) + " s"};
}

Outcome oracle_round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  const ReferenceSystem sys = make_system("benchmark");
  const KernelOracle h = oracle_kernels(sys);
  const SweepPlan plan = build_table2_plan();
  const SpectralDataset ds = generate_dataset_analytic(h, plan, 3, jobs());
  ExtractionSettings es;
  es.jobs = jobs();
  const ExtractionResult r = extract(ds, plan, es);
  double worst = 0.0;
  std::size_t points = 0;
  for (const auto& g : r.archive.grids()) {
    for (const auto& [key, acc] : g.samples()) {
      const cd ref = h(hz_of(key, g.delta_f_hz()));
      worst = std::max(worst, std::abs(acc.value() - ref) / std::abs(ref));
      ++points;
    }
  }
  const double dt = seconds_since(t0);
  return {r.report.solved == r.report.systems && worst <= 1e-6 && dt < 60.0,
          std::to_string(points) + " lattice points, max relative error " + fmt(worst) + ", " + fmt(dt) + " s"};
}

Outcome simulated_extraction(const Pipeline& p, const BenchmarkSystem& sys) {
  const KernelOracle h = oracle_kernels(sys);
  const auto& ar = p.result.archive;
  const double df = ar.grid(1).delta_f_hz();
  double e1 = 0.0;
  for (const auto& [key, acc] : ar.grid(1).samples()) {
    const cd ref = transfer_hz(sys.ha, static_cast<double>(key[0]) * df);
    e1 = std::max(e1, std::abs(acc.value() - ref) / std::abs(ref));
  }
  double e2 = 0.0;
  for (const auto& [key, acc] : ar.grid(2).samples()) {
    const cd ref = h(hz_of(key, df));
    e2 = std::max(e2, std::abs(acc.value() - ref) / std::abs(ref));
  }
  // H3 slice: points with one argument at the third-axis tone nearest 0.5 GHz.
  const auto& ax = p.plan.axes[2];
  std::int64_t w3 = ax.start;
  for (std::int64_t i = 0; i < ax.count; ++i) {
    if (std::abs(ax.at(i) - 500) < std::abs(w3 - 500)) w3 = ax.at(i);
  }
  double e3 = 0.0, e3_all = 0.0;
  std::size_t slice = 0;
  for (const auto& [key, acc] : ar.grid(3).samples()) {
    const cd ref = h(hz_of(key, df));
    const double e = std::abs(acc.value() - ref) / std::abs(ref);
    e3_all = std::max(e3_all, e);
    if (std::find_if(key.begin(), key.end(), [&](std::int64_t u) { return std::abs(u) == w3; }) != key.end()) {
      e3 = std::max(e3, e);
      ++slice;
    }
  }
  return {p.result.report.success && e1 <= 0.02 && e2 <= 0.05 && e3 <= 0.05 && slice > 0,
          "H1 " + fmt(e1) + " vs ladder, H2 " + fmt(e2) + ", H3 slice at " + std::to_string(w3) + " MHz " + fmt(e3) +
              " (" + std::to_string(slice) + " points; all H3 " + fmt(e3_all) + "), probing " + fmt(p.probe_s) + " s"};
}

Outcome symmetry(const Pipeline& p) {
  const auto& ar = p.result.archive;
  const double df = ar.grid(1).delta_f_hz();
  const KernelGrid& g2 = ar.grid(2);
  const KernelGrid& g3 = ar.grid(3);
  double store2 = 0.0;
  for (const auto& [key, acc] : g2.samples()) {
    const std::int64_t swap[] = {key[1], key[0]};
    const std::int64_t mirror[] = {-key[1], -key[0]};
    store2 = std::max(store2, std::abs(*g2.query_exact_units(swap) - acc.value()));
    store2 = std::max(store2, std::abs(*g2.query_exact_units(mirror) - std::conj(acc.value())));
  }
  // Off-lattice queries keep both symmetries of the second-order kernel.
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-2.1e9, 2.1e9);
  double interp2 = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double a = u(rng), b = u(rng);
    const double f[] = {a, b}, s[] = {b, a}, m[] = {-b, -a};
    const cd q = g2.query_interpolated(f);
    const double scale = std::max(std::abs(q), 1e-300);
    interp2 = std::max({interp2, std::abs(g2.query_interpolated(s) - q) / scale,
                        std::abs(g2.query_interpolated(m) - std::conj(q)) / scale});
  }
  // Fixed-w3 slice of H3: the swap of the free arguments is exact, the
  // mirror (x, y) -> (-y, -x) is not a symmetry of the slice.
  const double w3 = static_cast<double>(p.plan.axes[2].at(1)) * df;
  double swap3 = 0.0, mirror3 = 0.0;
  std::uniform_real_distribution<double> v(-1.5e9, 1.5e9);
  for (int i = 0; i < 2000; ++i) {
    const double x = v(rng), y = v(rng);
    const double f[] = {x, y, w3}, s[] = {y, x, w3}, m[] = {-y, -x, w3};
    const cd q = g3.query_interpolated(f);
    if (std::abs(q) < 1e-9) continue;
    swap3 = std::max(swap3, std::abs(g3.query_interpolated(s) - q) / std::abs(q));
    mirror3 = std::max(mirror3, std::abs(g3.query_interpolated(m) - std::conj(q)) / std::abs(q));
  }
  return {store2 == 0.0 && interp2 <= 1e-12 && swap3 <= 1e-12 && mirror3 > 1e-2,
          "H2 stored deviation " + fmt(store2) + ", interpolated " + fmt(interp2) + "; H3 slice swap " + fmt(swap3) +
              ", mirror " + fmt(mirror3) + " (no second symmetry)"};
}

Outcome order_scaling(const Pipeline& pulse) {
  // Probe a small plan at {7, 10} dBm and compare the all-low and all-high rows.
  const ReferenceSystem sys = make_system("benchmark");
  const SweepPlan plan = with_levels(thin_plan(build_table2_plan(), 6), {7.0, 10.0});
  ProbeSettings ps;
  ps.jobs = jobs();
  const SpectralDataset ds = generate_dataset(sys, plan, ps);
  const std::size_t lo = 0, hi = 7;
  if (plan.amplitudes[lo] != std::vector<double>(3, dbm_to_volts(7.0, 50.0)) ||
      plan.amplitudes[hi] != std::vector<double>(3, dbm_to_volts(10.0, 50.0))) {
    return {false, "unexpected schedule layout"};
  }
  double dev2 = 0.0, dev3 = 0.0;
  for (std::size_t t = 0; t < plan.triplet_count(); ++t) {
    for (const auto& k : ds.indices()) {
      const int m = k.mixing_order();
      if (m < 2) continue;
      const double drop = 20.0 * std::log10(std::abs(*ds.phasor(t, hi, k)) / std::abs(*ds.phasor(t, lo, k)));
      if (m == 2) dev2 = std::max(dev2, std::abs(drop - 6.0));
      if (m == 3) dev3 = std::max(dev3, std::abs(drop - 9.0));
    }
  }
  // Synthesizer: y_n(alpha u) = alpha^n y_n(u).
  const DiscreteSpectrum s = spectrum_of(trapezoid_pulse(1.0, 1e-9, 5e-9, 1e-9), kPeriod);
  const double alpha = std::sqrt(0.5);
  SynthesisSettings set;
  set.samples = 1792;
  double synth = 0.0;
  for (int n = 1; n <= 3; ++n) {
    const auto a = synthesize_order(pulse.result.archive, s, n, set).y;
    const auto b = synthesize_order(pulse.result.archive, s.scaled(alpha), n, set).y;
    const double f = std::pow(alpha, n);
    double pk = 0.0, d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      pk = std::max(pk, std::abs(f * a.samples[i]));
      d = std::max(d, std::abs(b.samples[i] - f * a.samples[i]));
    }
    synth = std::max(synth, d / pk);
  }
  return {dev2 <= 0.1 && dev3 <= 0.1 && synth <= 1e-12,
          "second-order drop 6 dB +/- " + fmt(dev2) + ", third-order 9 dB +/- " + fmt(dev3) +
              ", synthesizer scaling deviation " + fmt(synth)};
}

Outcome pulse_benchmark(const Pipeline& p, const ReferenceSystem& sys) {
  const PiecewiseLinear pulse = trapezoid_pulse(1.0, 1e-9, 5e-9, 1e-9);
  const DiscreteSpectrum s = spectrum_of(pulse, kPeriod);
  SynthesisSettings set;
  set.samples = 1792;
  const OrderedResponse r = synthesize_total(p.result.archive, s, set);
  const Waveform direct = periodic_response(sys, pulse, kPeriod, 4, 1792, 4);
  auto w = [](const Waveform& y) { return window(y, 0.0, kWindowEnd); };
  const double total = nrmse(w(r.total), w(direct));
  const double linear = nrmse(w(r.orders[0]), w(direct));
  return {total <= 0.05 && linear >= 3.0 * total,
          "NRMSE " + fmt(100 * total) + "%, first-order only " + fmt(100 * linear) + "% (" + fmt(linear / total) +
              "x), " + std::to_string(s.bins.size()) + " bins, probing " + fmt(p.probe_s) + " s"};
}

Outcome surrogate(const ReferenceSystem& sys) {
  const SweepPlan plan = with_levels(thin_plan(build_table2_plan(), 1, 8), {-20.0, -14.0});
  check_amplitude_bound(plan, saturation_bound(sys));
  const Pipeline p = run_transient(sys, plan);
  const auto& ar = p.result.archive;
  auto peak = [&](int n) {
    double m = 0.0;
    for (const auto& [key, acc] : ar.grid(n).samples()) m = std::max(m, std::abs(acc.value()));
    return m;
  };
  const double even = peak(2) / std::min(peak(1), peak(3));

  const PiecewiseLinear pulse = trapezoid_pulse(0.2, 1e-9, 5e-9, 1e-9);
  const DiscreteSpectrum s = spectrum_of(pulse, kPeriod);
  SynthesisSettings set;
  set.samples = 1792;
  auto w = [](const Waveform& y) { return window(y, 0.0, kWindowEnd); };
  std::vector<double> nrmses, residuals;
  for (double a : {1.0, 0.5, 0.25}) {
    const OrderedResponse r = synthesize_total(ar, s.scaled(a), set);
    const Waveform direct = periodic_response(sys, scaled(pulse, a), kPeriod, 4, 1792, 4);
    nrmses.push_back(nrmse(w(r.total), w(direct)));
    residuals.push_back(rms(w(r.total), w(direct)));
  }
  const bool monotone = residuals[1] < residuals[0] && residuals[2] < residuals[1];
  return {p.result.report.success && even <= 1e-3 && nrmses[0] <= 0.10 && monotone,
          "even/odd kernel ratio " + fmt(even) + ", NRMSE at 0.2/0.1/0.05 V: " + fmt(100 * nrmses[0]) + "%/" +
              fmt(100 * nrmses[1]) + "%/" + fmt(100 * nrmses[2]) + "%, RMS residual " + fmt(residuals[0]) + " > " +
              fmt(residuals[1]) + " > " + fmt(residuals[2]) + " V, probing " + fmt(p.probe_s) + " s"};
}

Outcome property_suite() {
  const std::string cmd = std::string(UNIT_TESTS_PATH) + " --no-intro --minimal > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  const bool ok = WIFEXITED(rc) && WEXITSTATUS(rc) == 0;
  return {ok, ok ? "unit and property suite passed" : "unit and property suite failed, rerun unit_tests for details"};
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  int failures = 0;
  auto report = [&](int n, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << "criterion " << n << " " << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail
              << std::endl;
  };

  const ReferenceSystem bench = make_system("benchmark");
  const BenchmarkSystem& bsys = std::get<BenchmarkSystem>(bench);

  report(1, "enumeration", enumeration);
  report(2, "plan validity", plan_validity);
  report(3, "oracle round trip", oracle_round_trip);

  // Six points per axis for the kernel checks, eight consecutive points for the pulse.
  const Pipeline coarse = run_transient(bench, thin_plan(build_table2_plan(), 3));
  const Pipeline dense = run_transient(bench, thin_plan(build_table2_plan(), 1, 8));
  report(4, "simulated-data extraction", [&] { return simulated_extraction(coarse, bsys); });
  report(5, "symmetry audit", [&] { return symmetry(coarse); });
  report(6, "order scaling", [&] { return order_scaling(dense); });
  report(7, "time-domain pulse", [&] { return pulse_benchmark(dense, bench); });
  report(8, "surrogate amplifier", [&] { return surrogate(make_system("surrogate")); });
  report(9, "property suite", property_suite);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << " in "
            << fmt(seconds_since(start)) << " s" << std::endl;
  return failures == 0 ? 0 : 1;
}
