#pragma once

// Multi-tone probing: fixed-step transient simulation of a reference system,
// bin-exact phasor capture, and assembly of spectral datasets (plus an
// analytic generator that evaluates the phasor expansion from known kernels).

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "volterra/mixing_index.hpp"
#include "volterra/reference_systems.hpp"
#include "volterra/sweep_planner.hpp"

namespace volterra {

struct Waveform {
  std::vector<double> samples;
  double dt = 0.0;
  double t0 = 0.0;

  std::size_t size() const { return samples.size(); }
  double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
  /// Linear interpolation, zero outside the sampled span.
  double at(double t) const;
};

/// Real tones sum_m V_m cos(2 pi f_m t), zero phase.
struct ToneSet {
  std::vector<double> freq_hz;
  std::vector<double> amplitude;
};

/// Knots (t, v) joined linearly; zero outside unless period > 0, in which
/// case the knot span [t.front(), t.front() + period) repeats.
struct PiecewiseLinear {
  std::vector<double> t;
  std::vector<double> v;
  double period = 0.0;

  double value(double time) const;
  double support() const { return t.empty() ? 0.0 : t.back() - t.front(); }
};

PiecewiseLinear trapezoid_pulse(double v0, double rise, double width, double fall, double t0 = 0.0);
PiecewiseLinear scaled(PiecewiseLinear p, double alpha);

using Stimulus = std::variant<ToneSet, PiecewiseLinear, Waveform>;

/// Input values at every half step t = i*dt/2, i = 0..2*steps.
std::vector<double> half_step_samples(const Stimulus& input, double dt, std::size_t steps);

/// Fixed-step RK4 from rest; the output is sampled at every step (steps + 1
/// samples). Throws NumericalError if the state norm exceeds 1e6 x the input scale.
Waveform transient(const ReferenceSystem& sys, const Stimulus& input, double duration, double dt);

/// Steady-state response to `input` repeated with `period`: integrates
/// `periods` periods at dt = period / (samples * oversample) and returns the
/// last period on `samples` points, timed from the period start.
Waveform periodic_response(const ReferenceSystem& sys, const PiecewiseLinear& input, double period, int periods,
                           std::size_t samples, std::size_t oversample);

struct CaptureSettings {
  std::size_t samples = 0;  // per record; 0: smallest power of two >= max(20 f_max, 25 / tau_fast) T
  double settle_s = -1.0;   // < 0 picks max(50 tau, 200 ns) rounded up to whole steps
};

struct ProbeTiming {
  double record_s = 0.0;
  double dt = 0.0;
  std::size_t record_samples = 0;
  std::size_t settle_samples = 0;
};

ProbeTiming probe_timing(const ReferenceSystem& sys, const SweepPlan& plan, const CaptureSettings& cs);

using PhasorMap = std::map<FrequencyIndex, std::complex<double>>;

/// DFT of exactly one record after `settle`; B at each canonical index with
/// |k|_1 <= M0 (DC included) is the e^{j 2 pi f t} coefficient referred to t = 0.
PhasorMap capture_phasors(const Waveform& y, std::span<const double> tone_hz, int max_mixing_order,
                          double settle_s, double record_s);

struct CaptureInfo {
  std::string source;  // "transient" or "analytic"
  double sample_rate_hz = 0.0;
  double record_s = 0.0;
  double settle_s = 0.0;
  int truncation = 0;  // analytic only
};

class SpectralDataset {
 public:
  using Block = std::vector<std::complex<double>>;  // aligned with indices()
  using Key = std::pair<std::size_t, std::size_t>;   // (triplet, amplitude row)

  SpectralDataset() = default;
  SpectralDataset(std::string plan_id, int tones, int max_mixing_order);

  const std::string& plan_id() const { return plan_id_; }
  int tones() const { return tones_; }
  int max_mixing_order() const { return max_mixing_order_; }
  const std::vector<FrequencyIndex>& indices() const { return indices_; }
  std::optional<std::size_t> position(const FrequencyIndex& canonical) const;

  CaptureInfo capture;
  std::vector<std::vector<double>> amplitudes;          // schedule rows
  std::vector<std::vector<std::int64_t>> triplets;      // tone frequencies, resolution units
  double delta_f_hz = 0.0;

  void set_block(std::size_t triplet, std::size_t amp, Block b);
  const Block* block(std::size_t triplet, std::size_t amp) const;
  void erase_block(std::size_t triplet, std::size_t amp) { blocks_.erase({triplet, amp}); }
  const std::map<Key, Block>& blocks() const { return blocks_; }

  /// Any sign of k; conjugates when k is not canonical.
  std::optional<std::complex<double>> phasor(std::size_t triplet, std::size_t amp, const FrequencyIndex& k) const;

 private:
  std::string plan_id_;
  int tones_ = 0;
  int max_mixing_order_ = 0;
  std::vector<FrequencyIndex> indices_;
  std::map<FrequencyIndex, std::size_t> position_;
  std::map<Key, Block> blocks_;
};

struct ProbeSettings {
  CaptureSettings capture;
  int jobs = 1;
};

/// One transient run per (triplet, schedule row). Requires a valid plan.
SpectralDataset generate_dataset(const ReferenceSystem& sys, const SweepPlan& plan, const ProbeSettings& ps = {});

/// Evaluates the phasor expansion with oracle kernels of orders 1..truncation.
SpectralDataset generate_dataset_analytic(const KernelOracle& oracle, const SweepPlan& plan, int truncation,
                                          int jobs = 1);

}  // namespace volterra
