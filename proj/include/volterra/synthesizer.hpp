#pragma once

// Time-domain prediction from a kernel archive. The input is treated as one
// period of a periodic signal; order-n output spectra are accumulated on
// sum-frequency bins from kernel values at every multiset of retained bins.

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "volterra/kernel_store.hpp"
#include "volterra/probing.hpp"

namespace volterra {

/// Two-sided Fourier series c_k of a T-periodic real signal; stored for k >= 1
/// with c_{-k} = conj(c_k) implied and c_0 real.
struct DiscreteSpectrum {
  double period = 0.0;
  double c0 = 0.0;
  std::vector<int> bins;                     // ascending positive bin numbers
  std::vector<std::complex<double>> coeffs;  // aligned with bins
  double total_power = 0.0;                  // mean square of the full signal
  double dropped_power = 0.0;                // mean square of what was not retained

  std::complex<double> coefficient(int k) const;
  double dropped_fraction() const { return total_power > 0.0 ? dropped_power / total_power : 0.0; }
  DiscreteSpectrum scaled(double alpha) const;
};

struct SpectrumSettings {
  double bin_cap = 1e-4;  // drop |c_k| below bin_cap * max |c|
  int max_bins = 200;     // per sign
  int scan_bins = 4000;   // candidates examined
};

/// Exact Fourier coefficients of a piecewise-linear signal over one period.
DiscreteSpectrum spectrum_of(const PiecewiseLinear& input, double period, const SpectrumSettings& s = {});
/// DFT coefficients of one period of a sampled waveform (the samples span T).
DiscreteSpectrum spectrum_of(const Waveform& input, const SpectrumSettings& s = {});

struct SynthesisSettings {
  std::size_t samples = 1024;              // output samples over one period
  std::size_t max_multisets = 20'000'000;  // guard; bins are trimmed by magnitude past it
  std::optional<std::uint64_t> shuffle_seed;
};

struct OrderDiagnostics {
  int order = 0;
  std::size_t bins_used = 0;       // per sign, after reach and guard trimming
  std::size_t multisets = 0;
  double beyond_reach_power = 0.0; // input power in bins the kernels cannot see
  double imag_residue = 0.0;       // max |Im y| / max |y|
};

struct OrderOutput {
  Waveform y;
  std::vector<std::pair<int, std::complex<double>>> spectrum;  // output bin -> coefficient
  OrderDiagnostics diagnostics;
};

OrderOutput synthesize_order(const KernelSetArchive& archive, const DiscreteSpectrum& spectrum, int n,
                             const SynthesisSettings& settings = {});

struct OrderedResponse {
  std::vector<Waveform> orders;  // y_1 .. y_M
  Waveform total;
  std::vector<OrderDiagnostics> diagnostics;
};

OrderedResponse synthesize_total(const KernelSetArchive& archive, const DiscreteSpectrum& spectrum,
                                 const SynthesisSettings& settings = {});

/// RMS of (y - ref) over the peak-to-peak range of ref, on ref's time grid.
double nrmse(const Waveform& y, const Waveform& ref);
/// Restricts a waveform to samples with t in [t_begin, t_end].
Waveform window(const Waveform& y, double t_begin, double t_end);

/// Splits responses y(alpha_i) = sum_n alpha_i^n y_n into y_1..y_N (N = alphas.size()),
/// referred to alpha = 1.
std::vector<Waveform> separate_orders(const std::vector<Waveform>& responses, const std::vector<double>& alphas);

}  // namespace volterra
