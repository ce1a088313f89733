#include <doctest.h>

#include <cmath>
#include <complex>
#include <map>
#include <numbers>

#include "volterra/errors.hpp"
#include "volterra/synthesizer.hpp"

using namespace volterra;
using cd = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPeriod = 28e-9;

cd smooth_kernel(std::span<const double> f) {
  cd h{1.0, 0.0};
  double sum = 0.0;
  for (double hz : f) {
    const double x = hz / 1e9;
    h *= cd(1.0, 0.4 * x) / (1.0 + x * x);
    sum += x;
  }
  return h / cd(1.0, 0.3 * sum);
}

// Order-1..3 grids on the bin lattice of the pulse period, filled from smooth_kernel.
KernelSetArchive bin_lattice_archive(std::int64_t bins) {
  const double df = 1.0 / kPeriod;
  const std::vector<LatticeAxis> axes(3, LatticeAxis{1, 1, bins});
  std::vector<KernelGrid> grids;
  for (int n = 1; n <= 3; ++n) grids.emplace_back(n, df, axes);
  std::vector<std::int64_t> pts;
  for (std::int64_t b = 1; b <= bins; ++b) {
    pts.push_back(b);
    pts.push_back(-b);
  }
  for (auto a : pts) {
    const double f1[] = {static_cast<double>(a) * df};
    grids[0].insert(f1, smooth_kernel(f1));
    for (auto b : pts) {
      if (b > a) continue;
      const double f2[] = {static_cast<double>(a) * df, static_cast<double>(b) * df};
      grids[1].insert(f2, smooth_kernel(f2));
      for (auto c : pts) {
        if (c > b) continue;
        const double f3[] = {static_cast<double>(a) * df, static_cast<double>(b) * df, static_cast<double>(c) * df};
        grids[2].insert(f3, smooth_kernel(f3));
      }
    }
  }
  return KernelSetArchive({"test", "bins", 3, "{}"}, std::move(grids));
}

// Direct n-fold sum over signed bins |k| <= top.
Waveform brute_force(const KernelSetArchive& ar, const DiscreteSpectrum& s, int n, int top, std::size_t samples) {
  const double df = 1.0 / s.period;
  std::map<int, cd> out;
  std::vector<int> k(static_cast<std::size_t>(n), -top);
  for (;;) {
    cd c{1.0, 0.0};
    std::vector<double> f;
    int total = 0;
    for (int b : k) {
      c *= s.coefficient(b);
      f.push_back(b * df);
      total += b;
    }
    if (c != cd(0.0, 0.0)) out[total] += c * ar.grid(n).query_interpolated(f);
    int p = 0;
    while (p < n && k[static_cast<std::size_t>(p)] == top) k[static_cast<std::size_t>(p++)] = -top;
    if (p == n) break;
    ++k[static_cast<std::size_t>(p)];
  }
  const double fact = std::tgamma(n + 1.0);
  Waveform y;
  y.dt = s.period / static_cast<double>(samples);
  y.samples.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    cd acc{};
    for (const auto& [b, v] : out) acc += v * std::polar(1.0, 2.0 * kPi * b * static_cast<double>(i) / static_cast<double>(samples));
    y.samples[i] = acc.real() / fact;
  }
  return y;
}

double max_abs_diff(const Waveform& a, const Waveform& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.samples[i] - b.samples[i]));
  return d;
}

double peak(const Waveform& a) {
  double d = 0.0;
  for (double v : a.samples) d = std::max(d, std::abs(v));
  return d;
}

}  // namespace

TEST_CASE("spectrum of a sampled cosine") {
  Waveform w;
  w.dt = 1e-9;
  for (int i = 0; i < 64; ++i) w.samples.push_back(0.7 * std::cos(2.0 * kPi * 3.0 * i / 64.0 + 0.4) + 0.1);
  const DiscreteSpectrum s = spectrum_of(w);
  CHECK(s.period == doctest::Approx(64e-9));
  CHECK(s.c0 == doctest::Approx(0.1));
  REQUIRE(s.bins == std::vector<int>{3});
  CHECK(std::abs(s.coefficient(3) - std::polar(0.35, 0.4)) < 1e-14);
  CHECK(std::abs(s.coefficient(-3) - std::polar(0.35, -0.4)) < 1e-14);
  CHECK(s.coefficient(0).real() == doctest::Approx(0.1));
  CHECK(s.coefficient(0).imag() == 0.0);
  CHECK(s.coefficient(5) == cd(0.0, 0.0));
}

TEST_CASE("trapezoid spectrum is exact and nearly lossless") {
  const PiecewiseLinear p = trapezoid_pulse(1.0, 1e-9, 5e-9, 1e-9);
  const DiscreteSpectrum s = spectrum_of(p, kPeriod);
  CHECK(s.bins.size() <= 200);
  CHECK(s.dropped_fraction() <= 1e-3);
  CHECK(s.c0 == doctest::Approx(6e-9 / kPeriod));
  CHECK(s.total_power == doctest::Approx((5e-9 + 2e-9 / 3.0) / kPeriod));
  // numerical quadrature of the first few bins
  const int n = 1 << 16;
  for (int k = 1; k <= 5; ++k) {
    cd acc{};
    for (int i = 0; i < n; ++i) {
      const double t = kPeriod * (i + 0.5) / n;
      acc += p.value(t) * std::polar(1.0, -2.0 * kPi * k * t / kPeriod);
    }
    acc /= static_cast<double>(n);
    CHECK(std::abs(acc - s.coefficient(k)) < 1e-8);
  }
  // Parseval on the retained bins
  double kept = s.c0 * s.c0;
  for (std::size_t i = 0; i < s.bins.size(); ++i) kept += 2.0 * std::norm(s.coeffs[i]);
  CHECK(kept + s.dropped_power == doctest::Approx(s.total_power).epsilon(1e-9));
  CHECK_THROWS_AS(spectrum_of(p, 5e-9), InputError);
}

TEST_CASE("synthesis matches brute-force bin sums") {
  const KernelSetArchive ar = bin_lattice_archive(12);
  SpectrumSettings ss;
  ss.max_bins = 6;
  ss.bin_cap = 0.0;
  const DiscreteSpectrum s = spectrum_of(trapezoid_pulse(1.0, 1e-9, 5e-9, 1e-9), kPeriod, ss);
  REQUIRE(s.bins.size() == 6);
  REQUIRE(s.bins.back() <= 12);
  SynthesisSettings set;
  set.samples = 256;
  for (int n = 1; n <= 3; ++n) {
    const OrderOutput o = synthesize_order(ar, s, n, set);
    const Waveform ref = brute_force(ar, s, n, s.bins.back(), set.samples);
    CHECK(max_abs_diff(o.y, ref) <= 1e-9 * peak(ref));
    CHECK(o.diagnostics.imag_residue < 1e-12);
    CHECK(o.diagnostics.beyond_reach_power == 0.0);
  }
}

TEST_CASE("scaling, shuffling and realness") {
  const KernelSetArchive ar = bin_lattice_archive(30);
  const DiscreteSpectrum s = spectrum_of(trapezoid_pulse(1.0, 1e-9, 5e-9, 1e-9), kPeriod);
  SynthesisSettings plain;
  plain.samples = 512;
  SynthesisSettings shuffled = plain;
  shuffled.shuffle_seed = 99;
  for (int n = 1; n <= 3; ++n) {
    const OrderOutput a = synthesize_order(ar, s, n, plain);
    const OrderOutput b = synthesize_order(ar, s.scaled(0.5), n, plain);
    const OrderOutput c = synthesize_order(ar, s, n, shuffled);
    const double pk = peak(a.y);
    const double f = std::pow(0.5, n);
    double scale_err = 0.0;
    for (std::size_t i = 0; i < a.y.size(); ++i) scale_err = std::max(scale_err, std::abs(b.y.samples[i] - f * a.y.samples[i]));
    CHECK(scale_err <= 1e-13 * f * pk);
    CHECK(max_abs_diff(a.y, c.y) <= 1e-12 * pk);
    CHECK(a.diagnostics.imag_residue < 1e-12);
    CHECK(a.diagnostics.bins_used < s.bins.size());  // reach trims the high bins
    CHECK(a.diagnostics.beyond_reach_power > 0.0);
  }
  const OrderedResponse r = synthesize_total(ar, s, plain);
  REQUIRE(r.orders.size() == 3);
  for (std::size_t i = 0; i < r.total.size(); ++i) {
    CHECK(r.total.samples[i] ==
          doctest::Approx(r.orders[0].samples[i] + r.orders[1].samples[i] + r.orders[2].samples[i]));
  }
}

TEST_CASE("first order reproduces the linear system") {
  const ReferenceSystem sys = make_system("linear");
  const KernelOracle h = oracle_kernels(sys);
  const double df = 1.0 / kPeriod;
  KernelGrid g(1, df, {{1, 1, 400}});
  for (std::int64_t b = 1; b <= 400; ++b) {
    const double f[] = {static_cast<double>(b) * df};
    g.insert(f, h(f));
  }
  const KernelSetArchive ar({"linear", "bins", 1, "{}"}, {g});
  const PiecewiseLinear p = trapezoid_pulse(1.0, 1e-9, 5e-9, 1e-9);
  const DiscreteSpectrum s = spectrum_of(p, kPeriod);
  SynthesisSettings set;
  set.samples = 1792;
  const OrderOutput y = synthesize_order(ar, s, 1, set);
  const Waveform ref = brute_force(ar, s, 1, s.bins.back(), set.samples);
  CHECK(max_abs_diff(y.y, ref) <= 1e-9 * peak(ref));
  const Waveform direct = periodic_response(sys, p, kPeriod, 4, 1792, 4);
  CHECK(nrmse(y.y, direct) < 1e-3);
}

TEST_CASE("order separation by drive scaling") {
  const std::vector<double> alphas{1.0, 0.5, 0.25};
  std::vector<Waveform> parts(3), responses(3);
  for (int p = 0; p < 3; ++p) {
    parts[p].dt = 1e-9;
    for (int i = 0; i < 50; ++i) parts[p].samples.push_back(std::sin(0.1 * i * (p + 1)) + p);
  }
  for (std::size_t a = 0; a < 3; ++a) {
    responses[a] = parts[0];
    for (std::size_t i = 0; i < 50; ++i) {
      double v = 0.0;
      for (int p = 0; p < 3; ++p) v += std::pow(alphas[a], p + 1) * parts[p].samples[i];
      responses[a].samples[i] = v;
    }
  }
  const auto sep = separate_orders(responses, alphas);
  for (int p = 0; p < 3; ++p) CHECK(max_abs_diff(sep[p], parts[p]) < 1e-12);
  CHECK_THROWS_AS(separate_orders(responses, {1.0, 1.0, 0.5}), InputError);
}

TEST_CASE("error metric and windows") {
  Waveform ref, y;
  ref.dt = y.dt = 1.0;
  ref.samples = {0.0, 1.0, 2.0, 3.0, 4.0};
  y.samples = {0.4, 1.0, 2.0, 3.0, 4.0};
  CHECK(nrmse(y, ref) == doctest::Approx(std::sqrt(0.16 / 5) / 4));
  const Waveform w = window(ref, 1.0, 3.0);
  CHECK(w.samples == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(w.t0 == 1.0);
  Waveform flat = ref;
  flat.samples.assign(5, 1.0);
  CHECK_THROWS_AS(nrmse(y, flat), InputError);
}
