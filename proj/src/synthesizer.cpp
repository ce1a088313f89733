#include "volterra/synthesizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <unsupported/Eigen/FFT>

#include "volterra/errors.hpp"

namespace volterra {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Neumaier-compensated complex accumulator.
struct CompensatedSum {
  double re = 0.0, re_c = 0.0, im = 0.0, im_c = 0.0;

  static void add(double& s, double& c, double x) {
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  void add(std::complex<double> z) {
    add(re, re_c, z.real());
    add(im, im_c, z.imag());
  }
  std::complex<double> value() const { return {re + re_c, im + im_c}; }
};

// Keeps the strongest bins above the cap, returned in ascending bin order.
void select_bins(DiscreteSpectrum& s, const std::vector<std::complex<double>>& cand, const SpectrumSettings& set) {
  double peak = std::abs(s.c0);
  for (const auto& c : cand) peak = std::max(peak, std::abs(c));
  std::vector<int> keep;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (std::abs(cand[i]) >= set.bin_cap * peak && std::abs(cand[i]) > 0.0) keep.push_back(static_cast<int>(i) + 1);
  }
  std::stable_sort(keep.begin(), keep.end(), [&](int a, int b) { return std::abs(cand[a - 1]) > std::abs(cand[b - 1]); });
  if (keep.size() > static_cast<std::size_t>(std::max(set.max_bins, 0))) keep.resize(static_cast<std::size_t>(set.max_bins));
  std::sort(keep.begin(), keep.end());
  double retained = s.c0 * s.c0;
  for (int k : keep) {
    s.bins.push_back(k);
    s.coeffs.push_back(cand[k - 1]);
    retained += 2.0 * std::norm(cand[k - 1]);
  }
  s.dropped_power = std::max(0.0, s.total_power - retained);
}

std::uint64_t multiset_count(std::size_t l, int n) {
  // C(l + n - 1, n), saturating.
  long double c = 1.0L;
  for (int i = 1; i <= n; ++i) c = c * static_cast<long double>(l + static_cast<std::size_t>(i) - 1) / i;
  return c > 1.8e19L ? UINT64_MAX : static_cast<std::uint64_t>(c + 0.5L);
}

}  // namespace

std::complex<double> DiscreteSpectrum::coefficient(int k) const {
  if (k == 0) return {c0, 0.0};
  const auto it = std::lower_bound(bins.begin(), bins.end(), std::abs(k));
  if (it == bins.end() || *it != std::abs(k)) return {0.0, 0.0};
  const auto c = coeffs[static_cast<std::size_t>(it - bins.begin())];
  return k > 0 ? c : std::conj(c);
}

DiscreteSpectrum DiscreteSpectrum::scaled(double alpha) const {
  DiscreteSpectrum s = *this;
  s.c0 *= alpha;
  for (auto& c : s.coeffs) c *= alpha;
  s.total_power *= alpha * alpha;
  s.dropped_power *= alpha * alpha;
  return s;
}

DiscreteSpectrum spectrum_of(const PiecewiseLinear& input, double period, const SpectrumSettings& set) {
  if (input.t.size() != input.v.size() || input.t.size() < 2) throw InputError("pulse needs at least two knots");
  if (!(period > 0.0) || input.support() > period * (1.0 + 1e-12)) {
    throw InputError("period must cover the pulse support");
  }
  DiscreteSpectrum s;
  s.period = period;
  const std::size_t segs = input.t.size() - 1;
  double area = 0.0, energy = 0.0;
  for (std::size_t i = 0; i < segs; ++i) {
    const double dt = input.t[i + 1] - input.t[i];
    const double a = input.v[i], b = input.v[i + 1];
    area += 0.5 * (a + b) * dt;
    energy += (a * a + a * b + b * b) / 3.0 * dt;
  }
  s.c0 = area / period;
  s.total_power = energy / period;

  std::vector<std::complex<double>> cand(static_cast<std::size_t>(std::max(set.scan_bins, 0)));
  const std::complex<double> j{0.0, 1.0};
  for (std::size_t k = 1; k <= cand.size(); ++k) {
    const double w = kTwoPi * static_cast<double>(k) / period;
    std::complex<double> acc{};
    // Antiderivative of (a + s tau) e^{-jwt}: (j u(t)/w + s/w^2) e^{-jwt}.
    for (std::size_t i = 0; i < segs; ++i) {
      const double dt = input.t[i + 1] - input.t[i];
      if (dt <= 0.0) continue;
      const double slope = (input.v[i + 1] - input.v[i]) / dt;
      const auto prim = [&](double t, double u) { return (j * u / w + slope / (w * w)) * std::polar(1.0, -w * t); };
      acc += prim(input.t[i + 1], input.v[i + 1]) - prim(input.t[i], input.v[i]);
    }
    cand[k - 1] = acc / period;
  }
  select_bins(s, cand, set);
  return s;
}

DiscreteSpectrum spectrum_of(const Waveform& input, const SpectrumSettings& set) {
  const std::size_t n = input.size();
  if (n < 2 || !(input.dt > 0.0)) throw InputError("waveform needs at least two samples");
  DiscreteSpectrum s;
  s.period = static_cast<double>(n) * input.dt;
  std::vector<std::complex<double>> x;
  Eigen::FFT<double> fft;
  fft.fwd(x, input.samples);
  // Coefficients refer to t = 0; undo the start-time offset.
  const auto at_zero = [&](std::size_t k) {
    return x[k] / static_cast<double>(n) *
           std::polar(1.0, -kTwoPi * static_cast<double>(k) * input.t0 / s.period);
  };
  s.c0 = x[0].real() / static_cast<double>(n);
  double ms = 0.0;
  for (double v : input.samples) ms += v * v;
  s.total_power = ms / static_cast<double>(n);
  const std::size_t top = std::min<std::size_t>((n - 1) / 2, static_cast<std::size_t>(std::max(set.scan_bins, 0)));
  std::vector<std::complex<double>> cand(top);
  for (std::size_t k = 1; k <= top; ++k) cand[k - 1] = at_zero(k);
  select_bins(s, cand, set);
  return s;
}

OrderOutput synthesize_order(const KernelSetArchive& archive, const DiscreteSpectrum& spectrum, int n,
                             const SynthesisSettings& settings) {
  if (n < 1) throw InputError("order must be at least 1");
  const KernelGrid& grid = archive.grid(n);
  if (!(spectrum.period > 0.0)) throw InputError("spectrum has no period");
  const double df = 1.0 / spectrum.period;

  OrderOutput out;
  OrderDiagnostics& diag = out.diagnostics;
  diag.order = n;

  const auto reach = grid.reach_hz();
  const double limit = reach.empty() ? 0.0 : *std::max_element(reach.begin(), reach.end());
  std::vector<std::pair<int, std::complex<double>>> pos;
  for (std::size_t i = 0; i < spectrum.bins.size(); ++i) {
    if (static_cast<double>(spectrum.bins[i]) * df <= limit) {
      pos.emplace_back(spectrum.bins[i], spectrum.coeffs[i]);
    } else {
      diag.beyond_reach_power += 2.0 * std::norm(spectrum.coeffs[i]);
    }
  }
  // Guard: trim the weakest bins until the multiset count fits.
  const std::size_t dc = spectrum.c0 != 0.0 ? 1 : 0;
  while (!pos.empty() && multiset_count(2 * pos.size() + dc, n) > settings.max_multisets) {
    const auto weakest = std::min_element(pos.begin(), pos.end(), [](const auto& a, const auto& b) {
      return std::abs(a.second) < std::abs(b.second) || (std::abs(a.second) == std::abs(b.second) && a.first > b.first);
    });
    pos.erase(weakest);
  }
  diag.bins_used = pos.size();

  std::vector<std::pair<int, std::complex<double>>> signed_bins;
  for (auto it = pos.rbegin(); it != pos.rend(); ++it) signed_bins.emplace_back(-it->first, std::conj(it->second));
  if (dc) signed_bins.emplace_back(0, std::complex<double>(spectrum.c0, 0.0));
  for (const auto& p : pos) signed_bins.push_back(p);
  const std::size_t l = signed_bins.size();

  const int max_bin = pos.empty() ? 0 : pos.back().first;
  const int offset = n * max_bin;
  std::vector<CompensatedSum> acc(static_cast<std::size_t>(2 * offset + 1));
  std::vector<double> freqs(static_cast<std::size_t>(n));

  std::vector<double> inv_fact(static_cast<std::size_t>(n) + 1, 1.0);
  for (int i = 1; i <= n; ++i) inv_fact[i] = inv_fact[i - 1] / i;

  auto visit = [&](const std::vector<std::size_t>& idx) {
    // Each sorted multiset stands for n!/prod(mult!) ordered tuples; the 1/n! cancels.
    double w = 1.0;
    std::size_t run = 1;
    std::complex<double> prod{1.0, 0.0};
    int k_sum = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i > 0 && idx[i] == idx[i - 1]) {
        ++run;
      } else {
        w *= inv_fact[run];
        run = 1;
      }
      const auto& [k, c] = signed_bins[idx[i]];
      prod *= c;
      k_sum += k;
      freqs[i] = static_cast<double>(k) * df;
    }
    w *= inv_fact[run];
    if (prod == 0.0) return;
    acc[static_cast<std::size_t>(k_sum + offset)].add(w * grid.query_interpolated(freqs) * prod);
  };

  if (l > 0) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
    if (settings.shuffle_seed) {
      std::vector<std::vector<std::size_t>> all;
      for (;;) {
        all.push_back(idx);
        int p = n - 1;
        while (p >= 0 && idx[p] == l - 1) --p;
        if (p < 0) break;
        ++idx[p];
        for (int q = p + 1; q < n; ++q) idx[q] = idx[p];
      }
      std::mt19937_64 rng(*settings.shuffle_seed);
      std::shuffle(all.begin(), all.end(), rng);
      for (const auto& m : all) visit(m);
      diag.multisets = all.size();
    } else {
      for (;;) {
        visit(idx);
        ++diag.multisets;
        int p = n - 1;
        while (p >= 0 && idx[p] == l - 1) --p;
        if (p < 0) break;
        ++idx[p];
        for (int q = p + 1; q < n; ++q) idx[q] = idx[p];
      }
    }
  }

  for (std::size_t i = 0; i < acc.size(); ++i) {
    const auto v = acc[i].value();
    if (v != 0.0) out.spectrum.emplace_back(static_cast<int>(i) - offset, v);
  }

  const std::size_t ns = settings.samples;
  out.y.dt = spectrum.period / static_cast<double>(ns);
  out.y.samples.assign(ns, 0.0);
  double peak = 0.0, imag_peak = 0.0;
  for (std::size_t i = 0; i < ns; ++i) {
    std::complex<double> y{};
    for (const auto& [k, c] : out.spectrum) {
      const double cycles = std::fmod(static_cast<double>(k) * static_cast<double>(i) / static_cast<double>(ns), 1.0);
      y += c * std::polar(1.0, kTwoPi * cycles);
    }
    out.y.samples[i] = y.real();
    peak = std::max(peak, std::abs(y));
    imag_peak = std::max(imag_peak, std::abs(y.imag()));
  }
  diag.imag_residue = peak > 0.0 ? imag_peak / peak : 0.0;
  return out;
}

OrderedResponse synthesize_total(const KernelSetArchive& archive, const DiscreteSpectrum& spectrum,
                                 const SynthesisSettings& settings) {
  if (archive.max_order() < 1) throw InputError("archive holds no kernels");
  OrderedResponse r;
  for (int n = 1; n <= archive.max_order(); ++n) {
    OrderOutput o = synthesize_order(archive, spectrum, n, settings);
    r.diagnostics.push_back(o.diagnostics);
    r.orders.push_back(std::move(o.y));
  }
  r.total = r.orders.front();
  for (std::size_t n = 1; n < r.orders.size(); ++n) {
    for (std::size_t i = 0; i < r.total.size(); ++i) r.total.samples[i] += r.orders[n].samples[i];
  }
  return r;
}

double nrmse(const Waveform& y, const Waveform& ref) {
  if (ref.size() == 0) throw InputError("reference waveform is empty");
  const bool same_grid = y.size() == ref.size() && y.dt == ref.dt && y.t0 == ref.t0;
  double lo = ref.samples[0], hi = ref.samples[0], se = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double v = same_grid ? y.samples[i] : y.at(ref.time(i));
    const double d = v - ref.samples[i];
    se += d * d;
    lo = std::min(lo, ref.samples[i]);
    hi = std::max(hi, ref.samples[i]);
  }
  const double range = hi - lo;
  if (!(range > 0.0)) throw InputError("reference waveform is constant");
  return std::sqrt(se / static_cast<double>(ref.size())) / range;
}

Waveform window(const Waveform& y, double t_begin, double t_end) {
  Waveform w;
  w.dt = y.dt;
  bool first = true;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = y.time(i);
    if (t < t_begin - 1e-9 * y.dt || t > t_end + 1e-9 * y.dt) continue;
    if (first) {
      w.t0 = t;
      first = false;
    }
    w.samples.push_back(y.samples[i]);
  }
  return w;
}

std::vector<Waveform> separate_orders(const std::vector<Waveform>& responses, const std::vector<double>& alphas) {
  const std::size_t n = alphas.size();
  if (n == 0 || responses.size() != n) throw InputError("need one response per scale factor");
  Eigen::MatrixXd v(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < n; ++p) v(i, p) = std::pow(alphas[i], static_cast<double>(p + 1));
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(v);
  if (!lu.isInvertible()) throw InputError("scale factors must be distinct and nonzero");
  std::vector<Waveform> out(n, responses.front());
  const std::size_t len = responses.front().size();
  for (const auto& r : responses) {
    if (r.size() != len) throw InputError("responses must share a time grid");
  }
  Eigen::VectorXd rhs(n);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t k = 0; k < n; ++k) rhs(k) = responses[k].samples[i];
    const Eigen::VectorXd y = lu.solve(rhs);
    for (std::size_t p = 0; p < n; ++p) out[p].samples[i] = y(p);
  }
  return out;
}

}  // namespace volterra
