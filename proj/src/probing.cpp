#include "volterra/probing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unsupported/Eigen/FFT>

#include "volterra/errors.hpp"
#include "volterra/parallel.hpp"

namespace volterra {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kResync = 4096;

template <typename Sys>
Waveform integrate(const Sys& sys, const std::vector<double>& u, double dt, std::size_t steps) {
  using State = typename Sys::State;
  double scale = 0.0;
  for (double v : u) scale = std::max(scale, std::abs(v));
  const double limit = 1e6 * std::max(scale, 1e-300);

  Waveform y;
  y.dt = dt;
  y.samples.resize(steps + 1);
  State x = State::Zero();
  y.samples[0] = sys.output(x, u[0]);
  const double h = dt / 2.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double u0 = u[2 * i];
    const double um = u[2 * i + 1];
    const double u1 = u[2 * i + 2];
    const State k1 = sys.derivative(x, u0);
    const State k2 = sys.derivative(x + h * k1, um);
    const State k3 = sys.derivative(x + h * k2, um);
    const State k4 = sys.derivative(x + dt * k3, u1);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (i % 64 == 0 && !(x.norm() <= limit)) {
      std::ostringstream os;
      os << "transient diverged at t = " << static_cast<double>(i + 1) * dt << " s (state norm "
         << x.norm() << ")";
      throw NumericalError(os.str());
    }
    y.samples[i + 1] = sys.output(x, u1);
  }
  return y;
}

double max_tone_hz(const SweepPlan& plan) {
  double f = 0.0;
  for (const auto& a : plan.axes) f = std::max(f, static_cast<double>(a.stop()) * plan.delta_f_hz);
  return f;
}

SpectralDataset empty_dataset(const SweepPlan& plan) {
  SpectralDataset ds(plan.id, plan.tones(), plan.max_mixing_order);
  ds.amplitudes = plan.amplitudes;
  ds.delta_f_hz = plan.delta_f_hz;
  for (std::size_t t = 0; t < plan.triplet_count(); ++t) ds.triplets.push_back(plan.triplet_units(t));
  return ds;
}

void require_valid(const SweepPlan& plan) {
  const PlanReport rep = validate_plan(plan, 1);
  if (rep.ok) return;
  std::ostringstream os;
  os << "plan " << plan.id << " is not collision free";
  if (!rep.problems.empty()) os << ": " << rep.problems.front();
  if (!rep.collisions.empty()) {
    const Collision& c = rep.collisions.front();
    os << ": triplet " << c.triplet << " maps " << c.k.to_string() << " and " << c.k_prime.to_string()
       << " to the same frequency (" << rep.collision_count << " collisions)";
  }
  throw InputError(os.str());
}

}  // namespace

double Waveform::at(double t) const {
  if (samples.empty() || !(dt > 0.0)) return 0.0;
  const double u = (t - t0) / dt;
  if (u < 0.0 || u > static_cast<double>(samples.size() - 1)) return 0.0;
  const auto i = static_cast<std::size_t>(u);
  if (i + 1 >= samples.size()) return samples.back();
  const double w = u - static_cast<double>(i);
  return (1.0 - w) * samples[i] + w * samples[i + 1];
}

double PiecewiseLinear::value(double time) const {
  if (t.empty()) return 0.0;
  if (period > 0.0) {
    double r = std::fmod(time - t.front(), period);
    if (r < 0.0) r += period;
    time = t.front() + r;
  }
  if (time < t.front() || time > t.back()) return 0.0;
  const auto it = std::upper_bound(t.begin(), t.end(), time);
  if (it == t.end()) return v.back();
  const auto i = static_cast<std::size_t>(it - t.begin());
  if (i == 0) return v.front();
  const double w = (time - t[i - 1]) / (t[i] - t[i - 1]);
  return (1.0 - w) * v[i - 1] + w * v[i];
}

PiecewiseLinear trapezoid_pulse(double v0, double rise, double width, double fall, double t0) {
  if (!(rise > 0.0 && width >= 0.0 && fall > 0.0)) throw InputError("pulse edges must be positive");
  return {{t0, t0 + rise, t0 + rise + width, t0 + rise + width + fall}, {0.0, v0, v0, 0.0}, 0.0};
}

PiecewiseLinear scaled(PiecewiseLinear p, double alpha) {
  for (double& v : p.v) v *= alpha;
  return p;
}

std::vector<double> half_step_samples(const Stimulus& input, double dt, std::size_t steps) {
  const std::size_t n = 2 * steps + 1;
  const double h = dt / 2.0;
  std::vector<double> u(n, 0.0);
  if (const auto* tones = std::get_if<ToneSet>(&input)) {
    if (tones->freq_hz.size() != tones->amplitude.size()) throw InputError("tone set size mismatch");
    for (std::size_t m = 0; m < tones->freq_hz.size(); ++m) {
      const double f = tones->freq_hz[m];
      const double amp = tones->amplitude[m];
      const std::complex<double> rot = std::polar(1.0, kTwoPi * f * h);
      std::complex<double> z{1.0, 0.0};
      for (std::size_t i = 0; i < n; ++i) {
        // Re-anchor the recurrence on the exact phase to stop drift.
        if (i % kResync == 0) z = std::polar(1.0, kTwoPi * std::fmod(f * h * static_cast<double>(i), 1.0));
        u[i] += amp * z.real();
        z *= rot;
      }
    }
  } else if (const auto* p = std::get_if<PiecewiseLinear>(&input)) {
    for (std::size_t i = 0; i < n; ++i) u[i] = p->value(static_cast<double>(i) * h);
  } else {
    const auto& w = std::get<Waveform>(input);
    for (std::size_t i = 0; i < n; ++i) u[i] = w.at(static_cast<double>(i) * h);
  }
  return u;
}

Waveform transient(const ReferenceSystem& sys, const Stimulus& input, double duration, double dt) {
  if (!(dt > 0.0) || !(duration >= 0.0)) throw InputError("transient needs dt > 0 and duration >= 0");
  if (const auto* tones = std::get_if<ToneSet>(&input)) {
    double fmax = 0.0;
    for (double f : tones->freq_hz) fmax = std::max(fmax, std::abs(f));
    if (fmax > 0.0 && dt > 1.0 / (20.0 * fmax) * (1.0 + 1e-12)) {
      throw InputError("time step exceeds 1/(20 f_max) for the highest input tone");
    }
  }
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
  const std::vector<double> u = half_step_samples(input, dt, steps);
  return std::visit([&](const auto& s) { return integrate(s, u, dt, steps); }, sys);
}

Waveform periodic_response(const ReferenceSystem& sys, const PiecewiseLinear& input, double period, int periods,
                           std::size_t samples, std::size_t oversample) {
  if (periods < 1 || samples < 1 || oversample < 1) throw InputError("periodic response needs positive sizes");
  PiecewiseLinear train = input;
  train.period = period;
  const std::size_t per = samples * oversample;
  const double dt = period / static_cast<double>(per);
  const Waveform full = transient(sys, train, dt * static_cast<double>(per * static_cast<std::size_t>(periods)), dt);
  Waveform last;
  last.dt = period / static_cast<double>(samples);
  last.samples.resize(samples);
  const std::size_t base = per * static_cast<std::size_t>(periods - 1);
  for (std::size_t i = 0; i < samples; ++i) last.samples[i] = full.samples[base + i * oversample];
  return last;
}

ProbeTiming probe_timing(const ReferenceSystem& sys, const SweepPlan& plan, const CaptureSettings& cs) {
  ProbeTiming pt;
  pt.record_s = 1.0 / plan.delta_f_hz;
  std::size_t n = cs.samples;
  if (n == 0) {
    // 20 samples per period of the highest tone, and a step no longer than
    // 1/25 of the fastest pole's time constant.
    const double need = std::max(20.0 * max_tone_hz(plan), 25.0 / fastest_time_constant(sys)) * pt.record_s;
    n = 1;
    while (static_cast<double>(n) < need) n *= 2;
  }
  pt.record_samples = n;
  pt.dt = pt.record_s / static_cast<double>(n);
  const double settle = cs.settle_s >= 0.0 ? cs.settle_s : std::max(50.0 * slowest_time_constant(sys), 200e-9);
  pt.settle_samples = static_cast<std::size_t>(std::ceil(settle / pt.dt - 1e-9));
  return pt;
}

PhasorMap capture_phasors(const Waveform& y, std::span<const double> tone_hz, int max_mixing_order,
                          double settle_s, double record_s) {
  if (!(y.dt > 0.0) || !(record_s > 0.0) || settle_s < 0.0) throw InputError("invalid capture window");
  const double s_exact = (settle_s - y.t0) / y.dt;
  const double n_exact = record_s / y.dt;
  const auto s = static_cast<std::size_t>(std::llround(s_exact));
  const auto n = static_cast<std::size_t>(std::llround(n_exact));
  if (std::abs(s_exact - static_cast<double>(s)) > 1e-6 || std::abs(n_exact - static_cast<double>(n)) > 1e-6) {
    throw InputError("settle time and record length must be whole numbers of samples");
  }
  if (s + n > y.size()) throw InputError("waveform shorter than settle time plus record");

  const auto indices =
      enumerate_output_indices(static_cast<int>(tone_hz.size()), max_mixing_order, DcPolicy::include);
  std::vector<std::int64_t> bins;
  for (const auto& k : indices) {
    const double b = k.frequency_hz(tone_hz) * record_s;
    const double r = std::round(b);
    if (std::abs(b - r) > 1e-6) {
      std::ostringstream os;
      os << "mixing product " << k.to_string() << " at " << k.frequency_hz(tone_hz)
         << " Hz is not on a DFT bin of the " << record_s << " s record";
      throw InputError(os.str());
    }
    if (std::abs(r) * 2.0 >= static_cast<double>(n)) {
      throw InputError("mixing product " + k.to_string() + " is above the Nyquist bin");
    }
    bins.push_back(static_cast<std::int64_t>(r));
  }

  const std::vector<double> seg(y.samples.begin() + static_cast<std::ptrdiff_t>(s),
                                y.samples.begin() + static_cast<std::ptrdiff_t>(s + n));
  std::vector<std::complex<double>> spec;
  Eigen::FFT<double> fft;
  fft.fwd(spec, seg);

  const auto nn = static_cast<std::int64_t>(n);
  const auto start = static_cast<std::int64_t>(s);
  PhasorMap out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::int64_t b = bins[i];
    const std::int64_t slot = ((b % nn) + nn) % nn;
    // The window starts at sample s; rotate back to the t = 0 reference exactly.
    const std::int64_t turns = (((b % nn) * (start % nn)) % nn + nn) % nn;
    std::complex<double> rot = std::polar(1.0, -kTwoPi * static_cast<double>(turns) / static_cast<double>(n));
    if (y.t0 != 0.0) rot *= std::polar(1.0, -kTwoPi * static_cast<double>(b) / record_s * y.t0);
    out.emplace(indices[i], spec[static_cast<std::size_t>(slot)] / static_cast<double>(n) * rot);
  }
  return out;
}

SpectralDataset::SpectralDataset(std::string plan_id, int tones, int max_mixing_order)
    : plan_id_(std::move(plan_id)),
      tones_(tones),
      max_mixing_order_(max_mixing_order),
      indices_(enumerate_output_indices(tones, max_mixing_order, DcPolicy::include)) {
  for (std::size_t i = 0; i < indices_.size(); ++i) position_.emplace(indices_[i], i);
}

std::optional<std::size_t> SpectralDataset::position(const FrequencyIndex& canonical) const {
  const auto it = position_.find(canonical);
  if (it == position_.end()) return std::nullopt;
  return it->second;
}

void SpectralDataset::set_block(std::size_t triplet, std::size_t amp, Block b) {
  if (b.size() != indices_.size()) throw InputError("phasor block size does not match the index list");
  blocks_[{triplet, amp}] = std::move(b);
}

const SpectralDataset::Block* SpectralDataset::block(std::size_t triplet, std::size_t amp) const {
  const auto it = blocks_.find({triplet, amp});
  return it == blocks_.end() ? nullptr : &it->second;
}

std::optional<std::complex<double>> SpectralDataset::phasor(std::size_t triplet, std::size_t amp,
                                                            const FrequencyIndex& k) const {
  const CanonicalIndex c = canonicalize_index(k);
  const auto pos = position(c.index);
  const Block* b = block(triplet, amp);
  if (!pos || !b) return std::nullopt;
  const std::complex<double> v = (*b)[*pos];
  return c.conjugate ? std::conj(v) : v;
}

SpectralDataset generate_dataset(const ReferenceSystem& sys, const SweepPlan& plan, const ProbeSettings& ps) {
  require_valid(plan);
  const ProbeTiming pt = probe_timing(sys, plan, ps.capture);
  SpectralDataset ds = empty_dataset(plan);
  ds.capture = {"transient", 1.0 / pt.dt, pt.record_s, static_cast<double>(pt.settle_samples) * pt.dt, 0};

  const std::size_t rows = plan.amplitudes.size();
  const std::size_t runs = plan.triplet_count() * rows;
  std::vector<SpectralDataset::Block> results(runs);
  const double duration = static_cast<double>(pt.settle_samples + pt.record_samples) * pt.dt;
  parallel_for(runs, ps.jobs, [&](std::size_t j) {
    const std::size_t t = j / rows;
    const std::size_t a = j % rows;
    const ToneSet tones{plan.triplet_hz(t), plan.amplitudes[a]};
    const Waveform y = transient(sys, tones, duration, pt.dt);
    const PhasorMap ph = capture_phasors(y, tones.freq_hz, plan.max_mixing_order, ds.capture.settle_s, pt.record_s);
    SpectralDataset::Block b;
    b.reserve(ds.indices().size());
    for (const auto& k : ds.indices()) b.push_back(ph.at(k));
    results[j] = std::move(b);
  });
  for (std::size_t j = 0; j < runs; ++j) ds.set_block(j / rows, j % rows, std::move(results[j]));
  return ds;
}

SpectralDataset generate_dataset_analytic(const KernelOracle& oracle, const SweepPlan& plan, int truncation,
                                          int jobs) {
  if (truncation < 1) throw InputError("truncation order must be at least 1");
  if (oracle.max_order() < truncation) {
    throw InputError("oracle covers orders up to " + std::to_string(oracle.max_order()) + ", truncation is " +
                     std::to_string(truncation));
  }
  require_valid(plan);
  SpectralDataset ds = empty_dataset(plan);
  ds.capture.source = "analytic";
  ds.capture.truncation = truncation;
  ds.capture.record_s = 1.0 / plan.delta_f_hz;

  const std::size_t rows = plan.amplitudes.size();
  std::vector<std::vector<GTermDescriptor>> terms;  // per index
  for (const auto& k : ds.indices()) {
    std::vector<GTermDescriptor> all;
    for (int n = 1; n <= truncation; ++n) {
      auto t = terms_at_index(k, n);
      all.insert(all.end(), t.begin(), t.end());
    }
    terms.push_back(std::move(all));
  }

  const std::size_t triplets = plan.triplet_count();
  std::vector<std::vector<SpectralDataset::Block>> results(triplets);
  parallel_for(triplets, jobs, [&](std::size_t t) {
    const std::vector<double> f = plan.triplet_hz(t);
    // Kernel values depend on the triplet only; evaluate them once.
    std::vector<std::vector<std::complex<double>>> h(ds.indices().size());
    for (std::size_t i = 0; i < h.size(); ++i) {
      for (const auto& g : terms[i]) h[i].push_back(oracle(kernel_frequencies(g, f)));
    }
    auto& out = results[t];
    out.resize(rows);
    for (std::size_t a = 0; a < rows; ++a) {
      out[a].resize(h.size());
      for (std::size_t i = 0; i < h.size(); ++i) {
        std::complex<double> b{};
        for (std::size_t j = 0; j < h[i].size(); ++j) b += term_coefficient(terms[i][j], plan.amplitudes[a]) * h[i][j];
        out[a][i] = b;
      }
    }
  });
  for (std::size_t t = 0; t < triplets; ++t) {
    for (std::size_t a = 0; a < rows; ++a) ds.set_block(t, a, std::move(results[t][a]));
  }
  return ds;
}

}  // namespace volterra
