#include "volterra/mixing_index.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include "volterra/errors.hpp"

namespace volterra {

namespace {

std::uint64_t factorial(int n) {
  std::uint64_t f = 1;
  for (int i = 2; i <= n; ++i) f *= static_cast<std::uint64_t>(i);
  return f;
}

void require_tones(int tones) {
  if (tones < 1) throw InputError("tone count must be at least 1");
}

// Calls fn(r) for every r in N^tones with sum(r) == total, r ascending lexicographically.
template <typename Fn>
void for_each_composition(int tones, int total, Fn&& fn) {
  std::vector<int> r(static_cast<std::size_t>(tones), 0);
  auto recurse = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == tones - 1) {
      r[pos] = remaining;
      fn(r);
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      r[pos] = v;
      self(self, pos + 1, remaining - v);
    }
  };
  recurse(recurse, 0, total);
}

}  // namespace

int FrequencyIndex::mixing_order() const {
  int s = 0;
  for (int v : k_) s += std::abs(v);
  return s;
}

bool FrequencyIndex::is_dc() const {
  return std::all_of(k_.begin(), k_.end(), [](int v) { return v == 0; });
}

bool FrequencyIndex::is_canonical() const {
  for (int v : k_) {
    if (v != 0) return v > 0;
  }
  return true;
}

FrequencyIndex FrequencyIndex::operator-() const {
  std::vector<int> n(k_.size());
  std::transform(k_.begin(), k_.end(), n.begin(), [](int v) { return -v; });
  return FrequencyIndex(std::move(n));
}

std::int64_t FrequencyIndex::frequency_units(std::span<const std::int64_t> tone_units) const {
  if (tone_units.size() != k_.size()) throw InputError("tone count mismatch for " + to_string());
  std::int64_t f = 0;
  for (std::size_t m = 0; m < k_.size(); ++m) f += k_[m] * tone_units[m];
  return f;
}

double FrequencyIndex::frequency_hz(std::span<const double> tone_hz) const {
  if (tone_hz.size() != k_.size()) throw InputError("tone count mismatch for " + to_string());
  double f = 0.0;
  for (std::size_t m = 0; m < k_.size(); ++m) f += k_[m] * tone_hz[m];
  return f;
}

std::string FrequencyIndex::to_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t m = 0; m < k_.size(); ++m) os << (m ? "," : "") << k_[m];
  os << ']';
  return os.str();
}

CanonicalIndex canonicalize_index(const FrequencyIndex& k) {
  if (k.is_canonical()) return {k, false};
  return {-k, true};
}

std::vector<FrequencyIndex> enumerate_output_indices(int tones, int max_mixing_order, DcPolicy dc) {
  require_tones(tones);
  if (max_mixing_order < 1) throw InputError("maximum mixing order must be at least 1");

  std::vector<FrequencyIndex> out;
  std::vector<int> k(static_cast<std::size_t>(tones), -max_mixing_order);
  // Odometer over [-M0, M0]^M, filtered by |k|_1 and canonical sign.
  for (;;) {
    FrequencyIndex idx(k);
    const int order = idx.mixing_order();
    if (order <= max_mixing_order && idx.is_canonical()) {
      if (order > 0 || dc == DcPolicy::include) out.push_back(std::move(idx));
    }
    int pos = tones - 1;
    while (pos >= 0 && k[pos] == max_mixing_order) {
      k[pos] = -max_mixing_order;
      --pos;
    }
    if (pos < 0) break;
    ++k[pos];
  }
  std::stable_sort(out.begin(), out.end(), [](const FrequencyIndex& a, const FrequencyIndex& b) {
    const int oa = a.mixing_order();
    const int ob = b.mixing_order();
    if (oa != ob) return oa < ob;
    return a < b;
  });
  return out;
}

bool is_valid(const GTermDescriptor& g) {
  if (g.order < 1 || g.r.size() != static_cast<std::size_t>(g.k.tones())) return false;
  int total = 0;
  for (int m = 0; m < g.k.tones(); ++m) {
    if (g.r[m] < 0) return false;
    total += std::abs(g.k[m]) + 2 * g.r[m];
  }
  return total == g.order;
}

std::uint64_t term_multiplicity(const GTermDescriptor& g) {
  if (!is_valid(g)) throw InputError("invalid kernel descriptor at " + g.k.to_string());
  std::uint64_t denom = 1;
  for (int m = 0; m < g.k.tones(); ++m) {
    denom *= factorial(std::abs(g.k[m]) + g.r[m]) * factorial(g.r[m]);
  }
  return factorial(g.order) / denom;
}

std::uint64_t count_terms(int tones, int order) {
  require_tones(tones);
  if (order < 1) throw InputError("kernel order must be at least 1");
  std::uint64_t total = 1;
  for (int i = 0; i < order; ++i) total *= static_cast<std::uint64_t>(2 * tones);
  return total;
}

KernelArgs kernel_arguments(const GTermDescriptor& g) {
  KernelArgs args;
  args.reserve(static_cast<std::size_t>(g.order));
  for (int m = 0; m < g.k.tones(); ++m) {
    const int s = g.k[m] < 0 ? -1 : 1;
    for (int i = 0; i < std::abs(g.k[m]) + g.r[m]; ++i) args.push_back({m, s});
    for (int i = 0; i < g.r[m]; ++i) args.push_back({m, -s});
  }
  return args;
}

GTermDescriptor descriptor_of(std::span<const ToneRef> args, int tones) {
  require_tones(tones);
  if (args.empty()) throw InputError("kernel argument list is empty");
  std::vector<int> k(static_cast<std::size_t>(tones), 0);
  std::vector<int> count(static_cast<std::size_t>(tones), 0);
  for (const ToneRef& a : args) {
    if (a.tone < 0 || a.tone >= tones || (a.sign != 1 && a.sign != -1)) {
      throw InputError("kernel argument refers to tone " + std::to_string(a.tone + 1) + " of " +
                       std::to_string(tones));
    }
    k[a.tone] += a.sign;
    ++count[a.tone];
  }
  std::vector<int> r(static_cast<std::size_t>(tones));
  for (int m = 0; m < tones; ++m) r[m] = (count[m] - std::abs(k[m])) / 2;
  return {FrequencyIndex(std::move(k)), std::move(r), static_cast<int>(args.size())};
}

CanonicalArgs canonicalize_kernel_args(std::span<const ToneRef> args, int tones) {
  GTermDescriptor g = descriptor_of(args, tones);
  const CanonicalIndex c = canonicalize_index(g.k);
  g.k = c.index;
  return {kernel_arguments(g), c.conjugate};
}

std::vector<GTermDescriptor> terms_at_index(const FrequencyIndex& k, int order) {
  const int base = k.mixing_order();
  std::vector<GTermDescriptor> out;
  if (order < 1 || order < base || (order - base) % 2 != 0) return out;
  for_each_composition(k.tones(), (order - base) / 2,
                       [&](const std::vector<int>& r) { out.push_back({k, r, order}); });
  return out;
}

KernelTable enumerate_kernels_for_order(int tones, int max_mixing_order, int order) {
  if (order < 1 || order > max_mixing_order) {
    throw InputError("kernel order must lie in [1, maximum mixing order]");
  }
  const DcPolicy dc = order % 2 == 0 ? DcPolicy::include : DcPolicy::exclude;
  KernelTable table;
  for (const FrequencyIndex& k : enumerate_output_indices(tones, max_mixing_order, dc)) {
    auto terms = terms_at_index(k, order);
    if (!terms.empty()) table.emplace(k, std::move(terms));
  }
  return table;
}

std::size_t kernel_count(const KernelTable& table, DcPolicy dc) {
  std::size_t n = 0;
  for (const auto& [k, terms] : table) {
    if (dc == DcPolicy::exclude && k.is_dc()) continue;
    n += terms.size();
  }
  return n;
}

double term_coefficient(const GTermDescriptor& g, std::span<const double> amplitudes) {
  if (amplitudes.size() != static_cast<std::size_t>(g.k.tones())) {
    throw InputError("amplitude count does not match the tone count of " + g.k.to_string());
  }
  double c = 1.0;
  for (int m = 0; m < g.k.tones(); ++m) {
    const int a = std::abs(g.k[m]);
    const double half = amplitudes[m] / 2.0;
    for (int i = 0; i < a + 2 * g.r[m]; ++i) c *= half;
    c /= static_cast<double>(factorial(a + g.r[m]) * factorial(g.r[m]));
  }
  return c;
}

std::vector<double> kernel_frequencies(const GTermDescriptor& g, std::span<const double> tone_hz) {
  if (tone_hz.size() != static_cast<std::size_t>(g.k.tones())) throw InputError("tone count mismatch");
  std::vector<double> f;
  for (const ToneRef& a : kernel_arguments(g)) f.push_back(a.sign * tone_hz[a.tone]);
  return f;
}

std::vector<std::int64_t> kernel_frequency_units(const GTermDescriptor& g,
                                                 std::span<const std::int64_t> tone_units) {
  if (tone_units.size() != static_cast<std::size_t>(g.k.tones())) throw InputError("tone count mismatch");
  std::vector<std::int64_t> f;
  for (const ToneRef& a : kernel_arguments(g)) f.push_back(a.sign * tone_units[a.tone]);
  return f;
}

std::string format_kernel(const GTermDescriptor& g) {
  std::ostringstream os;
  os << 'H' << g.order << '(';
  bool first = true;
  for (const ToneRef& a : kernel_arguments(g)) {
    os << (first ? "" : ",") << (a.sign < 0 ? "-" : "") << 'w' << a.tone + 1;
    first = false;
  }
  os << ')';
  return os.str();
}

}  // namespace volterra
