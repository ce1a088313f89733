#pragma once

// Intermodulation bookkeeping for M-tone probing: output-frequency indices,
// their canonical (positive-frequency) form, and the symmetric kernel terms
// that land on each index.

#include <compare>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace volterra {

/// Signed mixing vector [k1..kM] naming the output frequency k1*w1 + ... + kM*wM.
class FrequencyIndex {
 public:
  FrequencyIndex() = default;
  explicit FrequencyIndex(std::vector<int> k) : k_(std::move(k)) {}
  FrequencyIndex(std::initializer_list<int> k) : k_(k) {}

  int tones() const { return static_cast<int>(k_.size()); }
  int operator[](std::size_t m) const { return k_[m]; }
  std::span<const int> values() const { return k_; }

  /// |k1| + ... + |kM|
  int mixing_order() const;
  bool is_dc() const;
  /// First nonzero entry positive (the all-zero DC index counts as canonical).
  bool is_canonical() const;

  FrequencyIndex operator-() const;
  /// Integer dot product with tone frequencies expressed in resolution units.
  std::int64_t frequency_units(std::span<const std::int64_t> tone_units) const;
  double frequency_hz(std::span<const double> tone_hz) const;

  std::string to_string() const;

  friend bool operator==(const FrequencyIndex&, const FrequencyIndex&) = default;
  friend auto operator<=>(const FrequencyIndex&, const FrequencyIndex&) = default;

 private:
  std::vector<int> k_;
};

struct CanonicalIndex {
  FrequencyIndex index;
  bool conjugate = false;  // true when the input was replaced by its negation
};

CanonicalIndex canonicalize_index(const FrequencyIndex& k);

enum class DcPolicy { exclude, include };

/// Every canonical index with 1 <= |k|_1 <= max_mixing_order, ordered by
/// (|k|_1, lexicographic). With DcPolicy::include the all-zero index leads.
std::vector<FrequencyIndex> enumerate_output_indices(int tones, int max_mixing_order,
                                                     DcPolicy dc = DcPolicy::exclude);

/// One collected group of identical symmetric kernels: order n kernels with
/// |k_m| + r_m arguments at sign(k_m)*w_m and r_m at -sign(k_m)*w_m.
struct GTermDescriptor {
  FrequencyIndex k;
  std::vector<int> r;
  int order = 0;

  friend bool operator==(const GTermDescriptor&, const GTermDescriptor&) = default;
  friend auto operator<=>(const GTermDescriptor&, const GTermDescriptor&) = default;
};

bool is_valid(const GTermDescriptor& g);

/// n! / prod_m (|k_m| + r_m)! r_m!  -- how many of the (2M)^n summands share this kernel.
std::uint64_t term_multiplicity(const GTermDescriptor& g);

/// Number of summands in the order-n expansion of an M-tone input: (2M)^n.
std::uint64_t count_terms(int tones, int order);

/// A kernel argument: tone m (0-based) with sign +1 or -1.
struct ToneRef {
  int tone = 0;
  int sign = 1;

  friend bool operator==(const ToneRef&, const ToneRef&) = default;
  friend auto operator<=>(const ToneRef&, const ToneRef&) = default;
};

using KernelArgs = std::vector<ToneRef>;

/// Argument list laid out tone by tone, same-sign arguments first.
KernelArgs kernel_arguments(const GTermDescriptor& g);

/// Collects an arbitrary argument list into its descriptor (index may be non-canonical).
GTermDescriptor descriptor_of(std::span<const ToneRef> args, int tones);

struct CanonicalArgs {
  KernelArgs args;
  bool conjugate = false;
};

/// Sorts arguments into the tone-by-tone layout; flips every sign (and sets
/// the flag) when the resulting index would be non-canonical.
CanonicalArgs canonicalize_kernel_args(std::span<const ToneRef> args, int tones);

/// All descriptors of exactly `order` landing on index k, r ascending lexicographically.
std::vector<GTermDescriptor> terms_at_index(const FrequencyIndex& k, int order);

using KernelTable = std::map<FrequencyIndex, std::vector<GTermDescriptor>>;

/// Canonical index -> order-n kernel groups. Even orders include the DC index.
KernelTable enumerate_kernels_for_order(int tones, int max_mixing_order, int order);

/// Number of descriptors in a table, optionally skipping the DC entry.
std::size_t kernel_count(const KernelTable& table, DcPolicy dc = DcPolicy::include);

/// Weight of kernel group g in the phasor at its index for real tone
/// amplitudes V: prod (V_m/2)^(|k_m|+2r_m) / prod (|k_m|+r_m)! r_m!.
double term_coefficient(const GTermDescriptor& g, std::span<const double> amplitudes);

/// Signed argument frequencies of g in the kernel_arguments layout.
std::vector<double> kernel_frequencies(const GTermDescriptor& g, std::span<const double> tone_hz);
std::vector<std::int64_t> kernel_frequency_units(const GTermDescriptor& g,
                                                 std::span<const std::int64_t> tone_units);

/// "H3(w1,w2,-w2)" with 1-based tone labels.
std::string format_kernel(const GTermDescriptor& g);

}  // namespace volterra
