#pragma once

// Symmetric Volterra kernel samples on a swept frequency lattice.
//
// Coordinates are signed integer multiples of the plan resolution. A sample is
// stored once under its canonical coordinate (permutation and global sign
// folded away), so permutation and conjugate symmetry of point queries hold
// exactly by construction.

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace volterra {

/// Regular positive lattice start + i*step, i < count, in resolution units.
struct LatticeAxis {
  std::int64_t start = 0;
  std::int64_t step = 1;
  std::int64_t count = 0;

  std::int64_t at(std::int64_t i) const { return start + i * step; }
  std::int64_t stop() const { return at(count - 1); }
  bool contains(std::int64_t units) const;

  friend bool operator==(const LatticeAxis&, const LatticeAxis&) = default;
};

using Coordinate = std::vector<std::int64_t>;

struct CanonicalCoordinate {
  Coordinate key;         // sorted descending
  bool conjugate = false; // stored sample must be conjugated for the query
  bool self_conjugate = false;
};

/// Folds permutation and global sign: the key is the descending sort of
/// whichever of (c, -c) has the positive sum, ties broken lexicographically.
CanonicalCoordinate canonicalize_coordinate(std::span<const std::int64_t> c);

class KernelGrid {
 public:
  struct Accumulator {
    std::complex<double> sum{};
    std::int64_t count = 0;
    std::complex<double> value() const { return sum / static_cast<double>(count); }
  };
  using SampleMap = std::map<Coordinate, Accumulator>;

  KernelGrid(int order, double delta_f_hz, std::vector<LatticeAxis> axes);

  int order() const { return order_; }
  double delta_f_hz() const { return delta_f_hz_; }
  const std::vector<LatticeAxis>& axes() const { return axes_; }
  const SampleMap& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  /// Stores a sample (duplicates average with the incumbent). Frequencies in Hz.
  void insert(std::span<const double> freqs_hz, std::complex<double> value);
  void insert_units(std::span<const std::int64_t> units, std::complex<double> value);

  std::optional<std::complex<double>> query_exact(std::span<const double> freqs_hz) const;
  std::optional<std::complex<double>> query_exact_units(std::span<const std::int64_t> units) const;

  /// Multilinear interpolation of magnitude and unwrapped phase on the signed
  /// lattice; zero past the band edge plus half a step on any axis. Lattice
  /// samples come back bit-identical.
  std::complex<double> query_interpolated(std::span<const double> freqs_hz) const;

  /// Largest |f| (Hz) that query_interpolated does not zero, per sorted argument slot.
  std::vector<double> reach_hz() const;

  /// Averages another partial grid into this one (sum/count merge).
  void merge(const KernelGrid& other);
  /// Restores a stored accumulator verbatim (file loading).
  void restore(Coordinate key, Accumulator acc);

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

 private:
  Coordinate to_units(std::span<const double> freqs_hz, bool validate) const;
  std::complex<double> interpolate_raw(std::span<const double> units) const;

  int order_;
  double delta_f_hz_;
  std::vector<LatticeAxis> axes_;
  std::vector<std::vector<std::int64_t>> slot_points_;  // per sorted-argument slot
  std::vector<std::int64_t> slot_half_step_;
  std::vector<std::int64_t> union_points_;
  SampleMap samples_;
  bool frozen_ = false;
};

struct ArchiveMetadata {
  std::string system_id;
  std::string plan_id;
  int truncation_order = 0;
  std::string extraction_settings;  // serialized settings, JSON text
};

/// One grid per order 1..M.
class KernelSetArchive {
 public:
  KernelSetArchive() = default;
  KernelSetArchive(ArchiveMetadata metadata, std::vector<KernelGrid> grids);

  const ArchiveMetadata& metadata() const { return metadata_; }
  int max_order() const { return static_cast<int>(grids_.size()); }
  bool has_order(int n) const { return n >= 1 && n <= max_order(); }
  const KernelGrid& grid(int n) const;
  KernelGrid& grid(int n);
  const std::vector<KernelGrid>& grids() const { return grids_; }

  /// Copy restricted to orders 1..n.
  KernelSetArchive truncated(int n) const;

 private:
  ArchiveMetadata metadata_;
  std::vector<KernelGrid> grids_;
};

}  // namespace volterra
