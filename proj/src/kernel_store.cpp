#include "volterra/kernel_store.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "volterra/errors.hpp"

namespace volterra {

namespace {

Coordinate sorted_descending(std::span<const std::int64_t> c, bool negate) {
  Coordinate out(c.begin(), c.end());
  if (negate) {
    for (auto& v : out) v = -v;
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

std::vector<std::int64_t> axis_points(const LatticeAxis& a) {
  std::vector<std::int64_t> p(static_cast<std::size_t>(a.count));
  for (std::int64_t i = 0; i < a.count; ++i) p[i] = a.at(i);
  return p;
}

// Signed lattice [-p_{K-1} .. -p_0, p_0 .. p_{K-1}] addressed without materializing it.
std::int64_t signed_point(const std::vector<std::int64_t>& p, std::size_t i) {
  const std::size_t k = p.size();
  return i < k ? -p[k - 1 - i] : p[i - k];
}

}  // namespace

bool LatticeAxis::contains(std::int64_t units) const {
  if (count <= 0 || units < start || units > stop()) return false;
  return (units - start) % step == 0;
}

CanonicalCoordinate canonicalize_coordinate(std::span<const std::int64_t> c) {
  std::int64_t sum = 0;
  for (auto v : c) sum += v;
  Coordinate pos = sorted_descending(c, false);
  if (sum > 0) return {std::move(pos), false, false};
  Coordinate neg = sorted_descending(c, true);
  if (sum < 0) return {std::move(neg), true, false};
  if (pos == neg) return {std::move(pos), false, true};
  if (pos > neg) return {std::move(pos), false, false};
  return {std::move(neg), true, false};
}

KernelGrid::KernelGrid(int order, double delta_f_hz, std::vector<LatticeAxis> axes)
    : order_(order), delta_f_hz_(delta_f_hz), axes_(std::move(axes)) {
  if (order_ < 1) throw InputError("kernel order must be at least 1");
  if (!(delta_f_hz_ > 0.0)) throw InputError("lattice resolution must be positive");
  if (axes_.empty()) throw InputError("kernel grid needs at least one lattice axis");
  for (const auto& a : axes_) {
    if (a.count < 1 || a.step < 1 || a.start < 1) {
      throw InputError("lattice axes must have positive start, step and count");
    }
    const auto p = axis_points(a);
    union_points_.insert(union_points_.end(), p.begin(), p.end());
  }
  std::sort(union_points_.begin(), union_points_.end());
  union_points_.erase(std::unique(union_points_.begin(), union_points_.end()), union_points_.end());

  if (order_ == 1) {
    slot_points_.push_back(union_points_);
    const std::size_t k = union_points_.size();
    const std::int64_t gap = k > 1 ? union_points_[k - 1] - union_points_[k - 2] : axes_.front().step;
    slot_half_step_.push_back(gap / 2);
  } else if (static_cast<std::size_t>(order_) <= axes_.size()) {
    // Sorted arguments map onto distinct source axes, lowest start first, so
    // the smallest argument sees the densest low-frequency coverage.
    std::vector<LatticeAxis> by_start = axes_;
    std::stable_sort(by_start.begin(), by_start.end(),
                     [](const LatticeAxis& a, const LatticeAxis& b) { return a.start < b.start; });
    for (int p = 0; p < order_; ++p) {
      slot_points_.push_back(axis_points(by_start[p]));
      slot_half_step_.push_back(by_start[p].step / 2);
    }
  }
}

Coordinate KernelGrid::to_units(std::span<const double> freqs_hz, bool validate) const {
  if (freqs_hz.size() != static_cast<std::size_t>(order_)) {
    throw InputError("order-" + std::to_string(order_) + " kernel queried with " +
                     std::to_string(freqs_hz.size()) + " arguments");
  }
  Coordinate units(freqs_hz.size());
  for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
    const double u = freqs_hz[i] / delta_f_hz_;
    const double r = std::round(u);
    if (validate && std::abs(u - r) > 1e-6) {
      std::ostringstream os;
      os << "argument " << i + 1 << " (" << freqs_hz[i] << " Hz) is not a multiple of the "
         << delta_f_hz_ << " Hz resolution";
      throw InputError(os.str());
    }
    units[i] = static_cast<std::int64_t>(r);
  }
  return units;
}

void KernelGrid::insert(std::span<const double> freqs_hz, std::complex<double> value) {
  const Coordinate units = to_units(freqs_hz, true);
  insert_units(units, value);
}

void KernelGrid::insert_units(std::span<const std::int64_t> units, std::complex<double> value) {
  if (frozen_) throw InputError("kernel grid is frozen");
  if (units.size() != static_cast<std::size_t>(order_)) {
    throw InputError("order-" + std::to_string(order_) + " kernel given " +
                     std::to_string(units.size()) + " arguments");
  }
  for (std::size_t i = 0; i < units.size(); ++i) {
    const std::int64_t a = units[i] < 0 ? -units[i] : units[i];
    if (!std::binary_search(union_points_.begin(), union_points_.end(), a)) {
      std::ostringstream os;
      os << "argument " << i + 1 << " (" << static_cast<double>(units[i]) * delta_f_hz_
         << " Hz) is off the sweep lattice";
      throw InputError(os.str());
    }
  }
  CanonicalCoordinate c = canonicalize_coordinate(units);
  std::complex<double> v = c.conjugate ? std::conj(value) : value;
  // H(c) = H(-c)* with -c a permutation of c forces a real sample.
  if (c.self_conjugate) v = {v.real(), 0.0};
  Accumulator& acc = samples_[std::move(c.key)];
  acc.sum += v;
  ++acc.count;
}

std::optional<std::complex<double>> KernelGrid::query_exact(std::span<const double> freqs_hz) const {
  const Coordinate units = to_units(freqs_hz, false);
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (std::abs(freqs_hz[i] / delta_f_hz_ - static_cast<double>(units[i])) > 1e-6) return std::nullopt;
  }
  return query_exact_units(units);
}

std::optional<std::complex<double>> KernelGrid::query_exact_units(
    std::span<const std::int64_t> units) const {
  if (units.size() != static_cast<std::size_t>(order_)) return std::nullopt;
  const CanonicalCoordinate c = canonicalize_coordinate(units);
  const auto it = samples_.find(c.key);
  if (it == samples_.end()) return std::nullopt;
  const std::complex<double> v = it->second.value();
  return c.conjugate ? std::conj(v) : v;
}

std::complex<double> KernelGrid::interpolate_raw(std::span<const double> units) const {
  std::vector<double> x(units.begin(), units.end());
  std::sort(x.begin(), x.end(), [](double a, double b) {
    const double aa = std::abs(a);
    const double ab = std::abs(b);
    return aa != ab ? aa < ab : a < b;
  });

  const std::size_t n = x.size();
  std::vector<std::int64_t> lo(n), hi(n);
  std::vector<double> t(n);
  for (std::size_t p = 0; p < n; ++p) {
    const auto& pts = slot_points_[p];
    const double top = static_cast<double>(pts.back());
    if (std::abs(x[p]) > top + static_cast<double>(slot_half_step_[p])) return {0.0, 0.0};
    const double xc = std::clamp(x[p], -top, top);
    // Largest signed node <= xc, leaving room for an upper neighbour.
    std::size_t a = 0;
    std::size_t b = 2 * pts.size() - 1;
    while (b - a > 1) {
      const std::size_t mid = (a + b) / 2;
      if (static_cast<double>(signed_point(pts, mid)) <= xc) {
        a = mid;
      } else {
        b = mid;
      }
    }
    lo[p] = signed_point(pts, a);
    hi[p] = signed_point(pts, a + 1);
    t[p] = (xc - static_cast<double>(lo[p])) / static_cast<double>(hi[p] - lo[p]);
  }

  double mag = 0.0;
  double phase = 0.0;
  double wsum = 0.0;
  double ref_phase = 0.0;
  bool have_ref = false;
  Coordinate corner(n);
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double w = 1.0;
    for (std::size_t p = 0; p < n; ++p) {
      const bool upper = (mask >> p) & 1U;
      w *= upper ? t[p] : 1.0 - t[p];
      corner[p] = upper ? hi[p] : lo[p];
    }
    if (w == 0.0) continue;
    const auto v = query_exact_units(corner);
    if (!v) continue;  // partial grids: renormalize over the corners present
    double ph = std::arg(*v);
    if (!have_ref) {
      ref_phase = ph;
      have_ref = true;
    } else {
      ph = ref_phase + std::remainder(ph - ref_phase, 2.0 * std::numbers::pi);
    }
    mag += w * std::abs(*v);
    phase += w * ph;
    wsum += w;
  }
  if (wsum == 0.0) return {0.0, 0.0};
  return std::polar(mag / wsum, phase / wsum);
}

std::complex<double> KernelGrid::query_interpolated(std::span<const double> freqs_hz) const {
  if (samples_.empty()) throw InputError("order-" + std::to_string(order_) + " kernel grid is empty");
  if (slot_points_.empty()) {
    throw InputError("order-" + std::to_string(order_) +
                     " kernels need at least as many swept axes as arguments to interpolate");
  }
  const Coordinate nearest = to_units(freqs_hz, false);
  bool on_nodes = true;
  std::vector<double> units(freqs_hz.size());
  for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
    units[i] = freqs_hz[i] / delta_f_hz_;
    on_nodes = on_nodes && units[i] == static_cast<double>(nearest[i]);
  }
  if (on_nodes) {
    if (auto v = query_exact_units(nearest)) return *v;
  }
  // Averaging with the mirrored query makes H(-w) = H(w)* hold exactly.
  std::vector<double> mirrored(units.size());
  std::transform(units.begin(), units.end(), mirrored.begin(), [](double u) { return -u; });
  return (interpolate_raw(units) + std::conj(interpolate_raw(mirrored))) * 0.5;
}

std::vector<double> KernelGrid::reach_hz() const {
  std::vector<double> r;
  for (std::size_t p = 0; p < slot_points_.size(); ++p) {
    r.push_back(static_cast<double>(slot_points_[p].back() + slot_half_step_[p]) * delta_f_hz_);
  }
  return r;
}

void KernelGrid::merge(const KernelGrid& other) {
  if (frozen_) throw InputError("kernel grid is frozen");
  if (other.order_ != order_ || other.axes_ != axes_ || other.delta_f_hz_ != delta_f_hz_) {
    throw InputError("cannot merge kernel grids built on different lattices");
  }
  for (const auto& [key, acc] : other.samples_) {
    Accumulator& mine = samples_[key];
    mine.sum += acc.sum;
    mine.count += acc.count;
  }
}

void KernelGrid::restore(Coordinate key, Accumulator acc) {
  if (key.size() != static_cast<std::size_t>(order_) || acc.count < 1) {
    throw InputError("malformed kernel sample record");
  }
  if (canonicalize_coordinate(key).key != key) throw InputError("kernel sample key is not canonical");
  samples_[std::move(key)] = acc;
}

KernelSetArchive::KernelSetArchive(ArchiveMetadata metadata, std::vector<KernelGrid> grids)
    : metadata_(std::move(metadata)), grids_(std::move(grids)) {
  for (std::size_t i = 0; i < grids_.size(); ++i) {
    if (grids_[i].order() != static_cast<int>(i) + 1) {
      throw InputError("kernel archive orders must be contiguous from 1");
    }
  }
}

const KernelGrid& KernelSetArchive::grid(int n) const {
  if (!has_order(n)) throw InputError("kernel archive has no order-" + std::to_string(n) + " grid");
  return grids_[static_cast<std::size_t>(n - 1)];
}

KernelGrid& KernelSetArchive::grid(int n) {
  if (!has_order(n)) throw InputError("kernel archive has no order-" + std::to_string(n) + " grid");
  return grids_[static_cast<std::size_t>(n - 1)];
}

KernelSetArchive KernelSetArchive::truncated(int n) const {
  std::vector<KernelGrid> g(grids_.begin(), grids_.begin() + std::min(n, max_order()));
  ArchiveMetadata m = metadata_;
  m.truncation_order = static_cast<int>(g.size());
  return KernelSetArchive(std::move(m), std::move(g));
}

}  // namespace volterra
