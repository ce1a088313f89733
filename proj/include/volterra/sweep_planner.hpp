#pragma once

// Multi-tone sweep plans: per-tone frequency axes on a common resolution grid,
// collision checks on the mixing products of every triplet, and the amplitude
// schedule that over-determines the per-index least-squares systems.

#include <cstdint>
#include <string>
#include <vector>

#include "volterra/kernel_store.hpp"
#include "volterra/mixing_index.hpp"

namespace volterra {

struct SweepPlan {
  std::string id;
  double delta_f_hz = 1e6;
  int max_mixing_order = 3;
  std::vector<LatticeAxis> axes;  // one per tone, resolution units
  std::vector<double> levels_dbm;
  double z0 = 50.0;
  int n_extra = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> amplitudes;  // schedule rows, peak volts per tone

  int tones() const { return static_cast<int>(axes.size()); }
  std::size_t triplet_count() const;
  /// Mixed-radix decode, first axis most significant.
  std::vector<std::int64_t> triplet_units(std::size_t t) const;
  std::vector<double> triplet_hz(std::size_t t) const;
};

/// 7/41/87 MHz starts, 120 MHz steps, 18 points per axis, 1 MHz resolution,
/// {5, 10} dBm on 50 ohm.
SweepPlan build_table2_plan();

/// Keeps every `stride`-th point of each axis, at most max_points of them.
SweepPlan thin_plan(const SweepPlan& plan, int stride, int max_points = 0);

/// Replaces the level set and rebuilds the schedule (n_extra < 0 picks the default).
SweepPlan with_levels(SweepPlan plan, std::vector<double> levels_dbm, int n_extra = -1);

struct Collision {
  std::size_t triplet = 0;
  FrequencyIndex k;
  FrequencyIndex k_prime;
};

struct PlanReport {
  bool ok = true;
  std::size_t collision_count = 0;
  std::vector<Collision> collisions;  // first few only
  std::vector<std::string> problems;  // structural issues (axes, schedule size)
};

PlanReport validate_plan(const SweepPlan& plan, std::size_t max_listed = 64);

/// Peak volts of a sinusoid delivering p_dbm into z0.
double dbm_to_volts(double p_dbm, double z0);

/// Largest unknown count of any index system at this truncation.
int max_unknowns(int tones, int max_mixing_order, int truncation);

/// 2 rows per unknown of the largest system, minus the cross-product rows.
int default_extra_rows(int tones, int max_mixing_order, int truncation, std::size_t level_count);

/// Cross product of the per-tone levels (first tone slowest) followed by
/// n_extra rows drawn uniformly in dB between the lowest and highest level.
std::vector<std::vector<double>> amplitude_schedule(const std::vector<double>& levels_dbm, int tones,
                                                    double z0, int n_extra, std::uint64_t seed);

/// Throws InputError naming the first schedule amplitude above bound_v.
void check_amplitude_bound(const SweepPlan& plan, double bound_v);

/// Span of all axes over the number of distinct swept points.
double effective_resolution_hz(const SweepPlan& plan);

}  // namespace volterra
