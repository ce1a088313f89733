#pragma once

// Kernel separation: one complex least-squares system per (triplet, output
// index) over the amplitude schedule, solved for the kernel groups landing on
// that index, with results folded into per-order kernel grids.

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "volterra/kernel_store.hpp"
#include "volterra/mixing_index.hpp"
#include "volterra/probing.hpp"
#include "volterra/sweep_planner.hpp"

namespace volterra {

struct ExtractionSettings {
  int truncation_order = 3;
  bool two_stage = false;
  int stage1_max_order = 1;
  double stage1_window_db = 0.5;  // stage-1 rows: within this of the weakest row
  bool column_scaling = true;
  double residual_tolerance = 1e-6;  // relative to |rhs|; exceeding it only warns
  double success_threshold = 0.95;
  int jobs = 1;
};

struct LSSystem {
  std::size_t triplet = 0;
  FrequencyIndex k;
  std::vector<GTermDescriptor> unknowns;
  std::vector<std::size_t> rows;  // schedule row ids
  Eigen::MatrixXd a;              // real coefficients, rows x unknowns
  Eigen::VectorXcd b;             // measured phasors
  Eigen::VectorXd column_scale;   // a = a_scaled * diag(scale)^-1 when scaling is on
  Eigen::VectorXd row_level_db;   // 20 log10 of the largest tone amplitude per row
};

struct LSSolution {
  bool ok = false;
  bool warning = false;
  std::string message;
  std::vector<std::complex<double>> values;  // aligned with LSSystem::unknowns
  int rank = 0;
  double condition = 0.0;
  double residual_norm = 0.0;
  double rhs_norm = 0.0;
  bool used_two_stage = false;
};

/// Kernel groups of orders 1..max_order at k, by ascending order then r.
std::vector<GTermDescriptor> unknowns_at_index(const FrequencyIndex& k, int max_order);

inline double ls_coefficient(const GTermDescriptor& g, std::span<const double> amplitudes) {
  return term_coefficient(g, amplitudes);
}

/// Throws InputError naming (triplet, row, index) when a phasor is missing.
LSSystem build_ls_system(const SpectralDataset& ds, std::size_t triplet, const FrequencyIndex& k,
                         const ExtractionSettings& settings);

/// Minimum-norm solution via complete orthogonal decomposition (never the
/// normal equations), optionally in two stages.
LSSolution solve_ls(const LSSystem& sys, const ExtractionSettings& settings);

/// 2-norm condition number of the (scaled) coefficient matrix.
double condition_number(const LSSystem& sys);

struct IndexFailure {
  std::size_t triplet = 0;
  FrequencyIndex k;
  std::string reason;
};

struct CompletenessReport {
  std::size_t systems = 0;
  std::size_t solved = 0;
  std::size_t warnings = 0;
  std::vector<IndexFailure> failures;
  double max_relative_residual = 0.0;
  double max_condition = 0.0;
  std::vector<std::size_t> points_per_order;  // canonical grid points after merging
  double resolved_fraction() const {
    return systems == 0 ? 0.0 : static_cast<double>(solved) / static_cast<double>(systems);
  }
  bool success = false;
};

struct ExtractionResult {
  KernelSetArchive archive;
  CompletenessReport report;
};

ExtractionResult extract(const SpectralDataset& ds, const SweepPlan& plan, const ExtractionSettings& settings);

/// Canonical points one triplet contributes per order (the 3 / 9 / 28 yield
/// for three tones at order 3); DC-index groups are counted separately.
std::vector<std::size_t> triplet_yield(const SweepPlan& plan, std::size_t triplet, int truncation,
                                       bool include_dc);

}  // namespace volterra
