#include "volterra/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "volterra/errors.hpp"
#include "volterra/formats.hpp"
#include "volterra/parallel.hpp"

namespace volterra {

namespace {

struct Partial {
  Eigen::VectorXcd x;
  int rank = 0;
};

// Minimum-norm LS on a row/column subset; columns scaled by `scale`.
Partial solve_subset(const LSSystem& sys, const std::vector<Eigen::Index>& rows,
                     const std::vector<Eigen::Index>& cols, const Eigen::VectorXcd& rhs) {
  Eigen::MatrixXd a(rows.size(), cols.size());
  Eigen::VectorXd re(rows.size()), im(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      a(i, j) = sys.a(rows[i], cols[j]) * sys.column_scale(cols[j]);
    }
    re(i) = rhs(rows[i]).real();
    im(i) = rhs(rows[i]).imag();
  }
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  const Eigen::VectorXd xr = cod.solve(re);
  const Eigen::VectorXd xi = cod.solve(im);
  Partial p;
  p.rank = static_cast<int>(cod.rank());
  p.x.resize(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    p.x(j) = std::complex<double>(xr(j), xi(j)) * sys.column_scale(cols[j]);
  }
  return p;
}

std::vector<Eigen::Index> iota(Eigen::Index n) {
  std::vector<Eigen::Index> v(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) v[i] = i;
  return v;
}

struct TripletOutcome {
  std::vector<std::pair<int, std::pair<Coordinate, std::complex<double>>>> samples;
  std::size_t systems = 0;
  std::size_t solved = 0;
  std::size_t warnings = 0;
  std::vector<IndexFailure> failures;
  double max_relative_residual = 0.0;
  double max_condition = 0.0;
};

}  // namespace

std::vector<GTermDescriptor> unknowns_at_index(const FrequencyIndex& k, int max_order) {
  std::vector<GTermDescriptor> out;
  for (int n = 1; n <= max_order; ++n) {
    auto t = terms_at_index(k, n);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

LSSystem build_ls_system(const SpectralDataset& ds, std::size_t triplet, const FrequencyIndex& k,
                         const ExtractionSettings& settings) {
  LSSystem sys;
  sys.triplet = triplet;
  sys.k = k;
  sys.unknowns = unknowns_at_index(k, settings.truncation_order);
  const auto pos = ds.position(canonicalize_index(k).index);
  if (!pos) throw InputError("index " + k.to_string() + " is not part of the dataset");
  const std::size_t rows = ds.amplitudes.size();
  const auto cols = static_cast<Eigen::Index>(sys.unknowns.size());
  sys.a.resize(static_cast<Eigen::Index>(rows), cols);
  sys.b.resize(static_cast<Eigen::Index>(rows));
  sys.row_level_db.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto ph = ds.phasor(triplet, r, k);
    if (!ph) {
      std::ostringstream os;
      os << "missing phasor: triplet " << triplet << ", amplitude row " << r << ", index " << k.to_string();
      throw InputError(os.str());
    }
    sys.rows.push_back(r);
    sys.b(r) = *ph;
    const auto& v = ds.amplitudes[r];
    for (Eigen::Index j = 0; j < cols; ++j) sys.a(r, j) = term_coefficient(sys.unknowns[j], v);
    const double peak = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
    sys.row_level_db(r) = peak > 0.0 ? 20.0 * std::log10(peak) : -std::numeric_limits<double>::infinity();
  }
  sys.column_scale = Eigen::VectorXd::Ones(cols);
  if (settings.column_scaling) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double nrm = sys.a.col(j).norm();
      if (nrm > 0.0) sys.column_scale(j) = 1.0 / nrm;
    }
  }
  return sys;
}

double condition_number(const LSSystem& sys) {
  if (sys.a.size() == 0) return 0.0;
  const Eigen::MatrixXd scaled = sys.a * sys.column_scale.asDiagonal();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
  const auto& s = svd.singularValues();
  const double lo = s(s.size() - 1);
  return lo > 0.0 ? s(0) / lo : std::numeric_limits<double>::infinity();
}

LSSolution solve_ls(const LSSystem& sys, const ExtractionSettings& settings) {
  LSSolution sol;
  const Eigen::Index n = sys.a.cols();
  const Eigen::Index m = sys.a.rows();
  sol.condition = condition_number(sys);
  sol.rhs_norm = sys.b.norm();
  if (n == 0) {
    sol.ok = true;
    return sol;
  }
  if (m < n) {
    sol.message = "fewer rows (" + std::to_string(m) + ") than unknowns (" + std::to_string(n) + ")";
    return sol;
  }

  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(n);
  std::vector<Eigen::Index> low, high;
  for (Eigen::Index j = 0; j < n; ++j) {
    (sys.unknowns[j].order <= settings.stage1_max_order ? low : high).push_back(j);
  }
  bool staged = false;
  if (settings.two_stage && !low.empty() && !high.empty()) {
    const double floor = sys.row_level_db.minCoeff();
    std::vector<Eigen::Index> weak;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (sys.row_level_db(r) <= floor + settings.stage1_window_db) weak.push_back(r);
    }
    if (weak.size() >= low.size()) {
      const Partial p1 = solve_subset(sys, weak, low, sys.b);
      if (p1.rank == static_cast<int>(low.size())) {
        Eigen::VectorXcd rhs = sys.b;
        for (std::size_t j = 0; j < low.size(); ++j) rhs -= sys.a.col(low[j]).cast<std::complex<double>>() * p1.x(j);
        const Partial p2 = solve_subset(sys, iota(m), high, rhs);
        if (p2.rank == static_cast<int>(high.size())) {
          for (std::size_t j = 0; j < low.size(); ++j) x(low[j]) = p1.x(j);
          for (std::size_t j = 0; j < high.size(); ++j) x(high[j]) = p2.x(j);
          sol.rank = p1.rank + p2.rank;
          staged = true;
        }
      }
    }
    if (!staged) {
      sol.warning = true;
      sol.message = "two-stage solve not possible, fell back to a single stage";
    }
  }
  if (!staged) {
    const Partial p = solve_subset(sys, iota(m), iota(n), sys.b);
    sol.rank = p.rank;
    x = p.x;
    if (p.rank < n) {
      std::ostringstream os;
      os << "rank " << p.rank << " of " << n << " unknowns (condition " << sol.condition << ")";
      sol.message = os.str();
      return sol;
    }
  }
  sol.used_two_stage = staged;
  sol.values.assign(x.data(), x.data() + n);
  sol.residual_norm = (sys.a.cast<std::complex<double>>() * x - sys.b).norm();
  sol.ok = true;
  if (sol.rhs_norm > 0.0 && sol.residual_norm > settings.residual_tolerance * sol.rhs_norm) {
    sol.warning = true;
    std::ostringstream os;
    os << "relative residual " << sol.residual_norm / sol.rhs_norm << " above tolerance";
    sol.message = sol.message.empty() ? os.str() : sol.message + "; " + os.str();
  }
  return sol;
}

ExtractionResult extract(const SpectralDataset& ds, const SweepPlan& plan, const ExtractionSettings& settings) {
  const int order = settings.truncation_order;
  if (order < 1 || order > plan.max_mixing_order) {
    throw InputError("truncation order must lie in [1, " + std::to_string(plan.max_mixing_order) + "]");
  }
  if (ds.tones() != plan.tones() || ds.max_mixing_order() != plan.max_mixing_order) {
    throw InputError("dataset tone count or mixing order does not match the plan");
  }
  const std::size_t triplets = plan.triplet_count();
  if (!ds.triplets.empty()) {
    if (ds.triplets.size() != triplets) throw InputError("dataset and plan disagree on the triplet count");
    for (std::size_t t = 0; t < triplets; ++t) {
      if (ds.triplets[t] != plan.triplet_units(t)) {
        throw InputError("dataset triplet " + std::to_string(t) + " has different tone frequencies than the plan");
      }
    }
  }

  std::vector<TripletOutcome> outcomes(triplets);
  parallel_for(triplets, settings.jobs, [&](std::size_t t) {
    TripletOutcome& out = outcomes[t];
    const auto units = plan.triplet_units(t);
    for (const auto& k : ds.indices()) {
      if (unknowns_at_index(k, order).empty()) continue;
      ++out.systems;
      try {
        const LSSystem sys = build_ls_system(ds, t, k, settings);
        const LSSolution sol = solve_ls(sys, settings);
        out.max_condition = std::max(out.max_condition, sol.condition);
        if (!sol.ok) {
          out.failures.push_back({t, k, sol.message});
          continue;
        }
        ++out.solved;
        if (sol.warning) ++out.warnings;
        if (sol.rhs_norm > 0.0) {
          out.max_relative_residual = std::max(out.max_relative_residual, sol.residual_norm / sol.rhs_norm);
        }
        for (std::size_t j = 0; j < sys.unknowns.size(); ++j) {
          const auto& g = sys.unknowns[j];
          out.samples.push_back({g.order, {kernel_frequency_units(g, units), sol.values[j]}});
        }
      } catch (const InputError& e) {
        out.failures.push_back({t, k, e.what()});
      }
    }
  });

  std::vector<KernelGrid> grids;
  for (int n = 1; n <= order; ++n) grids.emplace_back(n, plan.delta_f_hz, plan.axes);
  ExtractionResult res;
  CompletenessReport& rep = res.report;
  // Fixed triplet order keeps the averaged grids independent of the job count.
  for (auto& out : outcomes) {
    for (const auto& [n, s] : out.samples) grids[static_cast<std::size_t>(n - 1)].insert_units(s.first, s.second);
    rep.systems += out.systems;
    rep.solved += out.solved;
    rep.warnings += out.warnings;
    rep.max_relative_residual = std::max(rep.max_relative_residual, out.max_relative_residual);
    rep.max_condition = std::max(rep.max_condition, out.max_condition);
    rep.failures.insert(rep.failures.end(), out.failures.begin(), out.failures.end());
  }
  for (auto& g : grids) {
    rep.points_per_order.push_back(g.size());
    g.freeze();
  }
  rep.success = rep.resolved_fraction() >= settings.success_threshold;

  ArchiveMetadata meta;
  meta.plan_id = plan.id;
  meta.truncation_order = order;
  meta.extraction_settings = settings_to_json(settings);
  res.archive = KernelSetArchive(std::move(meta), std::move(grids));
  return res;
}

std::vector<std::size_t> triplet_yield(const SweepPlan& plan, std::size_t triplet, int truncation,
                                       bool include_dc) {
  const auto units = plan.triplet_units(triplet);
  std::vector<std::set<Coordinate>> seen(static_cast<std::size_t>(truncation));
  const DcPolicy dc = include_dc ? DcPolicy::include : DcPolicy::exclude;
  for (const auto& k : enumerate_output_indices(plan.tones(), plan.max_mixing_order, dc)) {
    for (const auto& g : unknowns_at_index(k, truncation)) {
      const auto c = kernel_frequency_units(g, units);
      seen[static_cast<std::size_t>(g.order - 1)].insert(canonicalize_coordinate(c).key);
    }
  }
  std::vector<std::size_t> out;
  for (const auto& s : seen) out.push_back(s.size());
  return out;
}

}  // namespace volterra
