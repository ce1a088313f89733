#include "volterra/sweep_planner.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "volterra/errors.hpp"

namespace volterra {

std::size_t SweepPlan::triplet_count() const {
  if (axes.empty()) return 0;
  std::size_t n = 1;
  for (const auto& a : axes) n *= static_cast<std::size_t>(std::max<std::int64_t>(a.count, 0));
  return n;
}

std::vector<std::int64_t> SweepPlan::triplet_units(std::size_t t) const {
  if (t >= triplet_count()) throw InputError("triplet " + std::to_string(t) + " out of range");
  std::vector<std::int64_t> u(axes.size());
  for (std::size_t m = axes.size(); m-- > 0;) {
    const auto c = static_cast<std::size_t>(axes[m].count);
    u[m] = axes[m].at(static_cast<std::int64_t>(t % c));
    t /= c;
  }
  return u;
}

std::vector<double> SweepPlan::triplet_hz(std::size_t t) const {
  const auto u = triplet_units(t);
  std::vector<double> f(u.size());
  for (std::size_t m = 0; m < u.size(); ++m) f[m] = static_cast<double>(u[m]) * delta_f_hz;
  return f;
}

SweepPlan build_table2_plan() {
  SweepPlan p;
  p.id = "table2";
  p.delta_f_hz = 1e6;
  p.max_mixing_order = 3;
  p.axes = {{7, 120, 18}, {41, 120, 18}, {87, 120, 18}};
  return with_levels(std::move(p), {5.0, 10.0});
}

SweepPlan thin_plan(const SweepPlan& plan, int stride, int max_points) {
  if (stride < 1) throw InputError("thinning stride must be at least 1");
  SweepPlan p = plan;
  for (auto& a : p.axes) {
    std::int64_t count = (a.count + stride - 1) / stride;
    if (max_points > 0) count = std::min<std::int64_t>(count, max_points);
    a.step *= stride;
    a.count = count;
  }
  std::ostringstream id;
  id << plan.id << "/s" << stride;
  if (max_points > 0) id << "n" << max_points;
  p.id = id.str();
  return p;
}

SweepPlan with_levels(SweepPlan plan, std::vector<double> levels_dbm, int n_extra) {
  if (levels_dbm.empty()) throw InputError("amplitude schedule needs at least one level");
  plan.levels_dbm = std::move(levels_dbm);
  plan.n_extra = n_extra >= 0 ? n_extra
                              : default_extra_rows(plan.tones(), plan.max_mixing_order, plan.max_mixing_order,
                                                   plan.levels_dbm.size());
  plan.amplitudes = amplitude_schedule(plan.levels_dbm, plan.tones(), plan.z0, plan.n_extra, plan.seed);
  return plan;
}

PlanReport validate_plan(const SweepPlan& plan, std::size_t max_listed) {
  PlanReport rep;
  auto problem = [&](std::string s) {
    rep.ok = false;
    rep.problems.push_back(std::move(s));
  };
  if (plan.axes.empty()) problem("plan has no tone axes");
  if (!(plan.delta_f_hz > 0.0)) problem("resolution must be positive");
  if (plan.max_mixing_order < 1) problem("maximum mixing order must be at least 1");
  for (std::size_t m = 0; m < plan.axes.size(); ++m) {
    const auto& a = plan.axes[m];
    if (a.start < 1 || a.step < 1 || a.count < 1) {
      problem("axis " + std::to_string(m + 1) + " needs positive start, step and count");
    }
  }
  for (std::size_t r = 0; r < plan.amplitudes.size(); ++r) {
    if (plan.amplitudes[r].size() != plan.axes.size()) {
      problem("schedule row " + std::to_string(r) + " has the wrong tone count");
    }
  }
  if (!rep.ok) return rep;

  const int need = max_unknowns(plan.tones(), plan.max_mixing_order, plan.max_mixing_order);
  if (plan.amplitudes.size() < static_cast<std::size_t>(need)) {
    problem("schedule has " + std::to_string(plan.amplitudes.size()) + " rows but the largest system has " +
            std::to_string(need) + " unknowns");
  }

  // Every index with |k|_1 <= M0 in both signs, DC included.
  std::vector<FrequencyIndex> all;
  for (const auto& k : enumerate_output_indices(plan.tones(), plan.max_mixing_order, DcPolicy::include)) {
    all.push_back(k);
    if (!k.is_dc()) all.push_back(-k);
  }
  std::unordered_map<std::int64_t, std::size_t> seen;
  seen.reserve(all.size() * 2);
  for (std::size_t t = 0; t < plan.triplet_count(); ++t) {
    const auto units = plan.triplet_units(t);
    seen.clear();
    for (std::size_t i = 0; i < all.size(); ++i) {
      const auto [it, fresh] = seen.emplace(all[i].frequency_units(units), i);
      if (fresh) continue;
      ++rep.collision_count;
      rep.ok = false;
      if (rep.collisions.size() < max_listed) rep.collisions.push_back({t, all[it->second], all[i]});
    }
  }
  return rep;
}

double dbm_to_volts(double p_dbm, double z0) {
  if (!(z0 > 0.0)) throw InputError("reference impedance must be positive");
  return std::sqrt(2.0 * z0 * std::pow(10.0, (p_dbm - 30.0) / 10.0));
}

int max_unknowns(int tones, int max_mixing_order, int truncation) {
  std::size_t best = 0;
  for (const auto& k : enumerate_output_indices(tones, max_mixing_order, DcPolicy::include)) {
    std::size_t n = 0;
    for (int order = 1; order <= truncation; ++order) n += terms_at_index(k, order).size();
    best = std::max(best, n);
  }
  return static_cast<int>(best);
}

int default_extra_rows(int tones, int max_mixing_order, int truncation, std::size_t level_count) {
  const double base = std::pow(static_cast<double>(level_count), tones);
  const double want = 2.0 * max_unknowns(tones, max_mixing_order, truncation);
  return static_cast<int>(std::max(0.0, want - base));
}

std::vector<std::vector<double>> amplitude_schedule(const std::vector<double>& levels_dbm, int tones,
                                                    double z0, int n_extra, std::uint64_t seed) {
  if (levels_dbm.empty()) throw InputError("amplitude schedule needs at least one level");
  if (tones < 1) throw InputError("tone count must be at least 1");
  if (n_extra < 0) throw InputError("extra row count must be nonnegative");
  std::vector<double> volts(levels_dbm.size());
  std::transform(levels_dbm.begin(), levels_dbm.end(), volts.begin(),
                 [z0](double p) { return dbm_to_volts(p, z0); });

  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> digit(static_cast<std::size_t>(tones), 0);
  for (;;) {
    std::vector<double> row(static_cast<std::size_t>(tones));
    for (int m = 0; m < tones; ++m) row[m] = volts[digit[m]];
    rows.push_back(std::move(row));
    int pos = tones - 1;
    while (pos >= 0 && digit[pos] + 1 == volts.size()) digit[pos--] = 0;
    if (pos < 0) break;
    ++digit[pos];
  }

  const auto [lo, hi] = std::minmax_element(levels_dbm.begin(), levels_dbm.end());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> level(*lo, *hi);
  for (int e = 0; e < n_extra; ++e) {
    std::vector<double> row(static_cast<std::size_t>(tones));
    for (auto& v : row) v = dbm_to_volts(level(rng), z0);
    rows.push_back(std::move(row));
  }
  return rows;
}

void check_amplitude_bound(const SweepPlan& plan, double bound_v) {
  for (std::size_t r = 0; r < plan.amplitudes.size(); ++r) {
    for (std::size_t m = 0; m < plan.amplitudes[r].size(); ++m) {
      if (plan.amplitudes[r][m] > bound_v) {
        std::ostringstream os;
        os << "schedule row " << r << " tone " << m + 1 << " amplitude " << plan.amplitudes[r][m]
           << " V exceeds the " << bound_v << " V bound";
        throw InputError(os.str());
      }
    }
  }
}

double effective_resolution_hz(const SweepPlan& plan) {
  std::set<std::int64_t> pts;
  for (const auto& a : plan.axes) {
    for (std::int64_t i = 0; i < a.count; ++i) pts.insert(a.at(i));
  }
  if (pts.size() < 2) return 0.0;
  return static_cast<double>(*pts.rbegin() - *pts.begin()) / static_cast<double>(pts.size() - 1) *
         plan.delta_f_hz;
}

}  // namespace volterra
