#include "volterra/reference_systems.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numbers>

#include "volterra/errors.hpp"

namespace volterra {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Taylor coefficients of tanh at odd powers 1..9.
constexpr double kTanhSeries[] = {1.0, -1.0 / 3.0, 2.0 / 15.0, -17.0 / 315.0, 62.0 / 2835.0};

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

LinearBlock LinearBlock::lc_ladder(double l_h, double c_f, double rs, double rl, double dc_gain) {
  if (!(l_h > 0.0 && c_f > 0.0 && rs > 0.0 && rl > 0.0)) {
    throw InputError("ladder elements must be positive");
  }
  LinearBlock b;
  b.A << -1.0 / (rs * c_f), -1.0 / c_f, 0.0,
          1.0 / l_h, 0.0, -1.0 / l_h,
          0.0, 1.0 / c_f, -1.0 / (rl * c_f);
  b.B << 1.0 / (rs * c_f), 0.0, 0.0;
  // Unloaded divider gives v2 = Vs*RL/(Rs+RL) at DC.
  b.C << 0.0, 0.0, dc_gain * (rs + rl) / rl;
  b.z0 = rs;
  return b;
}

bool LinearBlock::is_stable() const {
  const Eigen::EigenSolver<Eigen::Matrix3d> es(A);
  return (es.eigenvalues().real().array() < 0.0).all();
}

double LinearBlock::slowest_time_constant() const {
  const Eigen::EigenSolver<Eigen::Matrix3d> es(A);
  return 1.0 / es.eigenvalues().real().cwiseAbs().minCoeff();
}

double LinearBlock::fastest_time_constant() const {
  const Eigen::EigenSolver<Eigen::Matrix3d> es(A);
  return 1.0 / es.eigenvalues().cwiseAbs().maxCoeff();
}

std::complex<double> analytic_transfer(const LinearBlock& block, double omega) {
  using Mat = Eigen::Matrix3cd;
  const Mat m = std::complex<double>(0.0, omega) * Mat::Identity() - block.A.cast<std::complex<double>>();
  const Eigen::Vector3cd x = m.inverse() * block.B.cast<std::complex<double>>();
  return (block.C.cast<std::complex<double>>() * x)(0) + block.D;
}

std::complex<double> transfer_hz(const LinearBlock& block, double f_hz) {
  return analytic_transfer(block, kTwoPi * f_hz);
}

BenchmarkSystem::State BenchmarkSystem::derivative(const State& x, double u) const {
  State dx;
  dx.segment<3>(0) = ha.derivative(x.segment<3>(0), u);
  dx.segment<3>(3) = hb.derivative(x.segment<3>(3), u);
  dx.segment<3>(6) = hc.derivative(x.segment<3>(6), u);
  return dx;
}

double BenchmarkSystem::output(const State& x, double u) const {
  const double a = ha.output(x.segment<3>(0), u);
  const double b = hb.output(x.segment<3>(3), u);
  const double c = hc.output(x.segment<3>(6), u);
  const double ab = mult.product(a, b);
  return a + ab + mult.product(ab, c);
}

double SurrogateAmplifier::nonlinearity(double v) const { return gain * vsat * std::tanh(v / vsat); }

SurrogateAmplifier::State SurrogateAmplifier::derivative(const State& x, double u) const {
  State dx;
  const Eigen::Vector3d xi = x.head<3>();
  dx.head<3>() = input.derivative(xi, u);
  dx.tail<3>() = output_block.derivative(x.tail<3>(), nonlinearity(input.output(xi, u)));
  return dx;
}

double SurrogateAmplifier::output(const State& x, double u) const {
  const double w = nonlinearity(input.output(x.head<3>(), u));
  return output_block.output(x.tail<3>(), w);
}

double SurrogateAmplifier::saturation_bound() const {
  return vsat / std::abs(analytic_transfer(input, 0.0));
}

double SurrogateAmplifier::series_coefficient(int n) const {
  if (n < 1 || n > 9) throw InputError("saturator series is tabulated for orders 1..9");
  if (n % 2 == 0) return 0.0;
  return gain * kTanhSeries[(n - 1) / 2] / std::pow(vsat, n - 1);
}

std::string system_id(const ReferenceSystem& sys) {
  return std::visit([](const auto& s) { return s.id(); }, sys);
}

ReferenceSystem make_system(const std::string& id) {
  if (id == "linear") return LinearSystem{};
  if (id == "benchmark") return BenchmarkSystem{};
  if (id == "surrogate") return SurrogateAmplifier{};
  throw InputError("unknown system '" + id + "' (expected linear, benchmark or surrogate)");
}

double saturation_bound(const ReferenceSystem& sys) {
  if (const auto* s = std::get_if<SurrogateAmplifier>(&sys)) return s->saturation_bound();
  return std::numeric_limits<double>::infinity();
}

double slowest_time_constant(const ReferenceSystem& sys) {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LinearSystem>) {
          return s.block.slowest_time_constant();
        } else if constexpr (std::is_same_v<T, BenchmarkSystem>) {
          return std::max({s.ha.slowest_time_constant(), s.hb.slowest_time_constant(),
                           s.hc.slowest_time_constant()});
        } else {
          return std::max(s.input.slowest_time_constant(), s.output_block.slowest_time_constant());
        }
      },
      sys);
}

double fastest_time_constant(const ReferenceSystem& sys) {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LinearSystem>) {
          return s.block.fastest_time_constant();
        } else if constexpr (std::is_same_v<T, BenchmarkSystem>) {
          return std::min({s.ha.fastest_time_constant(), s.hb.fastest_time_constant(),
                           s.hc.fastest_time_constant()});
        } else {
          return std::min(s.input.fastest_time_constant(), s.output_block.fastest_time_constant());
        }
      },
      sys);
}

std::complex<double> KernelOracle::operator()(std::span<const double> f_hz) const {
  const int n = static_cast<int>(f_hz.size());
  if (n < 1 || n > max_order_) {
    throw InputError("kernel oracle covers orders 1.." + std::to_string(max_order_) + ", asked for " +
                     std::to_string(n));
  }
  return fn_(f_hz);
}

std::complex<double> oracle_kernel(const BenchmarkSystem& sys, std::span<const double> f_hz) {
  const std::size_t n = f_hz.size();
  if (n < 1 || n > 3) throw InputError("benchmark kernels exist for orders 1..3");
  if (n == 1) return transfer_hz(sys.ha, f_hz[0]);
  const LinearBlock* blocks[] = {&sys.ha, &sys.hb, &sys.hc};
  std::array<std::array<std::complex<double>, 3>, 3> h{};  // h[block][argument]
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < n; ++i) h[b][i] = transfer_hz(*blocks[b], f_hz[i]);
  }
  std::array<std::size_t, 3> perm{0, 1, 2};
  std::complex<double> sum{};
  do {
    std::complex<double> term{1.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) term *= h[i][perm[i]];
    sum += term;
  } while (std::next_permutation(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n)));
  return sum;
}

std::complex<double> oracle_kernel(const SurrogateAmplifier& sys, std::span<const double> f_hz) {
  const int n = static_cast<int>(f_hz.size());
  const double a = sys.series_coefficient(n);
  if (a == 0.0) return {0.0, 0.0};
  std::complex<double> h = factorial(n) * a;
  double total = 0.0;
  for (double f : f_hz) {
    h *= transfer_hz(sys.input, f);
    total += f;
  }
  return h * transfer_hz(sys.output_block, total);
}

std::complex<double> oracle_kernel(const LinearSystem& sys, std::span<const double> f_hz) {
  if (f_hz.size() == 1) return transfer_hz(sys.block, f_hz[0]);
  return {0.0, 0.0};
}

KernelOracle oracle_kernels(const ReferenceSystem& sys) {
  return std::visit(
      [](const auto& s) -> KernelOracle {
        using T = std::decay_t<decltype(s)>;
        const int top = std::is_same_v<T, BenchmarkSystem> ? 3 : 9;
        return KernelOracle(top, [s](std::span<const double> f) { return oracle_kernel(s, f); });
      },
      sys);
}

}  // namespace volterra
