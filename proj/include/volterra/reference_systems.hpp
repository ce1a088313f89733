#pragma once

// Executable reference systems with closed-form Volterra kernels.
//
// Every system exposes a fixed-size state-space right-hand side (for the
// transient solver) and a kernel oracle. Kernel arguments are in Hz and follow
// the 1/n! convention: y_n(t) = 1/n! * sum over argument tuples of
// H_n(f_1..f_n) * prod U(f_i).

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <span>
#include <string>
#include <variant>

namespace volterra {

/// Third-order LC ladder: Rs -> shunt C1 -> series L -> shunt C2 -> RL.
/// States (v1, iL, v2); output 2*dc_gain*v2 so the passband gain is dc_gain
/// for matched terminations.
struct LinearBlock {
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  Eigen::Vector3d B = Eigen::Vector3d::Zero();
  Eigen::RowVector3d C = Eigen::RowVector3d::Zero();
  double D = 0.0;
  double z0 = 50.0;

  static LinearBlock lc_ladder(double l_h = 42.52e-9, double c_f = 8.5e-12, double rs = 50.0,
                               double rl = 50.0, double dc_gain = 1.0);

  Eigen::Vector3d derivative(const Eigen::Vector3d& x, double u) const { return A * x + B * u; }
  double output(const Eigen::Vector3d& x, double u) const { return C.dot(x) + D * u; }

  bool is_stable() const;
  /// 1 / min |Re(pole)|
  double slowest_time_constant() const;
  /// 1 / max |pole|
  double fastest_time_constant() const;
};

/// C (j*omega*I - A)^-1 B + D, omega in rad/s.
std::complex<double> analytic_transfer(const LinearBlock& block, double omega);
std::complex<double> transfer_hz(const LinearBlock& block, double f_hz);

/// Voltage-mode multiplier: the output node settles where no current flows.
struct Multiplier {
  double zf = 50.0;
  double evaluate_memoryless(double v1, double v2, double v3) const { return (v1 * v2 - v3) / zf; }
  double product(double v1, double v2) const { return v1 * v2; }
};

struct LinearSystem {
  static constexpr int kStates = 3;
  using State = Eigen::Matrix<double, kStates, 1>;

  LinearBlock block = LinearBlock::lc_ladder();

  std::string id() const { return "linear"; }
  State derivative(const State& x, double u) const { return block.derivative(x, u); }
  double output(const State& x, double u) const { return block.output(x, u); }
};

/// y = a + a*b + a*b*c, with a, b, c three buffered blocks fed by the input.
struct BenchmarkSystem {
  static constexpr int kStates = 9;
  using State = Eigen::Matrix<double, kStates, 1>;

  LinearBlock ha = LinearBlock::lc_ladder();
  LinearBlock hb = LinearBlock::lc_ladder();
  LinearBlock hc = LinearBlock::lc_ladder();
  Multiplier mult;

  std::string id() const { return "benchmark"; }
  State derivative(const State& x, double u) const;
  double output(const State& x, double u) const;
};

/// Wiener-Hammerstein chain: input ladder, g*Vsat*tanh(v/Vsat), output ladder.
struct SurrogateAmplifier {
  static constexpr int kStates = 6;
  using State = Eigen::Matrix<double, kStates, 1>;

  LinearBlock input = LinearBlock::lc_ladder(42.52e-9, 8.5e-12, 50.0, 50.0, 0.25);
  LinearBlock output_block = LinearBlock::lc_ladder();
  double vsat = 0.07;
  double gain = 4.0;

  std::string id() const { return "surrogate"; }
  double nonlinearity(double v) const;
  State derivative(const State& x, double u) const;
  double output(const State& x, double u) const;
  /// Port-referred drive at which the saturator input reaches Vsat.
  double saturation_bound() const;
  /// Polynomial coefficient a_n of the saturator (zero for even n); n <= 9.
  double series_coefficient(int n) const;
};

using ReferenceSystem = std::variant<LinearSystem, BenchmarkSystem, SurrogateAmplifier>;

std::string system_id(const ReferenceSystem& sys);
ReferenceSystem make_system(const std::string& id);
double saturation_bound(const ReferenceSystem& sys);
double slowest_time_constant(const ReferenceSystem& sys);
double fastest_time_constant(const ReferenceSystem& sys);

/// Kernel values at signed frequency tuples (Hz); the tuple length is the order.
class KernelOracle {
 public:
  using Fn = std::function<std::complex<double>(std::span<const double>)>;

  KernelOracle() = default;
  KernelOracle(int max_order, Fn fn) : max_order_(max_order), fn_(std::move(fn)) {}

  int max_order() const { return max_order_; }
  std::complex<double> operator()(std::span<const double> f_hz) const;

 private:
  int max_order_ = 0;
  Fn fn_;
};

/// Benchmark kernels as permutation sums of block products; orders 1..3 only.
std::complex<double> oracle_kernel(const BenchmarkSystem& sys, std::span<const double> f_hz);
std::complex<double> oracle_kernel(const SurrogateAmplifier& sys, std::span<const double> f_hz);
std::complex<double> oracle_kernel(const LinearSystem& sys, std::span<const double> f_hz);

KernelOracle oracle_kernels(const ReferenceSystem& sys);

}  // namespace volterra
