#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "eos/cost.hpp"

namespace eos {

/// Gradient norms below 1e-12 * (1 + |f|) make RP and Dir undefined.
inline double grad_floor(double loss) { return 1e-12 * (1.0 + std::fabs(loss)); }

/// Strictly increasing tau nodes in (0, 1].
class QuadratureGrid {
 public:
  explicit QuadratureGrid(std::vector<double> taus);
  /// {1/n, 2/n, ..., 1}
  static QuadratureGrid uniform(std::size_t n);
  /// {0.01, 0.02, ..., 1.00}
  static QuadratureGrid standard() { return uniform(100); }

  const std::vector<double>& taus() const { return taus_; }
  std::size_t size() const { return taus_.size(); }

 private:
  std::vector<double> taus_;
};

/// (f(theta - eta grad) - f(theta)) / (eta |grad|^2). Negative means descent.
double relative_progress(const CostFunction& cost, std::span<const double> theta, double eta);

/// <v, grad f(theta) - grad f(theta - v)> / |v|^2. Throws UndefinedMetric when
/// |v| <= min_norm.
double directional_smoothness(const CostFunction& cost, std::span<const double> theta,
                              std::span<const double> v, double min_norm = 0.0);

/// Dir_{eta tau u}(theta) sampled over a tau grid, and the quadrature of
/// 2 * int_0^1 tau * Dir d tau built from it.
struct TauProfile {
  std::vector<double> taus;
  std::vector<double> dirs;
  double mean = 0.0;
  double stddev = 0.0;
  /// Dir linearly extrapolated to tau = 0 from the two smallest nodes.
  double dir_at_zero = 0.0;
  double weighted_integral = 0.0;
};

/// Profile along an arbitrary update direction u (u = grad f for GD, a
/// stochastic gradient for SGD).
TauProfile dir_profile_along(const CostFunction& cost, std::span<const double> theta,
                             std::span<const double> direction, double eta,
                             const QuadratureGrid& grid);
TauProfile dir_profile(const CostFunction& cost, std::span<const double> theta, double eta,
                       const QuadratureGrid& grid = QuadratureGrid::standard());

/// Trapezoid rule for 2 * int_0^1 tau * Dir_{eta tau grad}(theta) d tau. The
/// integrand vanishes at tau = 0; if the grid stops short of 1, Dir is
/// extrapolated linearly from the two largest nodes.
double weighted_dir_integral(const CostFunction& cost, std::span<const double> theta, double eta,
                             const QuadratureGrid& grid = QuadratureGrid::standard());
/// Richardson extrapolation of the uniform n- and 2n-node trapezoid values.
double weighted_dir_integral_richardson(const CostFunction& cost, std::span<const double> theta,
                                        double eta, std::size_t n = 100);

struct IdentityCheck {
  double lhs = 0.0;       // RP
  double rhs = 0.0;       // -1 + (eta/2) * weighted integral
  double residual = 0.0;  // |lhs - rhs|
};

IdentityCheck verify_identity(const CostFunction& cost, std::span<const double> theta, double eta,
                              const QuadratureGrid& grid = QuadratureGrid::standard());

/// |RP - (-1 + (eta/2) Dir_{eta grad}(theta))|
double rp_approx_residual(const CostFunction& cost, std::span<const double> theta, double eta);

struct SharpnessOptions {
  double tol = 1e-6;
  int max_iter = 10000;
  std::uint64_t seed = 0x5eed;
  /// Starting vector for both phases; random when empty.
  Vector start;
};

struct SharpnessResult {
  double value = 0.0;
  Vector eigenvector;
  int iterations = 0;
  /// True for costs without a Hessian (ReLU): the value is the
  /// finite-difference surrogate.
  bool surrogate = false;
};

/// lambda_max of the Hessian by two-phase power iteration: |lambda|_max from
/// plain iteration on H, then the dominant eigenvalue of H + (s + 1) I, minus
/// the shift. Throws NotConverged with the last estimate.
SharpnessResult estimate_sharpness(const CostFunction& cost, std::span<const double> theta,
                                   const SharpnessOptions& options = {});
double sharpness(const CostFunction& cost, std::span<const double> theta, double tol = 1e-6,
                 int max_iter = 10000);

/// Max of sharpness over `samples` equally spaced points on
/// [theta, theta - eta grad]. A lower bound on the segment supremum.
double segment_max_sharpness(const CostFunction& cost, std::span<const double> theta, double eta,
                             int samples = 11, const SharpnessOptions& options = {});

struct MonteCarloEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
};

/// Draws one stochastic gradient at theta. Must be unbiased for grad f.
using GradientSampler =
    std::function<Vector(std::span<const double> theta, std::mt19937_64& rng)>;

/// Minibatch sampler: batch_size indices drawn uniformly with replacement. A
/// batch_size equal to the dataset size yields the full, deterministic batch.
GradientSampler minibatch_sampler(const CostFunction& cost, std::size_t batch_size);

/// (E f(theta - eta g) - f(theta)) / (eta |grad f|^2) by Monte Carlo. Sample k
/// uses its own generator derived from (seed, k), so estimates do not depend
/// on thread count.
MonteCarloEstimate expected_rp(const CostFunction& cost, std::span<const double> theta, double eta,
                               const GradientSampler& sampler, std::size_t num_batches,
                               std::uint64_t seed);
MonteCarloEstimate expected_rp(const CostFunction& cost, std::span<const double> theta, double eta,
                               std::size_t batch_size, std::size_t num_batches,
                               std::uint64_t seed);

enum class RhsForm {
  single_tau,  // -1 + (eta/2) E[|g|^2/|grad|^2 Dir_{eta g}]
  quadrature,  // -1 + (eta/2) 2 int tau E[|g|^2/|grad|^2 Dir_{eta tau g}] d tau
};

MonteCarloEstimate expected_rp_rhs(const CostFunction& cost, std::span<const double> theta,
                                   double eta, const GradientSampler& sampler,
                                   std::size_t num_batches, std::uint64_t seed,
                                   RhsForm form = RhsForm::single_tau,
                                   const QuadratureGrid& grid = QuadratureGrid::standard());
MonteCarloEstimate expected_rp_rhs(const CostFunction& cost, std::span<const double> theta,
                                   double eta, std::size_t batch_size, std::size_t num_batches,
                                   std::uint64_t seed, RhsForm form = RhsForm::single_tau,
                                   const QuadratureGrid& grid = QuadratureGrid::standard());

/// One record of the instrumented loops. Empty optionals are "undefined".
struct MetricSample {
  long iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  std::optional<double> rp;
  std::optional<double> dir;
  std::optional<double> sharpness;
  std::optional<double> identity_residual;
  std::optional<double> tau_dir_mean;
  std::optional<double> tau_dir_std;
  // SGD checkpoints only.
  std::optional<double> expected_rp;
  std::optional<double> expected_rp_rhs;
};

}  // namespace eos
