#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "eos/cost.hpp"
#include "eos/metrics.hpp"

namespace eos {

/// Which diagnostics the loops compute at each recorded step.
struct MetricFlags {
  bool rp = true;
  bool dir = true;
  bool sharpness = false;
  bool identity = false;
  bool tau_sweep = false;
  bool expected_rp = false;
};

struct OptimizerConfig {
  double eta = 0.0;
  /// GD iterations.
  long max_iter = 1000;
  /// SGD epochs.
  long epochs = 10;
  /// Record every k-th iterate; 0 picks 1 below 1000 parameters, else 5.
  long metric_cadence = 0;
  /// Stop once training accuracy reaches this fraction (classification costs).
  std::optional<double> stop_accuracy;
  /// Stop as converged once |grad| falls to this value.
  double grad_tolerance = 1e-10;
  double blowup_threshold = 1e12;
  std::uint64_t seed = 0;
  /// Unset means full-batch GD.
  std::optional<std::size_t> batch_size;

  MetricFlags metrics;
  SharpnessOptions sharpness;
  std::vector<double> tau_grid;  // empty: {0.01, ..., 1}
  std::size_t expected_rp_batches = 200;
  RhsForm rhs_form = RhsForm::single_tau;

  void validate() const;
  long cadence_for(std::size_t dimension) const;
  QuadratureGrid grid() const;
};

enum class Outcome { converged, budget_exhausted, diverged };
std::string to_string(Outcome outcome);

struct Trajectory {
  std::vector<MetricSample> samples;
  /// Last iterate. May hold non-finite entries when the run diverged.
  Vector final_theta;
  Outcome outcome = Outcome::budget_exhausted;
  long iterations = 0;
  /// max_t |theta_t| over every iterate, not only recorded ones.
  double max_param_norm = 0.0;
  double eta = 0.0;
};

/// Evaluation failure inside a loop, tagged with the iteration it happened at.
class RunError : public std::runtime_error {
 public:
  RunError(long iteration, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

/// theta_{t+1} = theta_t - eta grad f(theta_t), instrumented.
Trajectory gd_run(const CostFunction& cost, const ParamVector& theta0,
                  const OptimizerConfig& config);

/// Epoch-shuffled minibatch SGD. Indices inside a batch are summed in
/// ascending order, so batch_size = n reproduces gd_run exactly. One sample
/// per epoch, taken at its end.
Trajectory sgd_run(const CostFunction& cost, const ParamVector& theta0,
                   const OptimizerConfig& config);

enum class Regime { stable, unstable, diverged };
std::string to_string(Regime regime);

struct RegimeThresholds {
  double stable_rp = -0.5;
  double stable_fraction = 0.9;
  double unstable_band = 0.25;
  double unstable_fraction = 0.5;
  std::size_t min_samples = 10;
};

struct RegimeReport {
  Regime regime = Regime::stable;
  std::size_t defined_rp = 0;
  double fraction_below_stable = 0.0;  // share of RP < stable_rp
  double fraction_in_band = 0.0;       // share of |RP| < unstable_band
  bool loss_non_increasing = false;
  bool loss_decreased = false;
  std::string rule;  // which rule decided
};

RegimeReport classify_regime(const Trajectory& traj, double eta,
                             const RegimeThresholds& thresholds = {});

struct EscapeReport {
  std::size_t trials = 0;
  double fraction_escaped = 0.0;
  /// Every iterate of every trial stayed finite.
  bool all_finite = true;
  double max_param_norm = 0.0;
  double max_final_distance = 0.0;
};

/// GD from `trials` random starts at distance perturb_scale from p. A trial
/// escapes when its final distance to p exceeds 10x the initial one.
EscapeReport escape_experiment(const CostFunction& cost, const ParamVector& p,
                               double perturb_scale, double eta, long iters, std::size_t trials,
                               std::uint64_t seed);

}  // namespace eos
