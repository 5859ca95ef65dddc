#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "eos/config.hpp"
#include "eos/cost.hpp"
#include "eos/optimizer.hpp"

namespace eos {

/// Loads (synthetic or CIFAR) and optionally subsamples the spec's dataset.
std::shared_ptr<const Dataset> build_dataset(const DataSpec& data);

/// Builds the cost; `data` is required for MLP costs.
CostFunction build_cost(const CostSpec& cost, std::shared_ptr<const Dataset> data = nullptr);

/// theta0 when given, else the seeded MLP initialization.
ParamVector initial_point(const ExperimentSpec& spec, const CostFunction& cost);

/// One concrete run per (eta, activation) pair of the sweep; the spec itself
/// when there is no sweep. Names get an "_eta-..." / "_act-..." suffix.
std::vector<ExperimentSpec> expand_sweep(const ExperimentSpec& spec);

/// converged, diverged, bounded-oscillation (budget spent with the loss still
/// at least 1e-6 of its start) or budget-exhausted.
std::string run_status(const Trajectory& traj);

struct RunSummary {
  std::string label;
  double eta = 0.0;
  std::string activation;  // empty when the cost has none
  Outcome outcome = Outcome::budget_exhausted;
  std::string status;
  /// Regime name, or "n/a" when there were too few defined RP samples.
  std::string regime;
  std::string regime_rule;
  long iterations = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double max_param_norm = 0.0;
  /// Quadratic costs only: the analytic divergence prediction.
  std::optional<bool> oracle_diverges;
  double runtime_s = 0.0;
  std::uint64_t seed = 0;
  std::string trace_path;
};

struct RunResult {
  RunSummary summary;
  Trajectory trajectory;
};

/// Runs one concrete spec (no sweep expansion).
RunResult run_single(const ExperimentSpec& spec,
                     std::shared_ptr<const Dataset> data = nullptr);

/// Expands the sweep, runs every variant concurrently and writes
/// <dir>/<output>.csv per run plus <dir>/<output>_summary.csv. Summaries come
/// back in sweep order.
std::vector<RunSummary> run_experiment(const ExperimentSpec& spec,
                                       const std::filesystem::path& out_dir);

inline constexpr const char* kTraceHeader =
    "iter,loss,grad_norm,rp,dir,sharpness,identity_residual,tau_dir_mean,tau_dir_std";

/// `#`-prefixed resolved config and seed, then the fixed header and one row per sample.
void write_trace_csv(std::ostream& os, const ExperimentSpec& spec, const Trajectory& traj);
void write_summary_csv(std::ostream& os, const ExperimentSpec& spec,
                       const std::vector<RunSummary>& rows);

/// Default output directory: $EOSDIAG_OUTPUT_DIR, else ./eosdiag-out.
std::filesystem::path default_output_dir();

}  // namespace eos
