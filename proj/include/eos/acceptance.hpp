#pragma once

#include <functional>
#include <string>
#include <vector>

namespace eos {

struct CriterionResult {
  int id = 0;
  std::string name;
  /// The headline quantity and the bound it is held to.
  double measured = 0.0;
  std::string relation;  // "<=", ">=" or "=="
  double bound = 0.0;
  bool within_bound = false;
  double runtime_s = 0.0;
  double runtime_limit_s = 0.0;
  /// within_bound and runtime_s <= runtime_limit_s
  bool pass = false;
  std::string detail;
};

struct AcceptanceOptions {
  /// Criterion ids to run; empty runs all.
  std::vector<int> only;
  /// Fault injection: the identity criterion integrates on a grid that only
  /// covers tau <= 0.1, so its residuals blow up.
  bool corrupt_grid = false;
};

inline constexpr int kCriterionCount = 11;

/// Runs the criteria in id order, calling `on_result` as each one finishes.
std::vector<CriterionResult> run_acceptance(
    const AcceptanceOptions& options = {},
    const std::function<void(const CriterionResult&)>& on_result = {});

/// One line: criterion=<id> name=<name> measured=<x> bound=<rel><y> pass=<bool> ...
std::string format_result(const CriterionResult& result);

}  // namespace eos
