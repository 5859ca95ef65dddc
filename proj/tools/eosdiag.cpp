// eosdiag: run configured experiments, step-size sweeps and the acceptance suite.
//
// Exit codes: 0 success, 1 failed criterion or run error, 2 usage or config error.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "eos/acceptance.hpp"
#include "eos/config.hpp"
#include "eos/errors.hpp"
#include "eos/experiment.hpp"

namespace {

constexpr int kUsage = 2;
constexpr int kFailure = 1;

void print_table(const std::vector<eos::RunSummary>& rows, bool with_oracle) {
  std::printf("%-40s %-12s %-8s %-20s %-10s %10s %14s", "run", "eta", "act", "status", "regime",
              "iters", "final_loss");
  if (with_oracle) std::printf("  %s", "oracle");
  std::printf("\n");
  for (const auto& r : rows) {
    std::printf("%-40s %-12.6g %-8s %-20s %-10s %10ld %14.6g", r.label.c_str(), r.eta,
                r.activation.empty() ? "-" : r.activation.c_str(), r.status.c_str(),
                r.regime.c_str(), r.iterations, r.final_loss);
    if (with_oracle && r.oracle_diverges) {
      const bool run_diverged = r.outcome == eos::Outcome::diverged;
      std::printf("  %s%s", *r.oracle_diverges ? "diverges" : "stable",
                  run_diverged == *r.oracle_diverges ? "" : " (MISMATCH)");
    }
    std::printf("\n");
  }
}

int run_spec(const eos::ExperimentSpec& spec, const std::string& out_dir, bool with_oracle) {
  const std::filesystem::path dir =
      out_dir.empty() ? eos::default_output_dir() : std::filesystem::path(out_dir);
  const auto rows = eos::run_experiment(spec, dir);
  print_table(rows, with_oracle);
  std::printf("traces: %s\nsummary: %s\n", dir.string().c_str(),
              (dir / (spec.output + "_summary.csv")).string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient descent stability diagnostics"};
  app.require_subcommand(1);

  std::string target, out_dir;
  auto* run = app.add_subcommand("run", "Run a config file or built-in preset");
  run->add_option("config", target, "Config path or preset name")->required();
  run->add_option("--output-dir", out_dir, "Directory for CSV traces");

  std::vector<std::string> etas;
  auto* sweep = app.add_subcommand("sweep", "Run a config once per step size");
  sweep->add_option("config", target, "Config path or preset name")->required();
  sweep->add_option("--eta", etas, "Step sizes; fractions such as 2/39 are accepted")
      ->required()
      ->expected(1, -1)
      ->delimiter(',');
  sweep->add_option("--output-dir", out_dir, "Directory for CSV traces");

  std::vector<int> only;
  bool corrupt = false;
  auto* check = app.add_subcommand("check", "Run the acceptance criteria");
  check->add_option("--only", only, "Criterion ids to run")
      ->delimiter(',')
      ->check(CLI::Range(1, eos::kCriterionCount));
  // Fault injection for exercising the failure path; not part of normal use.
  check->add_flag("--corrupt-grid", corrupt)->group("");

  app.add_subcommand("list-presets", "List built-in presets");
  std::string preset;
  auto* show = app.add_subcommand("show-preset", "Print a preset's config text");
  show->add_option("name", preset)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*run) {
      const eos::ExperimentSpec spec = eos::resolve_experiment(target);
      return run_spec(spec, out_dir, spec.cost.kind == "quadratic");
    }
    if (*sweep) {
      eos::ExperimentSpec spec = eos::resolve_experiment(target);
      spec.sweep_eta.clear();
      for (const std::string& e : etas) {
        if (e.empty()) continue;
        spec.sweep_eta.push_back(eos::parse_real(e));
      }
      if (spec.sweep_eta.empty()) {
        std::cerr << "error: --eta needs at least one step size\n";
        return kUsage;
      }
      for (double eta : spec.sweep_eta)
        if (!(eta > 0.0)) {
          std::cerr << "error: step sizes must be positive\n";
          return kUsage;
        }
      return run_spec(spec, out_dir, spec.cost.kind == "quadratic");
    }
    if (*check) {
      eos::AcceptanceOptions options;
      options.only = only;
      options.corrupt_grid = corrupt;
      int failed = 0;
      const auto results = eos::run_acceptance(options, [&](const eos::CriterionResult& r) {
        std::printf("%s\n", eos::format_result(r).c_str());
        std::fflush(stdout);
        failed += r.pass ? 0 : 1;
      });
      std::printf("%zu criteria run, %d failed\n", results.size(), failed);
      return failed == 0 ? 0 : kFailure;
    }
    if (app.got_subcommand("list-presets")) {
      for (const std::string& name : eos::preset_names()) std::printf("%s\n", name.c_str());
      return 0;
    }
    if (*show) {
      const auto text = eos::preset_text(preset);
      if (!text) {
        std::cerr << "error: unknown preset '" << preset << "'\n";
        return kUsage;
      }
      std::printf("%s", text->c_str());
      return 0;
    }
  } catch (const eos::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const eos::ContractViolation& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const eos::RunError& e) {
    std::cerr << "run failed at iteration " << e.iteration() << ": " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return 0;
}
