#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eos/cost.hpp"
#include "eos/dataset.hpp"
#include "eos/linalg.hpp"
#include "eos/optimizer.hpp"

namespace eos {

struct CostSpec {
  /// quadratic | tanh_quadratic | single_neuron | mlp
  std::string kind;
  Matrix matrix;  // P for the quadratic kinds
  Vector linear;
  double offset = 0.0;
  Activation activation = Activation::tanh;
  double x = 1.0;
  double y = 0.0;
  MlpSpec mlp;
  double weight_decay = 0.0;
};

struct DataSpec {
  /// synthetic | cifar10
  std::string source = "synthetic";
  SynthSpec synth;
  std::string path;
  std::optional<std::size_t> n_take;
  std::optional<std::size_t> subsample;
  std::uint64_t subsample_seed = 0;
};

enum class Algorithm { gd, sgd };

struct ExperimentSpec {
  std::string name;
  std::string description;
  /// File stem for traces; defaults to the name.
  std::string output;
  CostSpec cost;
  DataSpec data;
  Algorithm algorithm = Algorithm::gd;
  OptimizerConfig optimizer;
  /// Explicit start; empty means a seeded initialization (MLP costs only).
  Vector theta0;
  std::uint64_t init_seed = 0;
  RegimeThresholds regime;
  std::vector<double> sweep_eta;
  std::vector<Activation> sweep_activation;

  bool uses_dataset() const { return cost.kind == "mlp"; }
};

/// Real number or fraction "a/b", e.g. "2/39".
double parse_real(std::string_view text);

/// Sectioned key = value text. Errors carry the offending line number.
ExperimentSpec parse_experiment(std::string_view text);
ExperimentSpec load_experiment(const std::filesystem::path& path);
/// A built-in preset name, or else a path to a config file.
ExperimentSpec resolve_experiment(const std::string& name_or_path);

/// Fully resolved config, in the same format parse_experiment reads.
std::string render_experiment(const ExperimentSpec& spec);

std::vector<std::string> preset_names();
std::optional<std::string> preset_text(const std::string& name);

}  // namespace eos
