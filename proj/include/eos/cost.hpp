#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eos/dataset.hpp"
#include "eos/linalg.hpp"
#include "eos/param_vector.hpp"

namespace eos {

enum class CostKind {
  quadratic,
  tanh_quadratic,
  single_neuron_linear,
  single_neuron_tanh,
  mlp,
  weight_decay_wrapped,
  custom,
};

enum class Activation { linear, tanh, relu };

std::string to_string(CostKind kind);
std::string to_string(Activation act);
Activation parse_activation(const std::string& name);

/// Implementation side of a cost. Subclass this to plug a new cost into the
/// metrics and optimizer; everything else talks to CostFunction.
class CostModel {
 public:
  virtual ~CostModel() = default;

  virtual CostKind kind() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual double value(std::span<const double> theta) const = 0;
  virtual Vector gradient(std::span<const double> theta) const = 0;
  virtual std::string describe() const = 0;

  /// Closed-form Hessian-vector product when one exists.
  virtual std::optional<Vector> analytic_hvp(std::span<const double> /*theta*/,
                                             std::span<const double> /*v*/) const {
    return std::nullopt;
  }
  /// False for costs with kinks (ReLU).
  virtual bool twice_differentiable() const { return true; }
  /// Global gradient-Lipschitz constant if known in closed form.
  virtual std::optional<double> smoothness() const { return std::nullopt; }

  // Dataset-backed costs override the members below.
  virtual const Dataset* dataset() const { return nullptr; }
  virtual double batch_value(std::span<const double> theta,
                             std::span<const std::size_t> batch) const;
  virtual Vector batch_gradient(std::span<const double> theta,
                                std::span<const std::size_t> batch) const;
  virtual std::optional<double> accuracy(std::span<const double> /*theta*/) const {
    return std::nullopt;
  }
  /// Indices of a positively homogeneous parameter block, if the model declares one.
  virtual std::vector<std::size_t> homogeneous_indices() const { return {}; }
};

/// Immutable, cheaply copyable handle to a cost. Every entry point checks
/// the dimension of its arguments.
class CostFunction {
 public:
  explicit CostFunction(std::shared_ptr<const CostModel> model);

  CostKind kind() const { return model_->kind(); }
  std::size_t dimension() const { return dim_; }
  std::string describe() const { return model_->describe(); }
  bool twice_differentiable() const { return model_->twice_differentiable(); }
  std::optional<double> smoothness() const { return model_->smoothness(); }
  const CostModel& model() const { return *model_; }

  /// Finite, or +Inf on overflow. Never NaN.
  double value(std::span<const double> theta) const;
  Vector gradient(std::span<const double> theta) const;
  /// Hessian times v. Analytic where a closed form exists, otherwise a central
  /// difference of gradients with step cbrt(eps) * (1 + |theta|).
  Vector hvp(std::span<const double> theta, std::span<const double> v) const;
  Vector finite_difference_hvp(std::span<const double> theta, std::span<const double> v) const;

  bool has_dataset() const { return model_->dataset() != nullptr; }
  const Dataset& dataset() const;
  /// Mean gradient over the batch, summed in the order given.
  Vector stochastic_gradient(std::span<const double> theta,
                             std::span<const std::size_t> batch) const;
  double batch_value(std::span<const double> theta, std::span<const std::size_t> batch) const;
  std::optional<double> accuracy(std::span<const double> theta) const;
  std::vector<std::size_t> homogeneous_indices() const { return model_->homogeneous_indices(); }

 private:
  void check_dim(std::span<const double> x, const char* what) const;
  void check_batch(std::span<const std::size_t> batch) const;

  std::shared_ptr<const CostModel> model_;
  std::size_t dim_;
};

/// 1/2 theta' P theta + q' theta + r. P is symmetrized; asymmetry above 1e-12 is rejected.
CostFunction make_quadratic(const Matrix& P, Vector q = {}, double r = 0.0);
/// tanh(1/2 theta' P theta + q' theta + r).
CostFunction make_tanh_quadratic(const Matrix& P, Vector q = {}, double r = 0.0);
/// (theta_1 * act(x * theta_2) - y)^2 with act linear or tanh.
CostFunction make_single_neuron(Activation act, double x = 1.0, double y = 0.0);

struct MlpSpec {
  std::vector<std::size_t> hidden{32, 32};
  Activation activation = Activation::tanh;
  /// Hidden layer whose pre-activation is rescaled to z / (|z| + eps) before the activation.
  std::optional<std::size_t> normalize_layer;
  double normalize_eps = 0.0;
};

/// Fully connected net with softmax cross-entropy over the dataset. Parameters
/// are laid out layer by layer, weights (row-major, out x in) then biases.
class MlpModel : public CostModel {
 public:
  MlpModel(std::shared_ptr<const Dataset> data, MlpSpec spec);

  CostKind kind() const override { return CostKind::mlp; }
  std::size_t dimension() const override { return dim_; }
  double value(std::span<const double> theta) const override;
  Vector gradient(std::span<const double> theta) const override;
  std::string describe() const override;
  bool twice_differentiable() const override { return spec_.activation != Activation::relu; }

  const Dataset* dataset() const override { return data_.get(); }
  double batch_value(std::span<const double> theta,
                     std::span<const std::size_t> batch) const override;
  Vector batch_gradient(std::span<const double> theta,
                        std::span<const std::size_t> batch) const override;
  std::optional<double> accuracy(std::span<const double> theta) const override;
  std::vector<std::size_t> homogeneous_indices() const override;

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  const MlpSpec& spec() const { return spec_; }
  /// Offset of layer l's weight block; its bias block follows the weights.
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  /// Smallest |pre-activation| over hidden units and all examples.
  double min_abs_preactivation(std::span<const double> theta) const;
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  Vector initial_parameters(std::uint64_t seed) const;

 private:
  struct Workspace;
  double example_loss(std::span<const double> theta, std::size_t i, Workspace& ws,
                      double* grad) const;

  std::shared_ptr<const Dataset> data_;
  MlpSpec spec_;
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::size_t dim_ = 0;
};

CostFunction make_mlp(std::shared_ptr<const Dataset> data, MlpSpec spec);
/// Initial point for an MLP cost; throws for other kinds.
ParamVector mlp_initial_point(const CostFunction& cost, std::uint64_t seed);

/// Adds gamma * |theta|^2. `homogeneous` overrides the inner model's declared
/// homogeneous block when nonempty.
CostFunction wrap_weight_decay(const CostFunction& inner, double gamma,
                               std::vector<std::size_t> homogeneous = {});
/// The undecorated data-fit cost of a weight-decay wrapper (or the cost itself).
CostFunction data_fit_part(const CostFunction& cost);
double weight_decay_of(const CostFunction& cost);

}  // namespace eos
