#include "eos/cost.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "eos/errors.hpp"

namespace eos {

std::string to_string(CostKind kind) {
  switch (kind) {
    case CostKind::quadratic: return "quadratic";
    case CostKind::tanh_quadratic: return "tanh_quadratic";
    case CostKind::single_neuron_linear: return "single_neuron_linear";
    case CostKind::single_neuron_tanh: return "single_neuron_tanh";
    case CostKind::mlp: return "mlp";
    case CostKind::weight_decay_wrapped: return "weight_decay_wrapped";
    case CostKind::custom: return "custom";
  }
  return "unknown";
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::linear: return "linear";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "unknown";
}

Activation parse_activation(const std::string& name) {
  if (name == "linear") return Activation::linear;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw ContractViolation("unknown activation '" + name + "'");
}

double CostModel::batch_value(std::span<const double>, std::span<const std::size_t>) const {
  throw ContractViolation(describe() + " has no dataset; batch evaluation is undefined");
}

Vector CostModel::batch_gradient(std::span<const double>, std::span<const std::size_t>) const {
  throw ContractViolation(describe() + " has no dataset; stochastic gradients are undefined");
}

// ---------------------------------------------------------------------------
// CostFunction

CostFunction::CostFunction(std::shared_ptr<const CostModel> model) : model_(std::move(model)) {
  if (!model_) throw ContractViolation("CostFunction: null model");
  dim_ = model_->dimension();
  if (dim_ == 0) throw ContractViolation("CostFunction: dimension must be positive");
}

void CostFunction::check_dim(std::span<const double> x, const char* what) const {
  if (x.size() != dim_)
    throw ContractViolation(std::string(what) + ": dimension " + std::to_string(x.size()) +
                            " does not match cost dimension " + std::to_string(dim_));
}

void CostFunction::check_batch(std::span<const std::size_t> batch) const {
  if (!has_dataset()) throw ContractViolation("stochastic access requires a dataset-backed cost");
  if (batch.empty()) throw ContractViolation("batch must be nonempty");
  const std::size_t n = model_->dataset()->size();
  for (std::size_t i : batch)
    if (i >= n)
      throw ContractViolation("batch index " + std::to_string(i) + " out of range (n = " +
                              std::to_string(n) + ")");
}

double CostFunction::value(std::span<const double> theta) const {
  check_dim(theta, "value");
  const double f = model_->value(theta);
  return std::isnan(f) ? std::numeric_limits<double>::infinity() : f;
}

Vector CostFunction::gradient(std::span<const double> theta) const {
  check_dim(theta, "gradient");
  return model_->gradient(theta);
}

Vector CostFunction::finite_difference_hvp(std::span<const double> theta,
                                           std::span<const double> v) const {
  check_dim(theta, "hvp");
  check_dim(v, "hvp direction");
  const double vn = norm(v);
  if (!(vn > 0.0)) throw ContractViolation("hvp: direction must be nonzero");
  const double eps = std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + norm(theta));
  Vector plus(theta.size()), minus(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double step = eps * v[i] / vn;
    plus[i] = theta[i] + step;
    minus[i] = theta[i] - step;
  }
  const Vector gp = model_->gradient(plus);
  const Vector gm = model_->gradient(minus);
  Vector out(theta.size());
  const double scale = vn / (2.0 * eps);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (gp[i] - gm[i]) * scale;
  return out;
}

Vector CostFunction::hvp(std::span<const double> theta, std::span<const double> v) const {
  check_dim(theta, "hvp");
  check_dim(v, "hvp direction");
  if (!(norm(v) > 0.0)) throw ContractViolation("hvp: direction must be nonzero");
  if (auto exact = model_->analytic_hvp(theta, v)) return std::move(*exact);
  return finite_difference_hvp(theta, v);
}

const Dataset& CostFunction::dataset() const {
  if (!has_dataset()) throw ContractViolation(describe() + " has no dataset");
  return *model_->dataset();
}

Vector CostFunction::stochastic_gradient(std::span<const double> theta,
                                         std::span<const std::size_t> batch) const {
  check_dim(theta, "stochastic_gradient");
  check_batch(batch);
  return model_->batch_gradient(theta, batch);
}

double CostFunction::batch_value(std::span<const double> theta,
                                 std::span<const std::size_t> batch) const {
  check_dim(theta, "batch_value");
  check_batch(batch);
  const double f = model_->batch_value(theta, batch);
  return std::isnan(f) ? std::numeric_limits<double>::infinity() : f;
}

std::optional<double> CostFunction::accuracy(std::span<const double> theta) const {
  check_dim(theta, "accuracy");
  return model_->accuracy(theta);
}

// ---------------------------------------------------------------------------
// Quadratic family

namespace {

Matrix symmetrized(const Matrix& P) {
  if (P.rows() == 0 || P.rows() != P.cols())
    throw ContractViolation("quadratic: P must be square and nonempty");
  if (!all_finite(P.data())) throw ContractViolation("quadratic: P has non-finite entries");
  if (P.max_asymmetry() > 1e-12) throw ContractViolation("quadratic: P is not symmetric");
  Matrix S(P.rows(), P.cols());
  for (std::size_t r = 0; r < P.rows(); ++r)
    for (std::size_t c = 0; c < P.cols(); ++c) S(r, c) = 0.5 * (P(r, c) + P(c, r));
  return S;
}

class QuadraticBase : public CostModel {
 public:
  QuadraticBase(const Matrix& P, Vector q, double r) : P_(symmetrized(P)), q_(std::move(q)), r_(r) {
    if (q_.empty()) q_.assign(P_.rows(), 0.0);
    if (q_.size() != P_.rows()) throw ContractViolation("quadratic: q has wrong length");
  }
  std::size_t dimension() const override { return P_.rows(); }

 protected:
  double inner(std::span<const double> theta) const {
    return 0.5 * dot(theta, P_.apply(theta)) + dot(q_, theta) + r_;
  }
  Vector linear_gradient(std::span<const double> theta) const {
    Vector g = P_.apply(theta);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += q_[i];
    return g;
  }

  Matrix P_;
  Vector q_;
  double r_;
};

class Quadratic final : public QuadraticBase {
 public:
  using QuadraticBase::QuadraticBase;
  CostKind kind() const override { return CostKind::quadratic; }
  double value(std::span<const double> theta) const override { return inner(theta); }
  Vector gradient(std::span<const double> theta) const override { return linear_gradient(theta); }
  std::optional<Vector> analytic_hvp(std::span<const double>,
                                     std::span<const double> v) const override {
    return P_.apply(v);
  }
  std::optional<double> smoothness() const override {
    const auto eig = symmetric_eigen(P_);
    double L = 0.0;
    for (double l : eig.values) L = std::max(L, std::fabs(l));
    return L;
  }
  std::string describe() const override {
    return "quadratic(dim=" + std::to_string(P_.rows()) + ")";
  }
};

class TanhQuadratic final : public QuadraticBase {
 public:
  using QuadraticBase::QuadraticBase;
  CostKind kind() const override { return CostKind::tanh_quadratic; }
  double value(std::span<const double> theta) const override { return std::tanh(inner(theta)); }
  Vector gradient(std::span<const double> theta) const override {
    const double t = std::tanh(inner(theta));
    return scaled(linear_gradient(theta), 1.0 - t * t);
  }
  // H = (1 - t^2) P - 2 t (1 - t^2) g g'
  std::optional<Vector> analytic_hvp(std::span<const double> theta,
                                     std::span<const double> v) const override {
    const double t = std::tanh(inner(theta));
    const double s = 1.0 - t * t;
    const Vector g = linear_gradient(theta);
    const double gv = dot(g, v);
    Vector out = P_.apply(v);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * out[i] - 2.0 * t * s * gv * g[i];
    return out;
  }
  std::string describe() const override {
    return "tanh_quadratic(dim=" + std::to_string(P_.rows()) + ")";
  }
};

class SingleNeuron final : public CostModel {
 public:
  SingleNeuron(Activation act, double x, double y) : act_(act), x_(x), y_(y) {}
  CostKind kind() const override {
    return act_ == Activation::tanh ? CostKind::single_neuron_tanh
                                    : CostKind::single_neuron_linear;
  }
  std::size_t dimension() const override { return 2; }

  double value(std::span<const double> theta) const override {
    const double r = theta[0] * act(x_ * theta[1]) - y_;
    return r * r;
  }
  Vector gradient(std::span<const double> theta) const override {
    const Terms t = terms(theta);
    return {2.0 * t.r * t.s, 2.0 * t.r * theta[0] * t.s1};
  }
  std::optional<Vector> analytic_hvp(std::span<const double> theta,
                                     std::span<const double> v) const override {
    const Terms t = terms(theta);
    const double h11 = 2.0 * t.s * t.s;
    const double h12 = 2.0 * (theta[0] * t.s1 * t.s + t.r * t.s1);
    const double h22 = 2.0 * (theta[0] * t.s1 * theta[0] * t.s1 + t.r * theta[0] * t.s2);
    return Vector{h11 * v[0] + h12 * v[1], h12 * v[0] + h22 * v[1]};
  }
  std::string describe() const override {
    return "single_neuron_" + to_string(act_) + "(x=" + std::to_string(x_) +
           ", y=" + std::to_string(y_) + ")";
  }

 private:
  struct Terms {
    double s, s1, s2, r;  // act(u), d/dtheta2, d2/dtheta2^2, residual
  };
  double act(double u) const { return act_ == Activation::tanh ? std::tanh(u) : u; }
  Terms terms(std::span<const double> theta) const {
    const double u = x_ * theta[1];
    Terms t{};
    if (act_ == Activation::tanh) {
      t.s = std::tanh(u);
      const double d = 1.0 - t.s * t.s;
      t.s1 = d * x_;
      t.s2 = -2.0 * t.s * d * x_ * x_;
    } else {
      t.s = u;
      t.s1 = x_;
      t.s2 = 0.0;
    }
    t.r = theta[0] * t.s - y_;
    return t;
  }

  Activation act_;
  double x_, y_;
};

}  // namespace

CostFunction make_quadratic(const Matrix& P, Vector q, double r) {
  return CostFunction(std::make_shared<Quadratic>(P, std::move(q), r));
}

CostFunction make_tanh_quadratic(const Matrix& P, Vector q, double r) {
  return CostFunction(std::make_shared<TanhQuadratic>(P, std::move(q), r));
}

CostFunction make_single_neuron(Activation act, double x, double y) {
  if (act == Activation::relu) throw ContractViolation("single neuron supports linear or tanh");
  return CostFunction(std::make_shared<SingleNeuron>(act, x, y));
}

// ---------------------------------------------------------------------------
// MLP

struct MlpModel::Workspace {
  std::vector<Vector> pre;   // z per layer (after normalization for the normalized layer)
  std::vector<Vector> raw;   // z before normalization
  std::vector<Vector> act;   // a per layer, act[0] = input
  std::vector<Vector> delta;
};

MlpModel::MlpModel(std::shared_ptr<const Dataset> data, MlpSpec spec)
    : data_(std::move(data)), spec_(std::move(spec)) {
  if (!data_) throw ContractViolation("mlp: dataset required");
  sizes_.push_back(data_->dim());
  for (std::size_t w : spec_.hidden) {
    if (w == 0) throw ContractViolation("mlp: hidden widths must be positive");
    sizes_.push_back(w);
  }
  sizes_.push_back(data_->classes());
  if (spec_.normalize_layer && *spec_.normalize_layer >= spec_.hidden.size())
    throw ContractViolation("mlp: normalize_layer must index a hidden layer");
  if (spec_.normalize_eps < 0.0) throw ContractViolation("mlp: normalize_eps must be >= 0");
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(off);
    off += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  }
  dim_ = off;
}

std::string MlpModel::describe() const {
  std::ostringstream os;
  os << "mlp(";
  for (std::size_t l = 0; l < sizes_.size(); ++l) os << (l ? "-" : "") << sizes_[l];
  os << ", " << to_string(spec_.activation);
  if (spec_.normalize_layer) os << ", normalize=" << *spec_.normalize_layer;
  os << ", n=" << data_->size() << ")";
  return os.str();
}

namespace {

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::tanh: return std::tanh(z);
    case Activation::relu: return z > 0.0 ? z : 0.0;
    default: return z;
  }
}

// Derivative expressed through the input z and output a. ReLU'(0) = 0.
inline double activate_prime(Activation a, double z, double out) {
  switch (a) {
    case Activation::tanh: return 1.0 - out * out;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    default: return 1.0;
  }
}

}  // namespace

double MlpModel::example_loss(std::span<const double> theta, std::size_t i, Workspace& ws,
                              double* grad) const {
  const std::size_t layers = sizes_.size() - 1;
  if (ws.act.size() != sizes_.size()) {
    ws.act.resize(sizes_.size());
    ws.pre.resize(layers);
    ws.raw.resize(layers);
    ws.delta.resize(layers);
    for (std::size_t l = 0; l < sizes_.size(); ++l) ws.act[l].resize(sizes_[l]);
    for (std::size_t l = 0; l < layers; ++l) {
      ws.pre[l].resize(sizes_[l + 1]);
      ws.raw[l].resize(sizes_[l + 1]);
      ws.delta[l].resize(sizes_[l + 1]);
    }
  }
  const double* x = data_->example(i);
  std::copy(x, x + sizes_[0], ws.act[0].begin());

  std::vector<double> norms(layers, 0.0);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double* W = theta.data() + offsets_[l];
    const double* b = W + in * out;
    const double* a = ws.act[l].data();
    Vector& z = ws.raw[l];
    for (std::size_t r = 0; r < out; ++r) {
      double s = b[r];
      const double* w = W + r * in;
      for (std::size_t c = 0; c < in; ++c) s += w[c] * a[c];
      z[r] = s;
    }
    Vector& y = ws.pre[l];
    if (spec_.normalize_layer && *spec_.normalize_layer == l) {
      const double n = norm(z);
      norms[l] = n;
      const double denom = n + spec_.normalize_eps;
      for (std::size_t r = 0; r < out; ++r) y[r] = denom > 0.0 ? z[r] / denom : 0.0;
    } else {
      y = z;
    }
    if (l + 1 < layers) {
      for (std::size_t r = 0; r < out; ++r) ws.act[l + 1][r] = activate(spec_.activation, y[r]);
    } else {
      ws.act[l + 1] = y;
    }
  }

  const Vector& logits = ws.act[layers];
  const std::size_t label = static_cast<std::size_t>(data_->label(i));
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  const double lse = m + std::log(sum);
  const double loss = lse - logits[label];
  if (!grad) return loss;

  Vector& dout = ws.delta[layers - 1];
  for (std::size_t k = 0; k < logits.size(); ++k) dout[k] = std::exp(logits[k] - lse);
  dout[label] -= 1.0;

  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    Vector& dy = ws.delta[l];
    if (l + 1 < layers) {
      // dy currently holds dL/da for this hidden layer.
      for (std::size_t r = 0; r < out; ++r)
        dy[r] *= activate_prime(spec_.activation, ws.pre[l][r], ws.act[l + 1][r]);
    }
    if (spec_.normalize_layer && *spec_.normalize_layer == l) {
      // y = z / (n + eps): dz = dy / (n + eps) - z (z.dy) / (n (n + eps)^2)
      const double n = norms[l];
      const double denom = n + spec_.normalize_eps;
      const Vector& z = ws.raw[l];
      if (n > 0.0 && denom > 0.0) {
        const double zdy = dot(z, dy);
        for (std::size_t r = 0; r < out; ++r)
          dy[r] = dy[r] / denom - z[r] * zdy / (n * denom * denom);
      } else {
        std::fill(dy.begin(), dy.end(), 0.0);
      }
    }
    double* gW = grad + offsets_[l];
    double* gb = gW + in * out;
    const double* a = ws.act[l].data();
    for (std::size_t r = 0; r < out; ++r) {
      const double d = dy[r];
      gb[r] += d;
      if (d == 0.0) continue;
      double* g = gW + r * in;
      for (std::size_t c = 0; c < in; ++c) g[c] += d * a[c];
    }
    if (l > 0) {
      const double* W = theta.data() + offsets_[l];
      Vector& da = ws.delta[l - 1];
      std::fill(da.begin(), da.end(), 0.0);
      for (std::size_t r = 0; r < out; ++r) {
        const double d = dy[r];
        if (d == 0.0) continue;
        const double* w = W + r * in;
        for (std::size_t c = 0; c < in; ++c) da[c] += d * w[c];
      }
    }
  }
  return loss;
}

double MlpModel::batch_value(std::span<const double> theta,
                             std::span<const std::size_t> batch) const {
  Workspace ws;
  double total = 0.0;
  for (std::size_t i : batch) total += example_loss(theta, i, ws, nullptr);
  return total / static_cast<double>(batch.size());
}

Vector MlpModel::batch_gradient(std::span<const double> theta,
                                std::span<const std::size_t> batch) const {
  Workspace ws;
  Vector grad(dim_, 0.0);
  for (std::size_t i : batch) example_loss(theta, i, ws, grad.data());
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= inv;
  return grad;
}

namespace {
std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}
}  // namespace

double MlpModel::value(std::span<const double> theta) const {
  return batch_value(theta, all_indices(data_->size()));
}

Vector MlpModel::gradient(std::span<const double> theta) const {
  return batch_gradient(theta, all_indices(data_->size()));
}

std::optional<double> MlpModel::accuracy(std::span<const double> theta) const {
  Workspace ws;
  std::size_t correct = 0;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t i = 0; i < data_->size(); ++i) {
    example_loss(theta, i, ws, nullptr);
    const Vector& logits = ws.act[layers];
    // max_element returns the first maximum: ties go to the lower class index.
    const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
    if (best == data_->label(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data_->size());
}

std::vector<std::size_t> MlpModel::homogeneous_indices() const {
  if (!spec_.normalize_layer || spec_.normalize_eps != 0.0) return {};
  const std::size_t l = *spec_.normalize_layer;
  const std::size_t count = sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), offsets_[l]);
  return idx;
}

double MlpModel::min_abs_preactivation(std::span<const double> theta) const {
  Workspace ws;
  double best = std::numeric_limits<double>::infinity();
  const std::size_t hidden_layers = sizes_.size() - 2;
  for (std::size_t i = 0; i < data_->size(); ++i) {
    example_loss(theta, i, ws, nullptr);
    for (std::size_t l = 0; l < hidden_layers; ++l)
      for (double z : ws.pre[l]) best = std::min(best, std::fabs(z));
  }
  return best;
}

Vector MlpModel::initial_parameters(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  Vector theta(dim_, 0.0);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> uni(-bound, bound);
    const std::size_t count = sizes_[l] * sizes_[l + 1];
    for (std::size_t k = 0; k < count; ++k) theta[offsets_[l] + k] = uni(rng);
  }
  return theta;
}

CostFunction make_mlp(std::shared_ptr<const Dataset> data, MlpSpec spec) {
  return CostFunction(std::make_shared<MlpModel>(std::move(data), std::move(spec)));
}

ParamVector mlp_initial_point(const CostFunction& cost, std::uint64_t seed) {
  const auto* mlp = dynamic_cast<const MlpModel*>(&data_fit_part(cost).model());
  if (!mlp) throw ContractViolation("mlp_initial_point: cost is not an MLP");
  return ParamVector(mlp->initial_parameters(seed));
}

// ---------------------------------------------------------------------------
// Weight decay

namespace {

class WeightDecay final : public CostModel {
 public:
  WeightDecay(CostFunction inner, double gamma, std::vector<std::size_t> homogeneous)
      : inner_(std::move(inner)), gamma_(gamma), homogeneous_(std::move(homogeneous)) {}

  CostKind kind() const override { return CostKind::weight_decay_wrapped; }
  std::size_t dimension() const override { return inner_.dimension(); }
  double value(std::span<const double> theta) const override {
    return inner_.value(theta) + gamma_ * dot(theta, theta);
  }
  Vector gradient(std::span<const double> theta) const override {
    return axpy(inner_.gradient(theta), 2.0 * gamma_, theta);
  }
  std::optional<Vector> analytic_hvp(std::span<const double> theta,
                                     std::span<const double> v) const override {
    return axpy(inner_.hvp(theta, v), 2.0 * gamma_, v);
  }
  std::string describe() const override {
    return "weight_decay(" + inner_.describe() + ", gamma=" + std::to_string(gamma_) + ")";
  }
  bool twice_differentiable() const override { return inner_.twice_differentiable(); }
  std::optional<double> smoothness() const override {
    if (auto L = inner_.smoothness()) return *L + 2.0 * gamma_;
    return std::nullopt;
  }
  const Dataset* dataset() const override { return inner_.model().dataset(); }
  double batch_value(std::span<const double> theta,
                     std::span<const std::size_t> batch) const override {
    return inner_.batch_value(theta, batch) + gamma_ * dot(theta, theta);
  }
  Vector batch_gradient(std::span<const double> theta,
                        std::span<const std::size_t> batch) const override {
    return axpy(inner_.stochastic_gradient(theta, batch), 2.0 * gamma_, theta);
  }
  std::optional<double> accuracy(std::span<const double> theta) const override {
    return inner_.accuracy(theta);
  }
  std::vector<std::size_t> homogeneous_indices() const override {
    return homogeneous_.empty() ? inner_.homogeneous_indices() : homogeneous_;
  }

  const CostFunction& inner() const { return inner_; }
  double gamma() const { return gamma_; }

 private:
  CostFunction inner_;
  double gamma_;
  std::vector<std::size_t> homogeneous_;
};

}  // namespace

CostFunction wrap_weight_decay(const CostFunction& inner, double gamma,
                               std::vector<std::size_t> homogeneous) {
  if (!(gamma >= 0.0)) throw ContractViolation("weight decay gamma must be >= 0");
  for (std::size_t i : homogeneous)
    if (i >= inner.dimension()) throw ContractViolation("homogeneous index out of range");
  return CostFunction(std::make_shared<WeightDecay>(inner, gamma, std::move(homogeneous)));
}

CostFunction data_fit_part(const CostFunction& cost) {
  if (const auto* wd = dynamic_cast<const WeightDecay*>(&cost.model()))
    return data_fit_part(wd->inner());
  return cost;
}

double weight_decay_of(const CostFunction& cost) {
  if (const auto* wd = dynamic_cast<const WeightDecay*>(&cost.model()))
    return wd->gamma() + weight_decay_of(wd->inner());
  return 0.0;
}

}  // namespace eos
