#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "doctest.h"
#include "eos/cost.hpp"
#include "eos/errors.hpp"
#include "oracles.hpp"

using namespace eos;

namespace {

Matrix diag2(double a, double b) { return Matrix::diagonal(std::vector<double>{a, b}); }

std::shared_ptr<const Dataset> tiny_data(std::size_t n = 4, std::size_t d = 2,
                                         std::size_t classes = 2, std::uint64_t seed = 1) {
  SynthSpec s;
  s.n = n;
  s.d = d;
  s.classes = classes;
  s.cluster_spread = 0.7;
  s.seed = seed;
  return std::make_shared<const Dataset>(synth_dataset(s));
}

CostFunction mlp(Activation act, std::vector<std::size_t> hidden,
                 std::shared_ptr<const Dataset> data) {
  MlpSpec spec;
  spec.hidden = std::move(hidden);
  spec.activation = act;
  return make_mlp(std::move(data), spec);
}

}  // namespace

TEST_CASE("value examples") {
  CHECK(make_quadratic(diag2(40, 2)).value(ParamVector{1, 1}) == 21.0);
  CHECK(make_tanh_quadratic(diag2(40, 2)).value(ParamVector{0, 0}) == 0.0);

  const long double expected = std::pow(13.0L * std::tanh(0.01L), 2.0L);
  const double got = make_single_neuron(Activation::tanh).value(ParamVector{13, 0.01});
  CHECK(got == doctest::Approx(static_cast<double>(expected)).epsilon(1e-14));
  CHECK(got == doctest::Approx(0.016899).epsilon(1e-4));
}

TEST_CASE("gradient examples") {
  const Vector g = make_quadratic(diag2(40, 2)).gradient(ParamVector{1, 1});
  CHECK(g == Vector{40, 2});
  CHECK(make_tanh_quadratic(diag2(40, 2)).gradient(ParamVector{0, 0}) == Vector{0, 0});

  // 2 -> 3 -> 2 net, seed 7, four points.
  const CostFunction net = mlp(Activation::tanh, {3}, tiny_data());
  const ParamVector theta = mlp_initial_point(net, 7);
  CHECK(net.dimension() == 3 * 2 + 3 + 2 * 3 + 2);
  const Vector analytic = net.gradient(theta);
  const Vector fd = oracle::fd_gradient(net, theta, 1e-5);
  CHECK(oracle::relative_error(analytic, fd) <= 1e-5);
}

TEST_CASE("hvp examples") {
  const CostFunction q = make_quadratic(diag2(40, 2));
  CHECK(q.hvp(ParamVector{0.3, -2}, Vector{1, 0}) == Vector{40, 0});
  CHECK(q.hvp(ParamVector{0.3, -2}, Vector{0, 2}) == Vector{0, 4});

  const CostFunction sn = make_single_neuron(Activation::tanh);
  const ParamVector theta{13, 0.01};
  const Vector e2{0, 1};
  const Vector analytic = sn.hvp(theta, e2);
  CHECK(oracle::relative_error(analytic, oracle::fd_hvp_from_values(sn, theta, e2)) <= 1e-4);
  CHECK(oracle::relative_error(sn.finite_difference_hvp(theta, e2), analytic) <= 1e-4);

  CHECK_THROWS_AS(q.hvp(ParamVector{1, 1}, Vector{0, 0}), ContractViolation);
}

TEST_CASE("stochastic gradient") {
  const auto data = tiny_data(64, 3, 3, 5);
  const CostFunction net = mlp(Activation::tanh, {4}, data);
  const ParamVector theta = mlp_initial_point(net, 11);

  std::vector<std::size_t> all(data->size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  CHECK(net.stochastic_gradient(theta, all) == net.gradient(theta));

  SUBCASE("complementary halves") {
    std::vector<std::size_t> lo(all.begin(), all.begin() + 20), hi(all.begin() + 20, all.end());
    const Vector a = net.stochastic_gradient(theta, lo);
    const Vector b = net.stochastic_gradient(theta, hi);
    const Vector full = net.gradient(theta);
    for (std::size_t i = 0; i < full.size(); ++i)
      CHECK(std::fabs((20.0 * a[i] + 44.0 * b[i]) / 64.0 - full[i]) <= 1e-12);
  }

  SUBCASE("Monte Carlo unbiasedness") {
    const Vector full = net.gradient(theta);
    const std::size_t trials = 10000, batch = 32;
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> pick(0, data->size() - 1);
    Vector sum(full.size(), 0.0), sum2(full.size(), 0.0);
    std::vector<std::size_t> idx(batch);
    for (std::size_t t = 0; t < trials; ++t) {
      for (auto& i : idx) i = pick(rng);
      const Vector g = net.stochastic_gradient(theta, idx);
      for (std::size_t i = 0; i < g.size(); ++i) {
        sum[i] += g[i];
        sum2[i] += g[i] * g[i];
      }
    }
    for (std::size_t i = 0; i < full.size(); ++i) {
      const double mean = sum[i] / trials;
      const double var = sum2[i] / trials - mean * mean;
      const double se = std::sqrt(std::max(var, 0.0) / trials);
      CHECK(std::fabs(mean - full[i]) <= 3.0 * se + 1e-15);
    }
  }

  CHECK_THROWS_AS(net.stochastic_gradient(theta, std::vector<std::size_t>{}), ContractViolation);
  CHECK_THROWS_AS(net.stochastic_gradient(theta, std::vector<std::size_t>{64}), ContractViolation);
  CHECK_THROWS_AS(make_quadratic(diag2(1, 1)).stochastic_gradient(ParamVector{1, 1},
                                                                   std::vector<std::size_t>{0}),
                  ContractViolation);
}

TEST_CASE("factories") {
  CHECK(*make_quadratic(diag2(40, 2)).smoothness() == doctest::Approx(40.0));

  const CostFunction lin = make_single_neuron(Activation::linear);
  const CostFunction tnh = make_single_neuron(Activation::tanh);
  CHECK(lin.kind() == CostKind::single_neuron_linear);
  CHECK(tnh.kind() == CostKind::single_neuron_tanh);
  CHECK(lin.value(ParamVector{3, 2}) == 36.0);
  CHECK(tnh.value(ParamVector{3, 2}) == doctest::Approx(std::pow(3 * std::tanh(2.0), 2)));

  SUBCASE("zero weight decay is the identity") {
    const CostFunction base = mlp(Activation::tanh, {3}, tiny_data());
    const CostFunction wrapped = wrap_weight_decay(base, 0.0);
    const ParamVector theta = mlp_initial_point(base, 3);
    std::mt19937_64 rng(1);
    const Vector v = oracle::random_vector(base.dimension(), rng);
    CHECK(wrapped.value(theta) == base.value(theta));
    CHECK(wrapped.gradient(theta) == base.gradient(theta));
    CHECK(wrapped.hvp(theta, v) == base.hvp(theta, v));
    CHECK(wrapped.kind() == CostKind::weight_decay_wrapped);
  }

  SUBCASE("weight decay terms") {
    const CostFunction q = make_quadratic(diag2(4, 2));
    const CostFunction w = wrap_weight_decay(q, 0.5);
    const ParamVector theta{1, -2};
    CHECK(w.value(theta) == doctest::Approx(q.value(theta) + 0.5 * 5.0));
    CHECK(w.gradient(theta) == Vector{4 + 1, -4 - 2});
    CHECK(w.hvp(theta, Vector{1, 1}) == Vector{5, 3});
  }
}

TEST_CASE("contract violations") {
  const CostFunction q = make_quadratic(diag2(40, 2));
  CHECK_THROWS_AS(q.value(ParamVector{1, 2, 3}), ContractViolation);
  CHECK_THROWS_AS(q.gradient(ParamVector{1}), ContractViolation);
  CHECK_THROWS_AS(ParamVector({1.0, NAN}), ContractViolation);

  Matrix asym(2, 2);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(make_quadratic(asym), ContractViolation);
  Matrix tiny_asym = diag2(1, 1);
  tiny_asym(0, 1) = 1e-14;
  CHECK_NOTHROW(make_quadratic(tiny_asym));

  CHECK_THROWS_AS(wrap_weight_decay(q, -1e-3), ContractViolation);
  CHECK_THROWS_AS(make_single_neuron(Activation::relu), ContractViolation);

  MlpSpec bad;
  bad.hidden = {4};
  bad.normalize_layer = 3;
  CHECK_THROWS_AS(make_mlp(tiny_data(), bad), ContractViolation);
}

TEST_CASE("overflow gives +Inf, not NaN") {
  const CostFunction q = make_quadratic(diag2(1, 1));
  CHECK(std::isinf(q.value(ParamVector{1e200, 1e200})));
  Matrix P(2, 2);
  P(0, 0) = 1;
  P(1, 1) = 1;
  P(0, 1) = P(1, 0) = -1;
  CHECK(!std::isnan(make_quadratic(P).value(ParamVector{1e308, 1e308})));
}

TEST_CASE("gradient consistency across the zoo") {
  std::mt19937_64 rng(99);
  const auto data = tiny_data(12, 3, 3, 4);
  std::vector<std::pair<std::string, CostFunction>> zoo = {
      {"quadratic", make_quadratic(Matrix::diagonal(std::vector<double>{3, -1, 0.5}),
                                   Vector{0.1, 0.2, -0.3}, 1.0)},
      {"tanh_quadratic", make_tanh_quadratic(diag2(40, 2))},
      {"single_neuron_linear", make_single_neuron(Activation::linear)},
      {"single_neuron_tanh", make_single_neuron(Activation::tanh, 1.5, 0.3)},
      {"mlp_tanh", mlp(Activation::tanh, {5, 4}, data)},
      {"mlp_linear", mlp(Activation::linear, {5}, data)},
      {"mlp_relu", mlp(Activation::relu, {5, 4}, data)},
      {"decay", wrap_weight_decay(mlp(Activation::tanh, {4}, data), 0.01)},
  };
  for (const auto& [name, cost] : zoo) {
    CAPTURE(name);
    const auto* mlp_model = dynamic_cast<const MlpModel*>(&data_fit_part(cost).model());
    int checked = 0;
    for (int k = 0; k < 50; ++k) {
      const Vector theta = oracle::random_vector(cost.dimension(), rng, 0.5);
      if (mlp_model && !cost.twice_differentiable() &&
          mlp_model->min_abs_preactivation(theta) < 1e-4)
        continue;
      ++checked;
      CHECK(oracle::relative_error(cost.gradient(theta), oracle::fd_gradient(cost, theta)) <=
            1e-5);
    }
    CHECK(checked >= 25);
  }
}

TEST_CASE("hvp symmetry and linearity") {
  std::mt19937_64 rng(5);
  const auto data = tiny_data(10, 3, 2, 8);
  std::vector<CostFunction> smooth = {
      make_quadratic(Matrix::diagonal(std::vector<double>{3, -1, 0.5})),
      make_tanh_quadratic(diag2(40, 2)),
      make_single_neuron(Activation::tanh),
      mlp(Activation::tanh, {4, 3}, data),
  };
  for (const auto& cost : smooth) {
    CAPTURE(cost.describe());
    for (int k = 0; k < 10; ++k) {
      const Vector theta = oracle::random_vector(cost.dimension(), rng, 0.5);
      const Vector u = oracle::random_vector(cost.dimension(), rng);
      const Vector v = oracle::random_vector(cost.dimension(), rng);
      const double a = dot(u, cost.hvp(theta, v));
      const double b = dot(v, cost.hvp(theta, u));
      CHECK(std::fabs(a - b) <= 1e-4 * std::max({std::fabs(a), std::fabs(b), 1e-8}));
    }
  }

  const CostFunction q = make_quadratic(Matrix::diagonal(std::vector<double>{3, -1, 0.5}));
  for (int k = 0; k < 10; ++k) {
    const Vector theta = oracle::random_vector(3, rng);
    const Vector v = oracle::random_vector(3, rng);
    const double a = -2.5 + k;
    if (a == 0.0) continue;
    const Vector lhs = q.hvp(theta, scaled(v, a));
    const Vector rhs = scaled(q.hvp(theta, v), a);
    CHECK(oracle::relative_error(lhs, rhs) <= 1e-6);
  }
}

TEST_CASE("normalization layer makes its block scale invariant") {
  const auto data = tiny_data(16, 4, 3, 2);
  MlpSpec spec;
  spec.hidden = {6, 5};
  spec.normalize_layer = 0;
  const CostFunction net = make_mlp(data, spec);
  const std::vector<std::size_t> zeta = net.homogeneous_indices();
  REQUIRE(zeta.size() == 6 * 4 + 6);

  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    const Vector theta = oracle::random_vector(net.dimension(), rng, 0.7);
    const double f0 = net.value(theta);
    for (double c : {0.5, 2.0, 10.0}) {
      Vector scaled_theta = theta;
      for (std::size_t i : zeta) scaled_theta[i] *= c;
      CHECK(std::fabs(net.value(scaled_theta) - f0) <= 1e-10);
    }
    CHECK(oracle::relative_error(net.gradient(theta), oracle::fd_gradient(net, theta)) <= 1e-5);
  }

  spec.normalize_eps = 1e-3;
  CHECK(make_mlp(data, spec).homogeneous_indices().empty());
}

TEST_CASE("MLP initialization and accuracy") {
  const auto data = tiny_data(8, 2, 2, 1);
  const CostFunction net = mlp(Activation::tanh, {3}, data);
  const Vector a = mlp_initial_point(net, 42).values();
  const Vector b = mlp_initial_point(net, 42).values();
  CHECK(a == b);
  const auto* model = dynamic_cast<const MlpModel*>(&net.model());
  REQUIRE(model);
  // Biases start at zero; weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  for (std::size_t i = 6; i < 9; ++i) CHECK(a[i] == 0.0);
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::fabs(a[i]) <= 1.0 / std::sqrt(2.0));
  for (std::size_t i = 9; i < 15; ++i) CHECK(std::fabs(a[i]) <= 1.0 / std::sqrt(3.0));

  // All-zero parameters give equal logits; ties resolve to class 0.
  const Vector zero(net.dimension(), 0.0);
  CHECK(*net.accuracy(zero) == doctest::Approx(0.5));
  CHECK(net.value(zero) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(mlp_initial_point(make_quadratic(diag2(1, 1)), 0), ContractViolation);
}
