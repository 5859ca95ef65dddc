#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "doctest.h"
#include "eos/errors.hpp"
#include "eos/linalg.hpp"
#include "eos/metrics.hpp"
#include "eos/optimizer.hpp"
#include "eos/theory.hpp"
#include "oracles.hpp"

using namespace eos;

namespace {

Matrix diag(std::vector<double> d) { return Matrix::diagonal(d); }

Matrix random_psd(std::size_t n, std::mt19937_64& rng) {
  Matrix A(n, n);
  std::normal_distribution<double> g;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) A(r, c) = g(rng);
  Matrix P = A.transposed() * A;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < r; ++c) P(r, c) = P(c, r);
  return P;
}

// Width-32 tanh net trained a little, so the iterate is not at initialization.
struct MidTraining {
  CostFunction cost;
  Vector theta;
};

MidTraining tanh_mlp_mid_training(double eta, long steps) {
  SynthSpec s;
  s.n = 128;
  s.d = 8;
  s.classes = 3;
  s.cluster_spread = 0.8;
  s.seed = 17;
  MlpSpec spec;
  spec.hidden = {32, 32};
  const CostFunction cost = make_mlp(std::make_shared<const Dataset>(synth_dataset(s)), spec);
  OptimizerConfig cfg;
  cfg.eta = eta;
  cfg.max_iter = steps;
  cfg.metrics.rp = cfg.metrics.dir = false;
  cfg.metric_cadence = steps;
  const Trajectory t = gd_run(cost, mlp_initial_point(cost, 3), cfg);
  return {cost, t.final_theta};
}

}  // namespace

TEST_CASE("relative progress") {
  for (double lambda : {0.5, 3.0, 40.0}) {
    const CostFunction f = make_quadratic(diag({lambda}));
    for (double eta : {0.01, 0.1, 2.0 / lambda}) {
      const double rp = relative_progress(f, ParamVector{0.7}, eta);
      CHECK(rp == doctest::Approx(-1.0 + eta * lambda / 2.0).epsilon(1e-12));
    }
    CHECK(std::fabs(relative_progress(f, ParamVector{-1.3}, 2.0 / lambda)) <= 1e-15);
  }
  CHECK(relative_progress(make_quadratic(diag({40})), ParamVector{2.0}, 2.0 / 80.0) ==
        doctest::Approx(-0.5).epsilon(1e-14));

  const CostFunction th = make_tanh_quadratic(diag({40, 2}));
  const Vector theta{0.3, 0.1};
  const double eta = 2.0 / 39.0;
  const Vector g = th.gradient(theta);
  const Vector next{theta[0] - eta * g[0], theta[1] - eta * g[1]};
  const double oracle_rp =
      (th.value(next) - th.value(theta)) / (eta * (g[0] * g[0] + g[1] * g[1]));
  CHECK(std::fabs(relative_progress(th, theta, eta) - oracle_rp) <= 1e-12);

  CHECK_THROWS_AS(relative_progress(th, ParamVector{0, 0}, eta), UndefinedMetric);
  CHECK_THROWS_AS(relative_progress(th, theta, 0.0), ContractViolation);
}

TEST_CASE("directional smoothness") {
  const CostFunction q = make_quadratic(diag({40, 2}));
  const Vector theta{0.4, -1.1};
  CHECK(directional_smoothness(q, theta, Vector{1, 0}) == doctest::Approx(40.0).epsilon(1e-14));
  CHECK(directional_smoothness(q, theta, Vector{0, 1}) == doctest::Approx(2.0).epsilon(1e-14));
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(directional_smoothness(q, theta, Vector{r, r}) == doctest::Approx(21.0).epsilon(1e-14));
  CHECK_THROWS_AS(directional_smoothness(q, theta, Vector{0, 0}), UndefinedMetric);
  CHECK_THROWS_AS(directional_smoothness(q, theta, Vector{1e-9, 0}, 1e-6), UndefinedMetric);
}

TEST_CASE("quadrature grid") {
  CHECK(QuadratureGrid::standard().size() == 100);
  CHECK(QuadratureGrid::standard().taus().front() == doctest::Approx(0.01));
  CHECK(QuadratureGrid::standard().taus().back() == 1.0);
  CHECK_THROWS_AS(QuadratureGrid({}), ContractViolation);
  CHECK_THROWS_AS(QuadratureGrid({0.0, 0.5}), ContractViolation);
  CHECK_THROWS_AS(QuadratureGrid({0.5, 0.5}), ContractViolation);
  CHECK_THROWS_AS(QuadratureGrid({0.5, 1.5}), ContractViolation);
}

TEST_CASE("weighted Dir integral") {
  const CostFunction q = make_quadratic(diag({40, 2}));
  CHECK(weighted_dir_integral(q, Vector{1, 0}, 0.05) == doctest::Approx(40.0).epsilon(1e-13));

  // f = theta^3 at 1, eta = 0.1: Dir(tau) = 6 - 0.9 tau, so the integral is 5.4.
  const CostFunction cubic = oracle::cubic();
  const double eta = 0.1;
  const double riemann = oracle::weighted_dir_midpoint(cubic, Vector{1.0}, eta, 100000);
  CHECK(riemann == doctest::Approx(5.4).epsilon(1e-9));
  CHECK(std::fabs(weighted_dir_integral(cubic, Vector{1.0}, eta, QuadratureGrid::uniform(1000)) -
                  riemann) <= 1e-6);
  // The 100-node trapezoid is off by exactly h^2/12 * |h'(1) - h'(0)| * 2 = 3e-5 here.
  CHECK(std::fabs(weighted_dir_integral(cubic, Vector{1.0}, eta) - riemann) ==
        doctest::Approx(3e-5).epsilon(1e-4));
  CHECK(std::fabs(weighted_dir_integral_richardson(cubic, Vector{1.0}, eta) - riemann) <= 1e-9);

  // One node: 2 * (1/2) * 1 * Dir(1).
  const double single = weighted_dir_integral(cubic, Vector{1.0}, eta, QuadratureGrid({1.0}));
  CHECK(single == doctest::Approx(oracle::dir_inline(cubic, Vector{1.0}, Vector{0.3})));
  CHECK(single == doctest::Approx(5.1));

  const TauProfile prof = dir_profile(cubic, Vector{1.0}, eta);
  CHECK(prof.dir_at_zero == doctest::Approx(6.0).epsilon(1e-10));
  CHECK(prof.mean == doctest::Approx(6.0 - 0.9 * 0.505).epsilon(1e-10));
}

TEST_CASE("integral identity examples") {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 20; ++k) {
    const Matrix P = random_psd(4, rng);
    const CostFunction q = make_quadratic(P, oracle::random_vector(4, rng));
    const Vector theta = oracle::random_vector(4, rng);
    const double eta = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    CHECK(verify_identity(q, theta, eta).residual <= 1e-12);
  }

  const CostFunction th = make_tanh_quadratic(diag({40, 2}));
  const Vector theta{0.5, 0.5};
  const double eta = 2.0 / 39.0;
  const IdentityCheck id = verify_identity(th, theta, eta);
  CHECK(id.residual <= 1e-4);
  // With a 1e5-cell quadrature the identity closes, so the residual above is
  // quadrature error only.
  const double fine = -1.0 + 0.5 * eta * oracle::weighted_dir_midpoint(th, theta, eta, 100000);
  CHECK(std::fabs(id.lhs - fine) <= 1e-8);

  const MidTraining mid = tanh_mlp_mid_training(2.0 / 60.0, 60);
  const double eta_mlp = 2.0 / 60.0;
  const double coarse = verify_identity(mid.cost, mid.theta, eta_mlp).residual;
  CHECK(coarse <= 1e-3);
  const double refined =
      verify_identity(mid.cost, mid.theta, eta_mlp, QuadratureGrid::uniform(400)).residual;
  CHECK(refined <= coarse + 1e-12);
}

TEST_CASE("rp approximation residual") {
  std::mt19937_64 rng(21);
  const CostFunction q = make_quadratic(random_psd(5, rng));
  CHECK(rp_approx_residual(q, oracle::random_vector(5, rng), 0.07) <= 1e-12);

  // Cubic: both sides by long-double scalar arithmetic.
  const long double t = 1.0L, eta = 0.1L;
  const long double g = 3 * t * t;
  const long double next = t - eta * g;
  const long double rp = (next * next * next - t * t * t) / (eta * g * g);
  const long double v = eta * g;
  const long double dir = v * (g - 3 * next * next) / (v * v);
  const double expected = static_cast<double>(std::fabs(rp - (-1 + eta / 2 * dir)));
  CHECK(rp_approx_residual(oracle::cubic(), Vector{1.0}, 0.1) ==
        doctest::Approx(expected).epsilon(1e-10));
  CHECK(expected == doctest::Approx(0.015).epsilon(1e-9));
}

TEST_CASE("sharpness") {
  CHECK(std::fabs(sharpness(make_quadratic(diag({40, 2})), Vector{1, 1}, 1e-12) - 40.0) <= 1e-8);
  CHECK(std::fabs(sharpness(make_quadratic(diag({-5, 3})), Vector{1, 1}, 1e-12) - 3.0) <= 1e-8);
  CHECK(std::fabs(sharpness(make_quadratic(diag({-5, 5, 1})), Vector{0, 0, 0}, 1e-12) - 5.0) <=
        1e-8);
  CHECK(std::fabs(sharpness(make_quadratic(diag({-7, -2})), Vector{0, 0}, 1e-12) + 2.0) <= 1e-8);

  SharpnessOptions tight;
  tight.tol = 1e-14;
  tight.max_iter = 3;
  Matrix slow = diag({1.0, 0.999, 0.5});
  try {
    estimate_sharpness(make_quadratic(slow), Vector{0, 0, 0}, tight);
    FAIL("expected NotConverged");
  } catch (const NotConverged& e) {
    CHECK(std::isfinite(e.last_estimate()));
  }

  SUBCASE("agrees with a known spectrum") {
    std::mt19937_64 rng(4);
    for (int k = 0; k < 6; ++k) {
      const std::size_t n = 50;
      Vector lambda(n);
      for (double& l : lambda) l = std::uniform_real_distribution<double>(-8.0, 8.0)(rng);
      std::sort(lambda.rbegin(), lambda.rend());
      lambda[0] = lambda[1] + 0.1 + 0.5 * k;
      if (k % 2) lambda[n - 1] = -lambda[0] - 3.0;  // dominant magnitude is negative
      const Matrix P = oracle::with_spectrum(oracle::random_orthogonal(n, rng), lambda);
      const double est = sharpness(make_quadratic(P), Vector(n, 0.0), 1e-13, 400000);
      CHECK(std::fabs(est - lambda[0]) <= 1e-6 * std::fabs(lambda[0]));
      CHECK(std::fabs(est - symmetric_eigen(P).values[0]) <= 1e-6 * std::fabs(lambda[0]));
    }
  }

  SUBCASE("ReLU costs report a surrogate") {
    SynthSpec s;
    s.n = 16;
    s.d = 3;
    s.classes = 2;
    MlpSpec spec;
    spec.hidden = {4};
    spec.activation = Activation::relu;
    const CostFunction net = make_mlp(std::make_shared<const Dataset>(synth_dataset(s)), spec);
    SharpnessOptions opt;
    opt.tol = 1e-5;
    CHECK(estimate_sharpness(net, mlp_initial_point(net, 1), opt).surrogate);
  }
}

TEST_CASE("segment max sharpness") {
  const CostFunction q = make_quadratic(diag({40, 2}));
  for (int samples : {2, 5, 11}) {
    CHECK(segment_max_sharpness(q, Vector{0.2, 1}, 0.05, samples) ==
          doctest::Approx(sharpness(q, Vector{0.2, 1})).epsilon(1e-6));
  }
  const CostFunction th = make_tanh_quadratic(diag({40, 2}));
  const Vector theta{0.05, 0.2};
  const double eta = 0.5;
  const double seg = segment_max_sharpness(th, theta, eta, 11);
  const Vector g = th.gradient(theta);
  const Vector end = axpy(theta, -eta, g);
  CHECK(seg >= sharpness(th, theta) - 1e-6);
  CHECK(seg >= sharpness(th, end) - 1e-6);
  CHECK_THROWS_AS(segment_max_sharpness(q, Vector{1, 1}, 0.05, 1), ContractViolation);
}

TEST_CASE("expected RP") {
  SynthSpec s;
  s.n = 40;
  s.d = 3;
  s.classes = 2;
  s.seed = 9;
  MlpSpec spec;
  spec.hidden = {5};
  const CostFunction net = make_mlp(std::make_shared<const Dataset>(synth_dataset(s)), spec);
  const ParamVector theta = mlp_initial_point(net, 2);
  const double eta = 0.3;

  const MonteCarloEstimate full = expected_rp(net, theta, eta, 40, 1, 7);
  CHECK(full.estimate == relative_progress(net, theta, eta));
  CHECK(full.standard_error == 0.0);

  const MonteCarloEstimate rhs_full = expected_rp_rhs(net, theta, eta, 40, 1, 7);
  const Vector g = net.gradient(theta);
  CHECK(rhs_full.estimate ==
        doctest::Approx(-1.0 + 0.5 * eta * directional_smoothness(net, theta, scaled(g, eta)))
            .epsilon(1e-14));

  // Same seed -> same batches -> bit-identical estimate.
  CHECK(expected_rp(net, theta, eta, 8, 50, 3).estimate ==
        expected_rp(net, theta, eta, 8, 50, 3).estimate);
}

TEST_CASE("expected RP on a noisy isotropic quadratic") {
  // f = 1/2 lambda |theta|^2 with g = grad f + sigma * N(0, I):
  // E[RP] = -1 + (eta lambda / 2)(1 + sigma^2 d / |grad f|^2).
  const double lambda = 3.0, sigma = 0.4, eta = 0.2;
  const std::size_t d = 5;
  const CostFunction f = make_quadratic(Matrix::diagonal(Vector(d, lambda)));
  const Vector theta{0.3, -0.2, 0.5, 0.1, -0.4};
  const double gf2 = lambda * lambda * dot(theta, theta);
  const double closed = -1.0 + 0.5 * eta * lambda * (1.0 + sigma * sigma * d / gf2);

  const GradientSampler noisy = [&](std::span<const double> t, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, sigma);
    Vector g = f.gradient(t);
    for (double& x : g) x += n(rng);
    return g;
  };
  const MonteCarloEstimate lhs = expected_rp(f, theta, eta, noisy, 200000, 11);
  CHECK(std::fabs(lhs.estimate - closed) <= 3.0 * lhs.standard_error);

  const MonteCarloEstimate rhs = expected_rp_rhs(f, theta, eta, noisy, 200000, 12,
                                                 RhsForm::quadrature, QuadratureGrid::uniform(8));
  const double combined = std::hypot(lhs.standard_error, rhs.standard_error);
  CHECK(std::fabs(lhs.estimate - rhs.estimate) <= 3.0 * combined);

  // Without noise the single-tau form is exact on a quadratic.
  const GradientSampler exact = [&](std::span<const double> t, std::mt19937_64&) {
    return f.gradient(t);
  };
  const double det_rhs = expected_rp_rhs(f, theta, eta, exact, 3, 1).estimate;
  CHECK(std::fabs(det_rhs - expected_rp(f, theta, eta, exact, 3, 1).estimate) <= 1e-12);
}

TEST_CASE("quadratic closed forms and the descent lemma") {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 30; ++k) {
    const std::size_t n = 2 + k % 6;
    const Matrix P = random_psd(n, rng);
    const CostFunction q = make_quadratic(P);
    const double L = *q.smoothness();
    const Vector theta = oracle::random_vector(n, rng);
    const double eta = std::uniform_real_distribution<double>(0.01, 1.99)(rng) / L;
    const Vector g = P.apply(theta);
    const double rayleigh = dot(g, P.apply(g)) / dot(g, g);
    CHECK(std::fabs(relative_progress(q, theta, eta) - (-1.0 + 0.5 * eta * rayleigh)) <= 1e-10);
    CHECK(relative_progress(q, theta, eta) <= -(1.0 - L * eta / 2.0) + 1e-10);
    const Vector v = oracle::random_vector(n, rng);
    CHECK(directional_smoothness(q, theta, v) ==
          doctest::Approx(dot(v, P.apply(v)) / dot(v, v)).epsilon(1e-10));
  }
}

TEST_CASE("oscillation at the stability edge") {
  const CostFunction q = make_quadratic(diag({40, 2}));
  const double eta = 2.0 / 40.0;
  Vector theta{0.83, -1.27};
  for (int t = 0; t < 200; ++t) theta = axpy(theta, -eta, q.gradient(theta));
  const double dir = directional_smoothness(q, theta, scaled(q.gradient(theta), eta));
  CHECK(dir >= 0.999 * 2.0 / eta);
  CHECK(dir <= 1.001 * 2.0 / eta);
}

TEST_CASE("identity residual shrinks under grid refinement") {
  std::mt19937_64 rng(77);
  std::vector<CostFunction> zoo = {
      make_tanh_quadratic(diag({40, 2})),
      make_single_neuron(Activation::tanh),
      make_tanh_quadratic(random_psd(3, rng)),
  };
  for (const auto& cost : zoo) {
    for (int k = 0; k < 30; ++k) {
      const Vector theta = oracle::random_vector(cost.dimension(), rng, 0.4);
      const Vector g = cost.gradient(theta);
      if (norm(g) < 1e-6) continue;
      // Keep the step eta |grad| bounded.
      const double eta =
          std::min(1.0, std::uniform_real_distribution<double>(0.01, 0.3)(rng) / norm(g));
      const double r50 = verify_identity(cost, theta, eta, QuadratureGrid::uniform(50)).residual;
      const double r200 = verify_identity(cost, theta, eta, QuadratureGrid::uniform(200)).residual;
      CHECK(r200 <= r50 * (1.0 + 1e-6) + 1e-7);  // slack covers loss-difference roundoff
      const IdentityCheck id = verify_identity(cost, theta, eta);
      CHECK(id.residual <= 1e-3 * std::max(1.0, std::fabs(id.lhs)));
    }
  }
}
