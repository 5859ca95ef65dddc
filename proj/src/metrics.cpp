#include "eos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "eos/errors.hpp"
#include "eos/parallel.hpp"

namespace eos {

QuadratureGrid::QuadratureGrid(std::vector<double> taus) : taus_(std::move(taus)) {
  if (taus_.empty()) throw ContractViolation("QuadratureGrid: empty");
  for (std::size_t i = 0; i < taus_.size(); ++i) {
    if (!(taus_[i] > 0.0 && taus_[i] <= 1.0))
      throw ContractViolation("QuadratureGrid: nodes must lie in (0, 1]");
    if (i > 0 && !(taus_[i] > taus_[i - 1]))
      throw ContractViolation("QuadratureGrid: nodes must be strictly increasing");
  }
}

QuadratureGrid QuadratureGrid::uniform(std::size_t n) {
  if (n == 0) throw ContractViolation("QuadratureGrid: need at least one node");
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i + 1) / static_cast<double>(n);
  return QuadratureGrid(std::move(t));
}

namespace {

struct Point {
  double loss;
  Vector grad;
  double grad_norm;
};

Point evaluate_checked(const CostFunction& cost, std::span<const double> theta) {
  Point p{cost.value(theta), cost.gradient(theta), 0.0};
  p.grad_norm = norm(p.grad);
  if (!(p.grad_norm >= grad_floor(p.loss)))
    throw UndefinedMetric("metric undefined at near-stationary point (|grad| = " +
                          std::to_string(p.grad_norm) + ")");
  return p;
}

void check_eta(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ContractViolation("step size must be positive");
}

// Dir_v with grad f(theta) already known.
double dir_with_gradient(const CostFunction& cost, std::span<const double> theta,
                         std::span<const double> grad, std::span<const double> v) {
  const Vector shifted = difference(theta, v);
  const Vector g2 = cost.gradient(shifted);
  double num = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) num += v[i] * (grad[i] - g2[i]);
  return num / dot(v, v);
}

double trapezoid_weighted(const std::vector<double>& taus, const std::vector<double>& dirs) {
  // Integrand h(tau) = tau * Dir(tau), with h(0) = 0.
  double area = 0.0;
  double prev_t = 0.0, prev_h = 0.0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const double h = taus[i] * dirs[i];
    area += 0.5 * (taus[i] - prev_t) * (h + prev_h);
    prev_t = taus[i];
    prev_h = h;
  }
  if (prev_t < 1.0) {
    double d1 = dirs.back();
    if (taus.size() >= 2) {
      const std::size_t k = taus.size() - 1;
      const double slope = (dirs[k] - dirs[k - 1]) / (taus[k] - taus[k - 1]);
      d1 = dirs[k] + slope * (1.0 - taus[k]);
    }
    area += 0.5 * (1.0 - prev_t) * (prev_h + d1);
  }
  return 2.0 * area;
}

double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

MonteCarloEstimate summarize(const std::vector<double>& xs) {
  MonteCarloEstimate out;
  out.samples = xs.size();
  out.estimate = mean_of(xs);
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.estimate) * (x - out.estimate);
    out.standard_error = std::sqrt(ss / static_cast<double>(xs.size() - 1)) /
                         std::sqrt(static_cast<double>(xs.size()));
  }
  return out;
}

}  // namespace

double relative_progress(const CostFunction& cost, std::span<const double> theta, double eta) {
  check_eta(eta);
  const Point p = evaluate_checked(cost, theta);
  const Vector next = axpy(theta, -eta, p.grad);
  return (cost.value(next) - p.loss) / (eta * p.grad_norm * p.grad_norm);
}

double directional_smoothness(const CostFunction& cost, std::span<const double> theta,
                              std::span<const double> v, double min_norm) {
  if (v.size() != cost.dimension()) throw ContractViolation("Dir: direction has wrong dimension");
  const double vn = norm(v);
  if (!(vn > min_norm) || !(vn > 0.0))
    throw UndefinedMetric("Dir: update direction too small (|v| = " + std::to_string(vn) + ")");
  return dir_with_gradient(cost, theta, cost.gradient(theta), v);
}

TauProfile dir_profile_along(const CostFunction& cost, std::span<const double> theta,
                             std::span<const double> direction, double eta,
                             const QuadratureGrid& grid) {
  check_eta(eta);
  if (direction.size() != cost.dimension())
    throw ContractViolation("dir_profile: direction has wrong dimension");
  if (!(norm(direction) > 0.0)) throw UndefinedMetric("dir_profile: zero update direction");
  const Vector grad = cost.gradient(theta);
  TauProfile prof;
  prof.taus = grid.taus();
  prof.dirs.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const Vector v = scaled(direction, eta * prof.taus[i]);
    prof.dirs[i] = dir_with_gradient(cost, theta, grad, v);
  });
  prof.mean = mean_of(prof.dirs);
  double ss = 0.0;
  for (double d : prof.dirs) ss += (d - prof.mean) * (d - prof.mean);
  prof.stddev = std::sqrt(ss / static_cast<double>(prof.dirs.size()));
  if (prof.dirs.size() >= 2) {
    const double slope = (prof.dirs[1] - prof.dirs[0]) / (prof.taus[1] - prof.taus[0]);
    prof.dir_at_zero = prof.dirs[0] - slope * prof.taus[0];
  } else {
    prof.dir_at_zero = prof.dirs[0];
  }
  prof.weighted_integral = trapezoid_weighted(prof.taus, prof.dirs);
  return prof;
}

TauProfile dir_profile(const CostFunction& cost, std::span<const double> theta, double eta,
                       const QuadratureGrid& grid) {
  const Point p = evaluate_checked(cost, theta);
  return dir_profile_along(cost, theta, p.grad, eta, grid);
}

double weighted_dir_integral(const CostFunction& cost, std::span<const double> theta, double eta,
                             const QuadratureGrid& grid) {
  return dir_profile(cost, theta, eta, grid).weighted_integral;
}

double weighted_dir_integral_richardson(const CostFunction& cost, std::span<const double> theta,
                                        double eta, std::size_t n) {
  const double coarse = weighted_dir_integral(cost, theta, eta, QuadratureGrid::uniform(n));
  const double fine = weighted_dir_integral(cost, theta, eta, QuadratureGrid::uniform(2 * n));
  return fine + (fine - coarse) / 3.0;
}

IdentityCheck verify_identity(const CostFunction& cost, std::span<const double> theta, double eta,
                              const QuadratureGrid& grid) {
  IdentityCheck out;
  out.lhs = relative_progress(cost, theta, eta);
  out.rhs = -1.0 + 0.5 * eta * weighted_dir_integral(cost, theta, eta, grid);
  out.residual = std::fabs(out.lhs - out.rhs);
  return out;
}

double rp_approx_residual(const CostFunction& cost, std::span<const double> theta, double eta) {
  check_eta(eta);
  const Point p = evaluate_checked(cost, theta);
  const Vector step = scaled(p.grad, eta);
  const Vector next = difference(theta, step);
  const double rp = (cost.value(next) - p.loss) / (eta * p.grad_norm * p.grad_norm);
  const double dir = dir_with_gradient(cost, theta, p.grad, step);
  return std::fabs(rp - (-1.0 + 0.5 * eta * dir));
}

// ---------------------------------------------------------------------------
// Sharpness

namespace {

Vector unit_start(std::size_t n, const SharpnessOptions& opt) {
  Vector v;
  if (!opt.start.empty() && opt.start.size() == n && norm(opt.start) > 0.0) {
    v = opt.start;
  } else {
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> gauss;
    v.resize(n);
    do {
      for (double& x : v) x = gauss(rng);
    } while (!(norm(v) > 0.0));
  }
  const double nv = norm(v);
  for (double& x : v) x /= nv;
  return v;
}

}  // namespace

SharpnessResult estimate_sharpness(const CostFunction& cost, std::span<const double> theta,
                                   const SharpnessOptions& opt) {
  if (!(opt.tol > 0.0) || opt.max_iter < 1)
    throw ContractViolation("sharpness: tol must be positive and max_iter >= 1");
  const std::size_t n = cost.dimension();
  SharpnessResult out;
  out.surrogate = !cost.twice_differentiable();

  // Phase 1: spectral radius from |H v|.
  Vector v = unit_start(n, opt);
  double radius = 0.0;
  double rq = 0.0;
  bool converged = false;
  for (int it = 0; it < opt.max_iter; ++it) {
    Vector w = cost.hvp(theta, v);
    const double nw = norm(w);
    ++out.iterations;
    if (!std::isfinite(nw)) throw NotConverged("sharpness: Hessian product overflowed", radius);
    if (nw == 0.0) {
      converged = true;
      radius = rq = 0.0;
      break;
    }
    const double prev = radius, prev_rq = rq;
    radius = nw;
    rq = dot(v, w);
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
    if (it > 0 && std::fabs(radius - prev) <= opt.tol * (1.0 + radius) &&
        std::fabs(rq - prev_rq) <= opt.tol * (1.0 + radius)) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NotConverged("sharpness: spectral radius did not converge", radius);
  // A positive dominant eigenvalue is already the largest one.
  if (rq > 0.0 && radius - rq <= opt.tol * (1.0 + radius)) {
    out.value = rq;
    out.eigenvector = std::move(v);
    return out;
  }

  // Phase 2: every eigenvalue of H + shift I lies in [1, 2 radius + 1].
  const double shift = radius + 1.0;
  v = unit_start(n, opt);
  rq = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < opt.max_iter; ++it) {
    Vector w = cost.hvp(theta, v);
    for (std::size_t i = 0; i < n; ++i) w[i] += shift * v[i];
    ++out.iterations;
    const double next = dot(v, w);
    const double nw = norm(w);
    if (!std::isfinite(nw) || nw == 0.0)
      throw NotConverged("sharpness: shifted iteration broke down", next - shift);
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
    const double lambda = next - shift;
    if (it > 0 && std::fabs(next - rq) <= opt.tol * (1.0 + std::fabs(lambda))) {
      out.value = lambda;
      out.eigenvector = std::move(v);
      return out;
    }
    rq = next;
  }
  throw NotConverged("sharpness: no convergence after " + std::to_string(opt.max_iter) +
                         " iterations",
                     rq - shift);
}

double sharpness(const CostFunction& cost, std::span<const double> theta, double tol,
                 int max_iter) {
  SharpnessOptions opt;
  opt.tol = tol;
  opt.max_iter = max_iter;
  return estimate_sharpness(cost, theta, opt).value;
}

double segment_max_sharpness(const CostFunction& cost, std::span<const double> theta, double eta,
                             int samples, const SharpnessOptions& options) {
  check_eta(eta);
  if (samples < 2) throw ContractViolation("segment_max_sharpness: need at least 2 samples");
  const Point p = evaluate_checked(cost, theta);
  SharpnessOptions opt = options;
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < samples; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(samples - 1);
    const Vector point = axpy(theta, -s * eta, p.grad);
    SharpnessResult r = estimate_sharpness(cost, point, opt);
    best = std::max(best, r.value);
    opt.start = std::move(r.eigenvector);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Expected relative progress

GradientSampler minibatch_sampler(const CostFunction& cost, std::size_t batch_size) {
  const std::size_t n = cost.dataset().size();
  if (batch_size == 0 || batch_size > n)
    throw ContractViolation("minibatch_sampler: batch size must be in [1, n]");
  return [cost, batch_size, n](std::span<const double> theta, std::mt19937_64& rng) {
    std::vector<std::size_t> batch(batch_size);
    if (batch_size == n) {
      std::iota(batch.begin(), batch.end(), std::size_t{0});
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& i : batch) i = pick(rng);
    }
    return cost.stochastic_gradient(theta, batch);
  };
}

MonteCarloEstimate expected_rp(const CostFunction& cost, std::span<const double> theta, double eta,
                               const GradientSampler& sampler, std::size_t num_batches,
                               std::uint64_t seed) {
  check_eta(eta);
  if (num_batches == 0) throw ContractViolation("expected_rp: need at least one batch");
  const Point p = evaluate_checked(cost, theta);
  const double denom = eta * p.grad_norm * p.grad_norm;
  std::vector<double> samples(num_batches);
  parallel_for(num_batches, [&](std::size_t k) {
    std::mt19937_64 rng(derive_seed(seed, k));
    const Vector g = sampler(theta, rng);
    samples[k] = (cost.value(axpy(theta, -eta, g)) - p.loss) / denom;
  });
  return summarize(samples);
}

MonteCarloEstimate expected_rp(const CostFunction& cost, std::span<const double> theta, double eta,
                               std::size_t batch_size, std::size_t num_batches,
                               std::uint64_t seed) {
  return expected_rp(cost, theta, eta, minibatch_sampler(cost, batch_size), num_batches, seed);
}

MonteCarloEstimate expected_rp_rhs(const CostFunction& cost, std::span<const double> theta,
                                   double eta, const GradientSampler& sampler,
                                   std::size_t num_batches, std::uint64_t seed, RhsForm form,
                                   const QuadratureGrid& grid) {
  check_eta(eta);
  if (num_batches == 0) throw ContractViolation("expected_rp_rhs: need at least one batch");
  const Point p = evaluate_checked(cost, theta);
  const double gf2 = p.grad_norm * p.grad_norm;
  std::vector<double> samples(num_batches);
  parallel_for(num_batches, [&](std::size_t k) {
    std::mt19937_64 rng(derive_seed(seed, k));
    const Vector g = sampler(theta, rng);
    const double g2 = dot(g, g);
    double weighted = 0.0;  // (|g|^2 / |grad|^2) * Dir term; zero when g = 0
    if (g2 > 0.0) {
      const double dir = form == RhsForm::single_tau
                             ? dir_with_gradient(cost, theta, p.grad, scaled(g, eta))
                             : trapezoid_weighted(grid.taus(), [&] {
                                 std::vector<double> d(grid.size());
                                 for (std::size_t i = 0; i < grid.size(); ++i)
                                   d[i] = dir_with_gradient(cost, theta, p.grad,
                                                            scaled(g, eta * grid.taus()[i]));
                                 return d;
                               }());
      weighted = g2 / gf2 * dir;
    }
    samples[k] = -1.0 + 0.5 * eta * weighted;
  });
  return summarize(samples);
}

MonteCarloEstimate expected_rp_rhs(const CostFunction& cost, std::span<const double> theta,
                                   double eta, std::size_t batch_size, std::size_t num_batches,
                                   std::uint64_t seed, RhsForm form, const QuadratureGrid& grid) {
  return expected_rp_rhs(cost, theta, eta, minibatch_sampler(cost, batch_size), num_batches, seed,
                         form, grid);
}

}  // namespace eos
