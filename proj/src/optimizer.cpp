#include "eos/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "eos/errors.hpp"
#include "eos/parallel.hpp"

namespace eos {

std::string to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::converged: return "converged";
    case Outcome::budget_exhausted: return "budget_exhausted";
    case Outcome::diverged: return "diverged";
  }
  return "unknown";
}

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::stable: return "stable";
    case Regime::unstable: return "unstable";
    case Regime::diverged: return "diverged";
  }
  return "unknown";
}

void OptimizerConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ContractViolation("eta must be positive");
  if (max_iter < 0) throw ContractViolation("max_iter must be >= 0");
  if (epochs < 0) throw ContractViolation("epochs must be >= 0");
  if (metric_cadence < 0) throw ContractViolation("metric_cadence must be >= 1 (0 = auto)");
  if (stop_accuracy && !(*stop_accuracy > 0.0 && *stop_accuracy <= 1.0))
    throw ContractViolation("stop_accuracy must lie in (0, 1]");
  if (batch_size && *batch_size == 0) throw ContractViolation("batch_size must be positive");
  if (!tau_grid.empty()) QuadratureGrid{tau_grid};
}

long OptimizerConfig::cadence_for(std::size_t dimension) const {
  if (metric_cadence > 0) return metric_cadence;
  return dimension < 1000 ? 1 : 5;
}

QuadratureGrid OptimizerConfig::grid() const {
  return tau_grid.empty() ? QuadratureGrid::standard() : QuadratureGrid(tau_grid);
}

namespace {

bool diverging(double loss, std::span<const double> grad, double threshold) {
  return !std::isfinite(loss) || loss >= threshold || !all_finite(grad);
}

// Fills the optional diagnostics that need extra evaluations.
void add_extra_metrics(const CostFunction& cost, std::span<const double> theta,
                       const OptimizerConfig& cfg, const QuadratureGrid& grid,
                       MetricSample& s) {
  if (s.grad_norm < grad_floor(s.loss)) return;
  if (cfg.metrics.sharpness) s.sharpness = estimate_sharpness(cost, theta, cfg.sharpness).value;
  if (cfg.metrics.identity || cfg.metrics.tau_sweep) {
    const TauProfile prof = dir_profile(cost, theta, cfg.eta, grid);
    if (cfg.metrics.tau_sweep) {
      s.tau_dir_mean = prof.mean;
      s.tau_dir_std = prof.stddev;
    }
    if (cfg.metrics.identity) {
      const double rp = s.rp ? *s.rp : relative_progress(cost, theta, cfg.eta);
      s.identity_residual = std::fabs(rp - (-1.0 + 0.5 * cfg.eta * prof.weighted_integral));
    }
  }
}

// RP and Dir at theta given the next iterate's loss and gradient.
void add_step_metrics(const Vector& grad, double gnorm, double loss, double next_loss,
                      const Vector& next_grad, const OptimizerConfig& cfg, MetricSample& s) {
  if (gnorm < grad_floor(loss)) return;
  if (cfg.metrics.rp) s.rp = (next_loss - loss) / (cfg.eta * gnorm * gnorm);
  if (cfg.metrics.dir) {
    double num = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double v = cfg.eta * grad[i];
      num += v * (grad[i] - next_grad[i]);
      vv += v * v;
    }
    s.dir = num / vv;
  }
}

void finish_sample(const CostFunction& cost, std::span<const double> theta,
                   const OptimizerConfig& cfg, const QuadratureGrid& grid, MetricSample& s) {
  if (s.grad_norm >= grad_floor(s.loss)) {
    const Vector grad = cost.gradient(theta);
    const Vector next = axpy(theta, -cfg.eta, grad);
    const double next_loss = cost.value(next);
    const Vector next_grad = cost.gradient(next);
    if (std::isfinite(next_loss) && all_finite(next_grad))
      add_step_metrics(grad, s.grad_norm, s.loss, next_loss, next_grad, cfg, s);
  }
  add_extra_metrics(cost, theta, cfg, grid, s);
}

}  // namespace

Trajectory gd_run(const CostFunction& cost, const ParamVector& theta0,
                  const OptimizerConfig& cfg) {
  cfg.validate();
  if (theta0.size() != cost.dimension())
    throw ContractViolation("gd_run: initial point has wrong dimension");
  const long cadence = cfg.cadence_for(cost.dimension());
  const QuadratureGrid grid = cfg.grid();

  Trajectory traj;
  traj.eta = cfg.eta;
  Vector theta = theta0.values();
  long t = 0;
  try {
    double loss = cost.value(theta);
    Vector grad = cost.gradient(theta);
    traj.max_param_norm = norm(theta);
    for (;; ++t) {
      MetricSample s;
      s.iteration = t;
      s.loss = loss;
      s.grad_norm = norm(grad);
      if (diverging(loss, grad, cfg.blowup_threshold)) {
        traj.samples.push_back(s);
        traj.outcome = Outcome::diverged;
        break;
      }
      const bool record = t % cadence == 0;
      bool converged = s.grad_norm <= cfg.grad_tolerance;
      if (!converged && record && cfg.stop_accuracy) {
        const auto acc = cost.accuracy(theta);
        converged = acc && *acc >= *cfg.stop_accuracy;
      }
      if (converged || t >= cfg.max_iter) {
        finish_sample(cost, theta, cfg, grid, s);
        traj.samples.push_back(s);
        traj.outcome = converged ? Outcome::converged : Outcome::budget_exhausted;
        break;
      }

      Vector next = axpy(theta, -cfg.eta, grad);
      const double next_loss = cost.value(next);
      Vector next_grad = cost.gradient(next);
      if (record) {
        add_step_metrics(grad, s.grad_norm, loss, next_loss, next_grad, cfg, s);
        add_extra_metrics(cost, theta, cfg, grid, s);
        traj.samples.push_back(s);
      }
      theta = std::move(next);
      loss = next_loss;
      grad = std::move(next_grad);
      traj.max_param_norm = std::max(traj.max_param_norm, norm(theta));
    }
  } catch (const RunError&) {
    throw;
  } catch (const std::exception& e) {
    throw RunError(t, e.what());
  }
  traj.iterations = t;
  traj.final_theta = std::move(theta);
  return traj;
}

Trajectory sgd_run(const CostFunction& cost, const ParamVector& theta0,
                   const OptimizerConfig& cfg) {
  cfg.validate();
  if (!cfg.batch_size) throw ContractViolation("sgd_run: batch_size must be set");
  if (!cost.has_dataset()) throw ContractViolation("sgd_run: cost has no dataset");
  if (theta0.size() != cost.dimension())
    throw ContractViolation("sgd_run: initial point has wrong dimension");
  const std::size_t n = cost.dataset().size();
  const std::size_t batch = std::min(*cfg.batch_size, n);
  const QuadratureGrid grid = cfg.grid();

  Trajectory traj;
  traj.eta = cfg.eta;
  Vector theta = theta0.values();
  traj.max_param_norm = norm(theta);
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::vector<std::size_t> order(n);
  long step = 0;
  try {
    for (long epoch = 1; epoch <= cfg.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      bool blew_up = false;
      for (std::size_t start = 0; start < n && !blew_up; start += batch) {
        const std::size_t stop = std::min(n, start + batch);
        std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                     order.begin() + static_cast<long>(stop));
        std::sort(idx.begin(), idx.end());
        const Vector g = cost.stochastic_gradient(theta, idx);
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= cfg.eta * g[i];
        ++step;
        blew_up = !all_finite(theta);
        if (!blew_up) traj.max_param_norm = std::max(traj.max_param_norm, norm(theta));
      }

      MetricSample s;
      s.iteration = step;
      s.loss = blew_up ? std::numeric_limits<double>::infinity() : cost.value(theta);
      const Vector grad = blew_up ? Vector(theta.size(), 0.0) : cost.gradient(theta);
      s.grad_norm = norm(grad);
      if (blew_up || diverging(s.loss, grad, cfg.blowup_threshold)) {
        traj.samples.push_back(s);
        traj.outcome = Outcome::diverged;
        break;
      }
      finish_sample(cost, theta, cfg, grid, s);
      if (cfg.metrics.expected_rp && s.grad_norm >= grad_floor(s.loss)) {
        const std::uint64_t mc_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch));
        const GradientSampler sampler = minibatch_sampler(cost, batch);
        s.expected_rp =
            expected_rp(cost, theta, cfg.eta, sampler, cfg.expected_rp_batches, mc_seed).estimate;
        s.expected_rp_rhs = expected_rp_rhs(cost, theta, cfg.eta, sampler,
                                            cfg.expected_rp_batches, mc_seed, cfg.rhs_form, grid)
                                .estimate;
      }
      traj.samples.push_back(s);
      if (s.grad_norm <= cfg.grad_tolerance) {
        traj.outcome = Outcome::converged;
        break;
      }
      if (cfg.stop_accuracy) {
        const auto acc = cost.accuracy(theta);
        if (acc && *acc >= *cfg.stop_accuracy) {
          traj.outcome = Outcome::converged;
          break;
        }
      }
    }
  } catch (const std::exception& e) {
    throw RunError(step, e.what());
  }
  traj.iterations = step;
  traj.final_theta = std::move(theta);
  return traj;
}

RegimeReport classify_regime(const Trajectory& traj, double eta, const RegimeThresholds& th) {
  if (!(eta > 0.0)) throw ContractViolation("classify_regime: eta must be positive");
  RegimeReport rep;
  if (traj.outcome == Outcome::diverged) {
    rep.regime = Regime::diverged;
    rep.rule = "outcome=diverged";
    return rep;
  }
  std::size_t below = 0, band = 0;
  for (const auto& s : traj.samples) {
    if (!s.rp) continue;
    ++rep.defined_rp;
    if (*s.rp < th.stable_rp) ++below;
    if (std::fabs(*s.rp) < th.unstable_band) ++band;
  }
  if (rep.defined_rp < th.min_samples)
    throw ContractViolation("classify_regime: need at least " + std::to_string(th.min_samples) +
                            " defined RP samples, got " + std::to_string(rep.defined_rp));
  rep.fraction_below_stable = static_cast<double>(below) / static_cast<double>(rep.defined_rp);
  rep.fraction_in_band = static_cast<double>(band) / static_cast<double>(rep.defined_rp);

  rep.loss_non_increasing = true;
  for (std::size_t i = 1; i < traj.samples.size(); ++i) {
    const double prev = traj.samples[i - 1].loss;
    if (traj.samples[i].loss > prev + 1e-12 * std::fabs(prev)) {
      rep.loss_non_increasing = false;
      break;
    }
  }
  rep.loss_decreased = traj.samples.back().loss < traj.samples.front().loss;

  if (rep.fraction_below_stable >= th.stable_fraction && rep.loss_non_increasing) {
    rep.regime = Regime::stable;
    rep.rule = "stable: RP<" + std::to_string(th.stable_rp) + " fraction >= " +
               std::to_string(th.stable_fraction) + " and loss non-increasing";
  } else if (rep.loss_decreased && rep.fraction_in_band >= th.unstable_fraction) {
    rep.regime = Regime::unstable;
    rep.rule = "unstable: |RP|<" + std::to_string(th.unstable_band) + " fraction >= " +
               std::to_string(th.unstable_fraction) + " and loss decreased";
  } else {
    // Fallback: is RP mostly nearer -1 (stable) or nearer 0 (unstable)?
    rep.regime = rep.fraction_below_stable > 0.5 ? Regime::stable : Regime::unstable;
    rep.rule = "majority: RP<" + std::to_string(th.stable_rp) + " fraction " +
               std::to_string(rep.fraction_below_stable);
  }
  return rep;
}

EscapeReport escape_experiment(const CostFunction& cost, const ParamVector& p,
                               double perturb_scale, double eta, long iters, std::size_t trials,
                               std::uint64_t seed) {
  if (p.size() != cost.dimension()) throw ContractViolation("escape: p has wrong dimension");
  if (!(perturb_scale > 0.0) || !(eta > 0.0) || iters < 1 || trials == 0)
    throw ContractViolation("escape: scale, eta, iters and trials must be positive");

  struct Trial {
    bool escaped = false;
    bool finite = true;
    double max_norm = 0.0;
    double final_distance = 0.0;
  };
  std::vector<Trial> results(trials);
  parallel_for(trials, [&](std::size_t k) {
    std::mt19937_64 rng(derive_seed(seed, k));
    std::normal_distribution<double> gauss;
    Vector delta(p.size());
    do {
      for (double& x : delta) x = gauss(rng);
    } while (!(norm(delta) > 0.0));
    const double dn = norm(delta);
    Vector theta(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) theta[i] = p[i] + perturb_scale * delta[i] / dn;
    const double start_distance = norm(difference(theta, p.values()));

    Trial& r = results[k];
    r.max_norm = norm(theta);
    for (long t = 0; t < iters; ++t) {
      const Vector g = cost.gradient(theta);
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= eta * g[i];
      if (!all_finite(theta)) {
        r.finite = false;
        break;
      }
      r.max_norm = std::max(r.max_norm, norm(theta));
    }
    r.final_distance = r.finite ? norm(difference(theta, p.values()))
                                : std::numeric_limits<double>::infinity();
    r.escaped = r.final_distance > 10.0 * start_distance;
  });

  EscapeReport rep;
  rep.trials = trials;
  std::size_t escaped = 0;
  for (const Trial& r : results) {
    escaped += r.escaped ? 1 : 0;
    rep.all_finite = rep.all_finite && r.finite;
    rep.max_param_norm = std::max(rep.max_param_norm, r.max_norm);
    rep.max_final_distance = std::max(rep.max_final_distance, r.final_distance);
  }
  rep.fraction_escaped = static_cast<double>(escaped) / static_cast<double>(trials);
  return rep;
}

}  // namespace eos
