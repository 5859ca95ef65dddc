#include "eos/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "eos/errors.hpp"
#include "eos/parallel.hpp"
#include "eos/theory.hpp"

namespace eos {

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string opt(const std::optional<double>& x) {
  return x && std::isfinite(*x) ? num(*x) : std::string();
}

std::string eta_tag(double eta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", eta);
  return buf;
}

void write_comment_block(std::ostream& os, const std::string& text) {
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) os << "# " << line << "\n";
}

}  // namespace

std::shared_ptr<const Dataset> build_dataset(const DataSpec& d) {
  Dataset data = d.source == "cifar10" ? load_cifar10_binary(d.path, d.n_take)
                                       : synth_dataset(d.synth);
  if (d.subsample) data = subsample(data, *d.subsample, d.subsample_seed);
  return std::make_shared<const Dataset>(std::move(data));
}

CostFunction build_cost(const CostSpec& c, std::shared_ptr<const Dataset> data) {
  CostFunction cost = [&] {
    if (c.kind == "quadratic") return make_quadratic(c.matrix, c.linear, c.offset);
    if (c.kind == "tanh_quadratic") return make_tanh_quadratic(c.matrix, c.linear, c.offset);
    if (c.kind == "single_neuron") return make_single_neuron(c.activation, c.x, c.y);
    if (c.kind == "mlp") {
      if (!data) throw ContractViolation("build_cost: mlp cost needs a dataset");
      return make_mlp(std::move(data), c.mlp);
    }
    throw ContractViolation("build_cost: unknown cost kind '" + c.kind + "'");
  }();
  return c.weight_decay > 0.0 ? wrap_weight_decay(cost, c.weight_decay) : cost;
}

ParamVector initial_point(const ExperimentSpec& spec, const CostFunction& cost) {
  if (!spec.theta0.empty()) {
    if (spec.theta0.size() != cost.dimension())
      throw ContractViolation("theta0 has " + std::to_string(spec.theta0.size()) +
                              " entries, cost has dimension " +
                              std::to_string(cost.dimension()));
    return ParamVector(spec.theta0);
  }
  return mlp_initial_point(data_fit_part(cost), spec.init_seed);
}

std::vector<ExperimentSpec> expand_sweep(const ExperimentSpec& spec) {
  const std::vector<double> etas =
      spec.sweep_eta.empty() ? std::vector<double>{spec.optimizer.eta} : spec.sweep_eta;
  std::vector<std::optional<Activation>> acts;
  for (Activation a : spec.sweep_activation) acts.emplace_back(a);
  if (acts.empty()) acts.emplace_back(std::nullopt);

  std::vector<ExperimentSpec> out;
  for (const auto& act : acts) {
    for (double eta : etas) {
      ExperimentSpec s = spec;
      s.sweep_eta.clear();
      s.sweep_activation.clear();
      s.optimizer.eta = eta;
      if (act) {
        s.cost.activation = *act;
        s.cost.mlp.activation = *act;
        s.output += "_act-" + to_string(*act);
      }
      if (!spec.sweep_eta.empty()) s.output += "_eta-" + eta_tag(eta);
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::string run_status(const Trajectory& t) {
  switch (t.outcome) {
    case Outcome::converged: return "converged";
    case Outcome::diverged: return "diverged";
    case Outcome::budget_exhausted: break;
  }
  if (t.samples.empty()) return "budget-exhausted";
  const double first = t.samples.front().loss, last = t.samples.back().loss;
  const bool still_high = std::fabs(last) >= 1e-6 * std::fabs(first) && first != 0.0;
  return still_high ? "bounded-oscillation" : "budget-exhausted";
}

RunResult run_single(const ExperimentSpec& spec, std::shared_ptr<const Dataset> data) {
  if (spec.uses_dataset() && !data) data = build_dataset(spec.data);
  const CostFunction cost = build_cost(spec.cost, data);
  const ParamVector theta0 = initial_point(spec, cost);

  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  r.trajectory = spec.algorithm == Algorithm::sgd ? sgd_run(cost, theta0, spec.optimizer)
                                                  : gd_run(cost, theta0, spec.optimizer);
  RunSummary& s = r.summary;
  s.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const Trajectory& t = r.trajectory;
  s.label = spec.output;
  s.eta = spec.optimizer.eta;
  if (spec.cost.kind == "single_neuron" || spec.cost.kind == "mlp")
    s.activation = to_string(spec.cost.activation);
  s.outcome = t.outcome;
  s.status = run_status(t);
  s.iterations = t.iterations;
  s.initial_loss = t.samples.empty() ? cost.value(theta0) : t.samples.front().loss;
  s.final_loss = t.samples.empty() ? s.initial_loss : t.samples.back().loss;
  s.max_param_norm = t.max_param_norm;
  s.seed = spec.algorithm == Algorithm::sgd ? spec.optimizer.seed : spec.init_seed;
  if (spec.cost.kind == "quadratic")
    s.oracle_diverges = quadratic_divergence_oracle(spec.cost.matrix, spec.optimizer.eta);
  try {
    const RegimeReport rep = classify_regime(t, spec.optimizer.eta, spec.regime);
    s.regime = to_string(rep.regime);
    s.regime_rule = rep.rule;
  } catch (const ContractViolation& e) {
    s.regime = "n/a";
    s.regime_rule = e.what();
  }
  return r;
}

void write_trace_csv(std::ostream& os, const ExperimentSpec& spec, const Trajectory& traj) {
  write_comment_block(os, render_experiment(spec));
  os << "# seed = " << (spec.algorithm == Algorithm::sgd ? spec.optimizer.seed : spec.init_seed)
     << "\n# outcome = " << to_string(traj.outcome) << "\n";
  os << kTraceHeader << "\n";
  for (const MetricSample& m : traj.samples) {
    os << m.iteration << ',' << (std::isfinite(m.loss) ? num(m.loss) : std::string()) << ','
       << (std::isfinite(m.grad_norm) ? num(m.grad_norm) : std::string()) << ',' << opt(m.rp)
       << ',' << opt(m.dir) << ',' << opt(m.sharpness) << ',' << opt(m.identity_residual) << ','
       << opt(m.tau_dir_mean) << ',' << opt(m.tau_dir_std) << "\n";
  }
}

void write_summary_csv(std::ostream& os, const ExperimentSpec& spec,
                       const std::vector<RunSummary>& rows) {
  write_comment_block(os, render_experiment(spec));
  os << "label,eta,activation,outcome,status,regime,iterations,initial_loss,final_loss,"
        "max_param_norm,oracle_diverges,runtime_s,seed,trace,regime_rule\n";
  for (const RunSummary& r : rows) {
    os << r.label << ',' << num(r.eta) << ',' << r.activation << ',' << to_string(r.outcome)
       << ',' << r.status << ',' << r.regime << ',' << r.iterations << ','
       << (std::isfinite(r.initial_loss) ? num(r.initial_loss) : "") << ','
       << (std::isfinite(r.final_loss) ? num(r.final_loss) : "") << ','
       << (std::isfinite(r.max_param_norm) ? num(r.max_param_norm) : "") << ','
       << (r.oracle_diverges ? (*r.oracle_diverges ? "true" : "false") : "") << ','
       << num(r.runtime_s) << ',' << r.seed << ',' << r.trace_path << ",\"" << r.regime_rule
       << "\"\n";
  }
}

std::vector<RunSummary> run_experiment(const ExperimentSpec& spec,
                                       const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::vector<ExperimentSpec> runs = expand_sweep(spec);
  std::shared_ptr<const Dataset> data;
  if (spec.uses_dataset()) data = build_dataset(spec.data);

  std::vector<RunSummary> rows(runs.size());
  parallel_for(runs.size(), [&](std::size_t i) {
    RunResult r = run_single(runs[i], data);
    const auto path = out_dir / (runs[i].output + ".csv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_trace_csv(out, runs[i], r.trajectory);
    r.summary.trace_path = path.string();
    rows[i] = std::move(r.summary);
  });

  const auto summary_path = out_dir / (spec.output + "_summary.csv");
  std::ofstream out(summary_path);
  if (!out) throw std::runtime_error("cannot write " + summary_path.string());
  write_summary_csv(out, spec, rows);
  return rows;
}

std::filesystem::path default_output_dir() {
  if (const char* env = std::getenv("EOSDIAG_OUTPUT_DIR"); env && *env) return env;
  return "eosdiag-out";
}

}  // namespace eos
