#include "eos/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "eos/errors.hpp"

namespace eos {

namespace detail {
const std::map<std::string, std::string>& preset_texts();
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> try_real(std::string_view text) {
  const std::string s = trim(text);
  if (s.empty()) return std::nullopt;
  const auto slash = s.find('/');
  if (slash != std::string::npos) {
    const auto num = try_real(std::string_view(s).substr(0, slash));
    const auto den = try_real(std::string_view(s).substr(slash + 1));
    if (!num || !den || *den == 0.0) return std::nullopt;
    return *num / *den;
  }
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct Entry {
  std::string value;
  std::size_t line = 0;
  bool used = false;
};

class Document {
 public:
  explicit Document(std::string_view text) {
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto nl = text.find('\n', pos);
      const std::string_view raw =
          text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
      pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
      ++line_no;
      std::string line = trim(raw);
      if (line.empty() || line[0] == '#' || line[0] == ';') continue;
      const auto hash = line.find(" #");
      if (hash != std::string::npos) line = trim(line.substr(0, hash));
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
        section = trim(line.substr(1, line.size() - 2));
        if (!known_section(section)) throw ConfigError("unknown section [" + section + "]", line_no);
        sections_[section];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("expected 'key = value', got '" + line + "'", line_no);
      if (section.empty()) throw ConfigError("key outside of any section", line_no);
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError("empty key", line_no);
      auto& sec = sections_[section];
      if (sec.count(key))
        throw ConfigError("duplicate key " + section + "." + key + " (first on line " +
                              std::to_string(sec[key].line) + ")",
                          line_no);
      sec[key] = Entry{trim(line.substr(eq + 1)), line_no, false};
    }
  }

  Entry* find(const std::string& section, const std::string& key) {
    auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    k->second.used = true;
    return &k->second;
  }

  void reject_unused() const {
    for (const auto& [sname, sec] : sections_)
      for (const auto& [key, e] : sec)
        if (!e.used) throw ConfigError("unknown key " + sname + "." + key, e.line);
  }

 private:
  static bool known_section(const std::string& s) {
    for (const char* k : {"experiment", "cost", "data", "optimizer", "metrics", "regime", "sweep"})
      if (s == k) return true;
    return false;
  }
  std::map<std::string, std::map<std::string, Entry>> sections_;
};

class Reader {
 public:
  explicit Reader(Document& doc) : doc_(doc) {}

  const Entry* get(const std::string& section, const std::string& key) {
    return doc_.find(section, key);
  }

  std::string text(const std::string& s, const std::string& k, std::string fallback) {
    const Entry* e = get(s, k);
    return e ? e->value : fallback;
  }

  std::string required(const std::string& s, const std::string& k) {
    const Entry* e = get(s, k);
    if (!e || e->value.empty()) throw ConfigError("missing required field " + s + "." + k);
    return e->value;
  }

  double real(const std::string& s, const std::string& k, double fallback) {
    const Entry* e = get(s, k);
    return e ? to_real(*e, s + "." + k) : fallback;
  }

  std::optional<double> optional_real(const std::string& s, const std::string& k) {
    const Entry* e = get(s, k);
    if (!e || e->value == "none" || e->value.empty()) return std::nullopt;
    return to_real(*e, s + "." + k);
  }

  long integer(const std::string& s, const std::string& k, long fallback) {
    const Entry* e = get(s, k);
    return e ? to_integer(*e, s + "." + k) : fallback;
  }

  std::optional<long> optional_integer(const std::string& s, const std::string& k) {
    const Entry* e = get(s, k);
    if (!e || e->value == "none" || e->value.empty()) return std::nullopt;
    return to_integer(*e, s + "." + k);
  }

  std::uint64_t seed(const std::string& s, const std::string& k, std::uint64_t fallback) {
    const Entry* e = get(s, k);
    if (!e) return fallback;
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(e->value.c_str(), &end, 0);
    if (e->value.empty() || e->value[0] == '-' || end != e->value.c_str() + e->value.size() ||
        errno == ERANGE)
      throw ConfigError(s + "." + k + ": expected an unsigned 64-bit integer, got '" + e->value +
                            "'",
                        e->line);
    return v;
  }

  bool boolean(const std::string& s, const std::string& k, bool fallback) {
    const Entry* e = get(s, k);
    if (!e) return fallback;
    for (const char* t : {"true", "yes", "on", "1"})
      if (e->value == t) return true;
    for (const char* f : {"false", "no", "off", "0"})
      if (e->value == f) return false;
    throw ConfigError(s + "." + k + ": expected true or false, got '" + e->value + "'", e->line);
  }

  Vector reals(const std::string& s, const std::string& k) {
    const Entry* e = get(s, k);
    if (!e) return {};
    return to_reals(e->value, *e, s + "." + k);
  }

  static double to_real(const Entry& e, const std::string& field) {
    const auto v = try_real(e.value);
    if (!v) throw ConfigError(field + ": expected a number, got '" + e.value + "'", e.line);
    return *v;
  }

  static long to_integer(const Entry& e, const std::string& field) {
    char* end = nullptr;
    errno = 0;
    const long v = std::strtol(e.value.c_str(), &end, 10);
    if (e.value.empty() || end != e.value.c_str() + e.value.size() || errno == ERANGE)
      throw ConfigError(field + ": expected an integer, got '" + e.value + "'", e.line);
    return v;
  }

  static Vector to_reals(const std::string& text, const Entry& e, const std::string& field) {
    Vector out;
    if (trim(text).empty() || trim(text) == "none") return out;
    for (const std::string& item : split(text, ',')) {
      const auto v = try_real(item);
      if (!v) throw ConfigError(field + ": expected a number list, bad item '" + item + "'", e.line);
      out.push_back(*v);
    }
    return out;
  }

  std::size_t line(const std::string& s, const std::string& k) {
    const Entry* e = get(s, k);
    return e ? e->line : 0;
  }

 private:
  Document& doc_;
};

Activation activation_at(const std::string& value, std::size_t line, const std::string& field) {
  try {
    return parse_activation(value);
  } catch (const std::exception&) {
    throw ConfigError(field + ": unknown activation '" + value + "' (linear, tanh, relu)", line);
  }
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

std::string join(const Vector& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out;
}

template <class T>
std::string join_sizes(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out.empty() ? "none" : out;
}

bool is_diagonal(const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (r != c && m(r, c) != 0.0) return false;
  return true;
}

}  // namespace

double parse_real(std::string_view text) {
  const auto v = try_real(text);
  if (!v) throw ConfigError("expected a number, got '" + std::string(text) + "'");
  return *v;
}

namespace {

ExperimentSpec parse_named(std::string_view text, const std::string& default_name) {
  Document doc(text);
  Reader in(doc);
  ExperimentSpec spec;

  spec.name = in.text("experiment", "name", default_name);
  spec.description = in.text("experiment", "description", "");
  spec.output = in.text("experiment", "output", spec.name);

  // [cost]
  CostSpec& c = spec.cost;
  c.kind = in.required("cost", "kind");
  if (c.kind == "quadratic" || c.kind == "tanh_quadratic") {
    const Entry* diag = in.get("cost", "diag");
    const Entry* rows = in.get("cost", "matrix");
    if (!diag == !rows)
      throw ConfigError("cost." + c.kind + " needs exactly one of cost.diag or cost.matrix",
                        diag ? diag->line : rows ? rows->line : 0);
    if (diag) {
      const Vector d = Reader::to_reals(diag->value, *diag, "cost.diag");
      if (d.empty()) throw ConfigError("cost.diag is empty", diag->line);
      c.matrix = Matrix::diagonal(d);
    } else {
      const auto lines = split(rows->value, ';');
      std::vector<Vector> parsed;
      for (const auto& r : lines) parsed.push_back(Reader::to_reals(r, *rows, "cost.matrix"));
      const std::size_t n = parsed.size();
      c.matrix = Matrix(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        if (parsed[i].size() != n)
          throw ConfigError("cost.matrix must be square (row " + std::to_string(i) + ")",
                            rows->line);
        for (std::size_t j = 0; j < n; ++j) c.matrix(i, j) = parsed[i][j];
      }
    }
    c.linear = in.reals("cost", "linear");
    if (!c.linear.empty() && c.linear.size() != c.matrix.rows())
      throw ConfigError("cost.linear has the wrong length", in.line("cost", "linear"));
    c.offset = in.real("cost", "offset", 0.0);
  } else if (c.kind == "single_neuron") {
    const std::string act = in.required("cost", "activation");
    c.activation = activation_at(act, in.line("cost", "activation"), "cost.activation");
    c.x = in.real("cost", "x", 1.0);
    c.y = in.real("cost", "y", 0.0);
  } else if (c.kind == "mlp") {
    c.mlp.activation =
        activation_at(in.text("cost", "activation", "tanh"), in.line("cost", "activation"),
                      "cost.activation");
    c.activation = c.mlp.activation;
    if (const Entry* h = in.get("cost", "hidden")) {
      c.mlp.hidden.clear();
      for (double w : Reader::to_reals(h->value, *h, "cost.hidden")) {
        if (w < 1 || w != std::floor(w))
          throw ConfigError("cost.hidden: widths must be positive integers", h->line);
        c.mlp.hidden.push_back(static_cast<std::size_t>(w));
      }
    }
    if (const auto layer = in.optional_integer("cost", "normalize_layer")) {
      if (*layer < 0 || static_cast<std::size_t>(*layer) >= c.mlp.hidden.size())
        throw ConfigError("cost.normalize_layer must index a hidden layer",
                          in.line("cost", "normalize_layer"));
      c.mlp.normalize_layer = static_cast<std::size_t>(*layer);
    }
    c.mlp.normalize_eps = in.real("cost", "normalize_eps", 0.0);
  } else {
    throw ConfigError("cost.kind: unknown kind '" + c.kind +
                          "' (quadratic, tanh_quadratic, single_neuron, mlp)",
                      in.line("cost", "kind"));
  }
  c.weight_decay = in.real("cost", "weight_decay", 0.0);
  if (c.weight_decay < 0.0)
    throw ConfigError("cost.weight_decay must be >= 0", in.line("cost", "weight_decay"));

  // [data]
  DataSpec& d = spec.data;
  d.source = in.text("data", "source", "synthetic");
  if (d.source == "synthetic") {
    d.synth.n = static_cast<std::size_t>(in.integer("data", "n", 512));
    d.synth.d = static_cast<std::size_t>(in.integer("data", "d", 16));
    d.synth.classes = static_cast<std::size_t>(in.integer("data", "classes", 4));
    d.synth.cluster_spread = in.real("data", "spread", 0.5);
    d.synth.seed = in.seed("data", "seed", 0);
    if (d.synth.classes < 2 || d.synth.n < d.synth.classes || d.synth.d < 1 ||
        !(d.synth.cluster_spread >= 0.0))
      throw ConfigError("data: need classes >= 2, n >= classes, d >= 1, spread >= 0",
                        in.line("data", "n"));
  } else if (d.source == "cifar10") {
    d.path = in.required("data", "path");
    if (!std::filesystem::exists(d.path))
      throw ConfigError("data.path: no such file '" + d.path + "'", in.line("data", "path"));
    if (const auto n = in.optional_integer("data", "n_take")) {
      if (*n < 1) throw ConfigError("data.n_take must be positive", in.line("data", "n_take"));
      d.n_take = static_cast<std::size_t>(*n);
    }
  } else {
    throw ConfigError("data.source: unknown source '" + d.source + "' (synthetic, cifar10)",
                      in.line("data", "source"));
  }
  if (const auto n = in.optional_integer("data", "subsample")) {
    if (*n < 1) throw ConfigError("data.subsample must be positive", in.line("data", "subsample"));
    d.subsample = static_cast<std::size_t>(*n);
  }
  d.subsample_seed = in.seed("data", "subsample_seed", 0);

  // [optimizer]
  OptimizerConfig& o = spec.optimizer;
  o.eta = Reader::to_real(
      [&]() -> const Entry& {
        const Entry* e = in.get("optimizer", "eta");
        if (!e || e->value.empty()) throw ConfigError("missing required field optimizer.eta");
        return *e;
      }(),
      "optimizer.eta");
  if (!(o.eta > 0.0)) throw ConfigError("optimizer.eta must be positive", in.line("optimizer", "eta"));
  const std::string algo = in.text("optimizer", "algorithm", "gd");
  if (algo == "gd") {
    spec.algorithm = Algorithm::gd;
  } else if (algo == "sgd") {
    spec.algorithm = Algorithm::sgd;
  } else {
    throw ConfigError("optimizer.algorithm: expected gd or sgd, got '" + algo + "'",
                      in.line("optimizer", "algorithm"));
  }
  o.max_iter = in.integer("optimizer", "max_iter", o.max_iter);
  o.epochs = in.integer("optimizer", "epochs", o.epochs);
  o.metric_cadence = in.integer("optimizer", "cadence", 0);
  o.stop_accuracy = in.optional_real("optimizer", "stop_accuracy");
  o.grad_tolerance = in.real("optimizer", "grad_tolerance", o.grad_tolerance);
  o.blowup_threshold = in.real("optimizer", "blowup_threshold", o.blowup_threshold);
  o.seed = in.seed("optimizer", "seed", 0);
  if (const auto b = in.optional_integer("optimizer", "batch_size")) {
    if (*b < 1) throw ConfigError("optimizer.batch_size must be positive",
                                  in.line("optimizer", "batch_size"));
    o.batch_size = static_cast<std::size_t>(*b);
  }
  if (spec.algorithm == Algorithm::sgd && !o.batch_size)
    throw ConfigError("missing required field optimizer.batch_size (algorithm = sgd)");
  if (spec.algorithm == Algorithm::sgd && !spec.uses_dataset())
    throw ConfigError("optimizer.algorithm = sgd needs cost.kind = mlp",
                      in.line("optimizer", "algorithm"));
  spec.theta0 = in.reals("optimizer", "theta0");
  spec.init_seed = in.seed("optimizer", "init_seed", 0);
  if (spec.theta0.empty() && !spec.uses_dataset())
    throw ConfigError("missing required field optimizer.theta0 (cost." + c.kind + ")");

  // [metrics]
  MetricFlags& m = o.metrics;
  m.rp = in.boolean("metrics", "rp", true);
  m.dir = in.boolean("metrics", "dir", true);
  m.sharpness = in.boolean("metrics", "sharpness", false);
  m.identity = in.boolean("metrics", "identity", false);
  m.tau_sweep = in.boolean("metrics", "tau_sweep", false);
  m.expected_rp = in.boolean("metrics", "expected_rp", false);
  o.sharpness.tol = in.real("metrics", "sharpness_tol", o.sharpness.tol);
  o.sharpness.max_iter =
      static_cast<int>(in.integer("metrics", "sharpness_max_iter", o.sharpness.max_iter));
  const Entry* points = in.get("metrics", "tau_points");
  const Entry* grid = in.get("metrics", "tau_grid");
  if (points && grid)
    throw ConfigError("metrics.tau_points and metrics.tau_grid are exclusive", grid->line);
  if (points) {
    const long n = Reader::to_integer(*points, "metrics.tau_points");
    if (n < 1) throw ConfigError("metrics.tau_points must be positive", points->line);
    if (n != 100) o.tau_grid = QuadratureGrid::uniform(static_cast<std::size_t>(n)).taus();
  } else if (grid) {
    o.tau_grid = Reader::to_reals(grid->value, *grid, "metrics.tau_grid");
  }
  o.expected_rp_batches = static_cast<std::size_t>(
      in.integer("metrics", "expected_rp_batches", static_cast<long>(o.expected_rp_batches)));
  const std::string form = in.text("metrics", "rhs_form", "single_tau");
  if (form == "single_tau") {
    o.rhs_form = RhsForm::single_tau;
  } else if (form == "quadrature") {
    o.rhs_form = RhsForm::quadrature;
  } else {
    throw ConfigError("metrics.rhs_form: expected single_tau or quadrature",
                      in.line("metrics", "rhs_form"));
  }

  // [regime]
  RegimeThresholds& r = spec.regime;
  r.stable_rp = in.real("regime", "stable_rp", r.stable_rp);
  r.stable_fraction = in.real("regime", "stable_fraction", r.stable_fraction);
  r.unstable_band = in.real("regime", "unstable_band", r.unstable_band);
  r.unstable_fraction = in.real("regime", "unstable_fraction", r.unstable_fraction);
  r.min_samples = static_cast<std::size_t>(
      in.integer("regime", "min_samples", static_cast<long>(r.min_samples)));

  // [sweep]
  spec.sweep_eta = in.reals("sweep", "eta");
  for (double e : spec.sweep_eta)
    if (!(e > 0.0)) throw ConfigError("sweep.eta: step sizes must be positive", in.line("sweep", "eta"));
  if (const Entry* acts = in.get("sweep", "activation")) {
    if (c.kind != "single_neuron" && c.kind != "mlp")
      throw ConfigError("sweep.activation needs a single_neuron or mlp cost", acts->line);
    for (const std::string& a : split(acts->value, ','))
      spec.sweep_activation.push_back(activation_at(a, acts->line, "sweep.activation"));
  }

  doc.reject_unused();
  try {
    o.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("optimizer: ") + e.what());
  }
  if (!spec.theta0.empty() && c.kind != "mlp") {
    const std::size_t dim = c.kind == "single_neuron" ? 2 : c.matrix.rows();
    if (spec.theta0.size() != dim)
      throw ConfigError("optimizer.theta0 has " + std::to_string(spec.theta0.size()) +
                            " entries, cost needs " + std::to_string(dim),
                        in.line("optimizer", "theta0"));
  }
  return spec;
}

}  // namespace

ExperimentSpec parse_experiment(std::string_view text) {
  return parse_named(text, "experiment");
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  // An unnamed config takes its file stem.
  return parse_named(text.str(), path.stem().string());
}

ExperimentSpec resolve_experiment(const std::string& name_or_path) {
  if (const auto text = preset_text(name_or_path)) return parse_experiment(*text);
  if (!std::filesystem::exists(name_or_path))
    throw ConfigError("'" + name_or_path + "' is neither a preset nor a readable file");
  return load_experiment(name_or_path);
}

std::string render_experiment(const ExperimentSpec& s) {
  std::ostringstream os;
  os << "[experiment]\nname = " << s.name << "\n";
  if (!s.description.empty()) os << "description = " << s.description << "\n";
  os << "output = " << s.output << "\n\n[cost]\nkind = " << s.cost.kind << "\n";
  const CostSpec& c = s.cost;
  if (c.kind == "quadratic" || c.kind == "tanh_quadratic") {
    if (is_diagonal(c.matrix)) {
      Vector d(c.matrix.rows());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = c.matrix(i, i);
      os << "diag = " << join(d) << "\n";
    } else {
      os << "matrix = ";
      for (std::size_t r = 0; r < c.matrix.rows(); ++r)
        os << (r ? "; " : "") << join(Vector(c.matrix.row(r).begin(), c.matrix.row(r).end()));
      os << "\n";
    }
    if (!c.linear.empty()) os << "linear = " << join(c.linear) << "\n";
    if (c.offset != 0.0) os << "offset = " << fmt(c.offset) << "\n";
  } else if (c.kind == "single_neuron") {
    os << "activation = " << to_string(c.activation) << "\nx = " << fmt(c.x)
       << "\ny = " << fmt(c.y) << "\n";
  } else if (c.kind == "mlp") {
    os << "activation = " << to_string(c.mlp.activation)
       << "\nhidden = " << join_sizes(c.mlp.hidden) << "\n";
    if (c.mlp.normalize_layer)
      os << "normalize_layer = " << *c.mlp.normalize_layer
         << "\nnormalize_eps = " << fmt(c.mlp.normalize_eps) << "\n";
  }
  if (c.weight_decay != 0.0) os << "weight_decay = " << fmt(c.weight_decay) << "\n";

  if (s.uses_dataset()) {
    const DataSpec& d = s.data;
    os << "\n[data]\nsource = " << d.source << "\n";
    if (d.source == "synthetic") {
      os << "n = " << d.synth.n << "\nd = " << d.synth.d << "\nclasses = " << d.synth.classes
         << "\nspread = " << fmt(d.synth.cluster_spread) << "\nseed = " << d.synth.seed << "\n";
    } else {
      os << "path = " << d.path << "\n";
      if (d.n_take) os << "n_take = " << *d.n_take << "\n";
    }
    if (d.subsample)
      os << "subsample = " << *d.subsample << "\nsubsample_seed = " << d.subsample_seed << "\n";
  }

  const OptimizerConfig& o = s.optimizer;
  os << "\n[optimizer]\nalgorithm = " << (s.algorithm == Algorithm::sgd ? "sgd" : "gd")
     << "\neta = " << fmt(o.eta) << "\nmax_iter = " << o.max_iter << "\nepochs = " << o.epochs
     << "\ncadence = " << o.metric_cadence << "\nstop_accuracy = "
     << (o.stop_accuracy ? fmt(*o.stop_accuracy) : "none")
     << "\ngrad_tolerance = " << fmt(o.grad_tolerance)
     << "\nblowup_threshold = " << fmt(o.blowup_threshold) << "\nseed = " << o.seed
     << "\nbatch_size = " << (o.batch_size ? std::to_string(*o.batch_size) : "none") << "\n";
  if (!s.theta0.empty()) os << "theta0 = " << join(s.theta0) << "\n";
  os << "init_seed = " << s.init_seed << "\n";

  const MetricFlags& m = o.metrics;
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "\n[metrics]\nrp = " << b(m.rp) << "\ndir = " << b(m.dir)
     << "\nsharpness = " << b(m.sharpness) << "\nidentity = " << b(m.identity)
     << "\ntau_sweep = " << b(m.tau_sweep) << "\nexpected_rp = " << b(m.expected_rp)
     << "\nsharpness_tol = " << fmt(o.sharpness.tol)
     << "\nsharpness_max_iter = " << o.sharpness.max_iter << "\n";
  if (!o.tau_grid.empty()) os << "tau_grid = " << join(o.tau_grid) << "\n";
  os << "expected_rp_batches = " << o.expected_rp_batches << "\nrhs_form = "
     << (o.rhs_form == RhsForm::quadrature ? "quadrature" : "single_tau") << "\n";

  const RegimeThresholds& r = s.regime;
  os << "\n[regime]\nstable_rp = " << fmt(r.stable_rp)
     << "\nstable_fraction = " << fmt(r.stable_fraction)
     << "\nunstable_band = " << fmt(r.unstable_band)
     << "\nunstable_fraction = " << fmt(r.unstable_fraction)
     << "\nmin_samples = " << r.min_samples << "\n";

  if (!s.sweep_eta.empty() || !s.sweep_activation.empty()) {
    os << "\n[sweep]\n";
    if (!s.sweep_eta.empty()) os << "eta = " << join(s.sweep_eta) << "\n";
    if (!s.sweep_activation.empty()) {
      os << "activation = ";
      for (std::size_t i = 0; i < s.sweep_activation.size(); ++i)
        os << (i ? ", " : "") << to_string(s.sweep_activation[i]);
      os << "\n";
    }
  }
  return os.str();
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : detail::preset_texts()) out.push_back(name);
  return out;
}

std::optional<std::string> preset_text(const std::string& name) {
  // Alternate names.
  static const std::map<std::string, std::string> aliases = {
      {"example-2.2-sweep", "quadratic-step-sweep"},
      {"example-3.4", "single-neuron"},
  };
  const auto alias = aliases.find(name);
  const std::string& key = alias == aliases.end() ? name : alias->second;
  const auto& all = detail::preset_texts();
  const auto it = all.find(key);
  if (it == all.end()) return std::nullopt;
  return it->second;
}

}  // namespace eos
