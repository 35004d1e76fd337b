#include "opidmd/experiment.hpp"

#include "opidmd/error.hpp"
#include "opidmd/generators.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <variant>

namespace opidmd {

namespace {

using Clock = std::chrono::steady_clock;

// Largest state dimension for which a dense n x n operator is fitted.
constexpr Eigen::Index kMaxDenseState = 4096;

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, "field '" + field + "': " + what);
}

// Strict view of one JSON object: every key must be consumed before finish().
class Fields {
 public:
  Fields(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_number()) config_error(field(key), "expected a number");
    return v.get<double>();
  }
  double number(const std::string& key) {
    require(key);
    return number(key, 0.0);
  }

  long long integer(const std::string& key, long long fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_number_integer()) config_error(field(key), "expected an integer");
    return v.get<long long>();
  }
  long long integer(const std::string& key) {
    require(key);
    return integer(key, 0);
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    const bool ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    if (!ok) config_error(field(key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_boolean()) config_error(field(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_string()) config_error(field(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key) {
    require(key);
    return string(key, "");
  }

  void require(const std::string& key) const {
    if (!has(key)) config_error(field(key), "missing required field");
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) config_error(field(it.key()), "unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

int positive_int(Fields& f, const std::string& key, long long fallback) {
  const long long v = f.integer(key, fallback);
  if (v < 1 || v > std::numeric_limits<int>::max()) config_error(f.field(key), "must be a positive integer");
  return static_cast<int>(v);
}

struct CsvSource {
  std::string clean;
  std::string noisy;
};

using GeneratorSpec =
    std::variant<Advection2DConfig, Schrodinger1DConfig, AdvDiff1DConfig, LorenzConfig, Msd5Config, CylinderSource,
                 CsvSource>;

const char* const kGeneratorNames = "advection2d, schrodinger, advdiff, lorenz, msd5, cylinder, csv";

GeneratorSpec parse_generator(const Json& j, std::uint64_t seed) {
  Fields f(j, "generator");
  const std::string name = f.string("name");
  if (name == "advection2d") {
    Advection2DConfig c;
    c.cx = f.number("cx", c.cx);
    c.cy = f.number("cy", c.cy);
    c.lx = f.number("lx", c.lx);
    c.ly = f.number("ly", c.ly);
    c.nx = positive_int(f, "nx", c.nx);
    c.ny = positive_int(f, "ny", c.ny);
    c.nt = positive_int(f, "nt", c.nt);
    c.t_end = f.number("t_end", c.t_end);
    if (f.has("initial")) {
      const Json& init = f.raw("initial");
      if (init.is_number()) {
        const double value = init.get<double>();
        c.initial = [value](double, double) { return value; };
      } else if (!(init.is_string() && init.get<std::string>() == "sine")) {
        config_error("generator.initial", "expected \"sine\" or a constant value");
      }
    }
    f.finish();
    return c;
  }
  if (name == "schrodinger") {
    Schrodinger1DConfig c;
    c.hbar = f.number("hbar", c.hbar);
    c.mass = f.number("mass", c.mass);
    c.lx = f.number("lx", c.lx);
    c.x0 = f.number("x0", c.x0);
    c.k0 = f.number("k0", c.k0);
    c.sigma = f.number("sigma", c.sigma);
    c.nx = positive_int(f, "nx", c.nx);
    c.nt = positive_int(f, "nt", c.nt);
    c.dt = f.number("dt", c.dt);
    const std::string obs = f.string("observable", "modulus");
    using Obs = Schrodinger1DConfig::Observable;
    if (obs == "modulus") {
      c.observable = Obs::Modulus;
    } else if (obs == "real_part") {
      c.observable = Obs::RealPart;
    } else if (obs == "stacked_re_im") {
      c.observable = Obs::StackedReIm;
    } else {
      config_error("generator.observable", "expected modulus, real_part or stacked_re_im");
    }
    f.finish();
    return c;
  }
  if (name == "advdiff") {
    AdvDiff1DConfig c;
    c.diffusion = f.number("diffusion", c.diffusion);
    c.length = f.number("length", c.length);
    c.v0 = f.number("v0", c.v0);
    c.v1 = f.number("v1", c.v1);
    c.nx = positive_int(f, "nx", c.nx);
    c.nt = positive_int(f, "nt", c.nt);
    c.dt = f.number("dt", c.dt);
    f.finish();
    return c;
  }
  if (name == "lorenz") {
    LorenzConfig c;
    c.sigma = f.number("sigma", c.sigma);
    c.rho = f.number("rho", c.rho);
    c.beta = f.number("beta", c.beta);
    c.dt = f.number("dt", c.dt);
    c.n_steps = f.integer("n_steps", c.n_steps);
    if (c.n_steps < 2) config_error("generator.n_steps", "must be at least 2");
    c.substeps = static_cast<int>(f.integer("substeps", c.substeps));
    if (c.substeps < 1) config_error("generator.substeps", "must be at least 1");
    if (f.has("init")) {
      const Json& init = f.raw("init");
      if (!init.is_array() || init.size() != 3 ||
          !std::all_of(init.begin(), init.end(), [](const Json& v) { return v.is_number(); })) {
        config_error("generator.init", "expected an array of 3 numbers");
      }
      c.init = Eigen::Vector3d(init[0].get<double>(), init[1].get<double>(), init[2].get<double>());
    }
    f.finish();
    return c;
  }
  if (name == "msd5") {
    Msd5Config c;
    c.m = f.number("m", c.m);
    c.c = f.number("c", c.c);
    c.k = f.number("k", c.k);
    c.gamma = f.number("gamma", c.gamma);
    c.beta = f.number("beta", c.beta);
    c.dt = f.number("dt", c.dt);
    c.t_end = f.number("t_end", c.t_end);
    c.impulse = f.number("impulse", c.impulse);
    c.seed = seed;
    f.finish();
    return c;
  }
  if (name == "cylinder") {
    CylinderSource c;
    c.path = f.string("path");
    if (f.has("crop")) {
      Fields cf(f.raw("crop"), "generator.crop");
      CylinderSource::Crop crop;
      crop.grid_rows = positive_int(cf, "grid_rows", 1);
      crop.grid_cols = positive_int(cf, "grid_cols", 1);
      crop.row_begin = static_cast<int>(cf.integer("row_begin", 0));
      crop.row_count = positive_int(cf, "row_count", 1);
      crop.col_begin = static_cast<int>(cf.integer("col_begin", 0));
      crop.col_count = positive_int(cf, "col_count", 1);
      cf.finish();
      c.crop = crop;
    }
    f.finish();
    return c;
  }
  if (name == "csv") {
    CsvSource c;
    c.clean = f.string("clean");
    c.noisy = f.string("noisy", "");
    f.finish();
    return c;
  }
  config_error("generator.name", "unknown generator '" + name + "' (expected one of " + kGeneratorNames + ")");
}

StepRule parse_step(const Json& j, const std::string& path) {
  Fields f(j, path);
  const std::string rule = f.string("rule", "fixed");
  StepRule s;
  if (rule == "fixed") {
    s = StepRule::fixed(f.number("t"));
  } else if (rule == "backtracking") {
    s = StepRule::backtracking(f.number("t", 1.0), f.number("beta", 0.5));
  } else {
    config_error(path + ".rule", "expected fixed or backtracking");
  }
  f.finish();
  try {
    s.validate();
  } catch (const Error& e) {
    config_error(path, e.what());
  }
  return s;
}

Json step_to_json(const StepRule& s) {
  if (s.kind == StepRule::Kind::Fixed) return Json{{"rule", "fixed"}, {"t", s.t}};
  return Json{{"rule", "backtracking"}, {"t", s.t}, {"beta", s.beta}};
}

ConstraintSpec parse_constraint(Fields& f) {
  ConstraintSpec spec;
  try {
    spec.kind = parse_constraint_kind(f.string("constraint", "unconstrained"));
  } catch (const Error& e) {
    config_error(f.field("constraint"), e.what());
  }
  spec.lambda = f.number("lambda", 0.0);
  try {
    spec.validate();
  } catch (const Error& e) {
    config_error(f.field("lambda"), e.what());
  }
  return spec;
}

MethodConfig parse_method(const Json& j) {
  Fields f(j, "method");
  const std::string name = f.string("name");
  MethodConfig m;
  if (name == "exact_dmd") {
    m.kind = MethodConfig::Kind::ExactDmd;
    m.rank = positive_int(f, "r", 1);
    f.require("r");
  } else if (name == "standard_dmd") {
    m.kind = MethodConfig::Kind::StandardDmd;
  } else if (name == "ridge") {
    m.kind = MethodConfig::Kind::Ridge;
    m.lambda = f.number("lambda");
    if (!(m.lambda >= 0.0)) config_error("method.lambda", "must be nonnegative");
  } else if (name == "batch_pidmd") {
    m.kind = MethodConfig::Kind::BatchPidmd;
    m.constraint = parse_constraint(f);
    if (f.has("step")) {
      const Json& s = f.raw("step");
      if (s.is_string() && s.get<std::string>() == "auto") {
        m.auto_step = true;
      } else {
        m.auto_step = false;
        m.step = parse_step(s, "method.step");
      }
    }
    m.batch.max_iters = positive_int(f, "max_iters", m.batch.max_iters);
    m.batch.rel_tol = f.number("rel_tol", m.batch.rel_tol);
    if (!(m.batch.rel_tol >= 0.0)) config_error("method.rel_tol", "must be nonnegative");
  } else if (name == "opidmd") {
    m.kind = MethodConfig::Kind::Opidmd;
    m.constraint = parse_constraint(f);
    f.require("step");
    m.step = parse_step(f.raw("step"), "method.step");
    m.auto_step = false;
    m.epochs = positive_int(f, "epochs", 1);
  } else if (name == "online_dmd") {
    m.kind = MethodConfig::Kind::OnlineDmd;
    m.rho = f.number("rho", m.rho);
    m.alpha = f.number("alpha", m.alpha);
    if (!(m.rho > 0.0 && m.rho <= 1.0)) config_error("method.rho", "must lie in (0, 1]");
    if (!(m.alpha > 0.0)) config_error("method.alpha", "must be positive");
  } else {
    config_error("method.name", "unknown method '" + name +
                                    "' (expected exact_dmd, standard_dmd, ridge, batch_pidmd, opidmd or online_dmd)");
  }
  f.finish();
  return m;
}

bool same_constraint(const ConstraintSpec& a, const ConstraintSpec& b) {
  return a.kind == b.kind && a.lambda == b.lambda;
}

bool same_step(const StepRule& a, const StepRule& b) {
  return a.kind == b.kind && a.t == b.t && a.beta == b.beta;
}

double percentile(const std::vector<double>& sorted, double q) {
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

Json score_to_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
  if (std::isnan(*v)) return "nan";
  return *v;
}

std::optional<double> tail_mean_loss(const std::vector<TraceEntry>& trace) {
  if (trace.empty()) return std::nullopt;
  const std::size_t count = std::max<std::size_t>(1, trace.size() / 10);
  double sum = 0.0;
  for (std::size_t i = trace.size() - count; i < trace.size(); ++i) sum += trace[i].loss;
  return sum / static_cast<double>(count);
}

std::string row_constraint(const MethodConfig& m) {
  using K = MethodConfig::Kind;
  if (m.kind == K::Opidmd || m.kind == K::BatchPidmd) return std::string(constraint_id(m.constraint.kind));
  return m.kind == K::Ridge ? "l2" : "none";
}

bool operator_blew_up(const Matrix& a) {
  return !a.allFinite() || a.cwiseAbs().maxCoeff() > kDivergenceBound;
}

}  // namespace

bool MethodConfig::operator==(const MethodConfig& o) const {
  return kind == o.kind && rank == o.rank && lambda == o.lambda && same_constraint(constraint, o.constraint) &&
         same_step(step, o.step) && auto_step == o.auto_step && epochs == o.epochs &&
         batch.max_iters == o.batch.max_iters && batch.rel_tol == o.batch.rel_tol && rho == o.rho &&
         alpha == o.alpha;
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return name == o.name && generator == o.generator && noise_ratio == o.noise_ratio && noise_seed == o.noise_seed &&
         split.m_train == o.split.m_train && split.m_test == o.split.m_test && split.bridge == o.split.bridge &&
         method == o.method && eval == o.eval && output == o.output && seed == o.seed;
}

std::string_view method_id(MethodConfig::Kind kind) {
  using K = MethodConfig::Kind;
  switch (kind) {
    case K::ExactDmd: return "exact_dmd";
    case K::StandardDmd: return "standard_dmd";
    case K::Ridge: return "ridge";
    case K::BatchPidmd: return "batch_pidmd";
    case K::Opidmd: return "opidmd";
    case K::OnlineDmd: return "online_dmd";
  }
  return "unknown";
}

ExperimentConfig parse_experiment(const Json& j) {
  Fields f(j, "");
  ExperimentConfig cfg;
  cfg.name = f.string("name", "");
  cfg.seed = f.unsigned_integer("seed", 0);

  f.require("generator");
  cfg.generator = f.raw("generator");
  parse_generator(cfg.generator, cfg.seed);

  if (f.has("noise")) {
    Fields nf(f.raw("noise"), "noise");
    cfg.noise_ratio = nf.number("ratio", cfg.noise_ratio);
    if (!(cfg.noise_ratio >= 0.0)) config_error("noise.ratio", "must be nonnegative");
    if (nf.has("seed")) cfg.noise_seed = nf.unsigned_integer("seed", 0);
    nf.finish();
  }

  f.require("split");
  {
    Fields sf(f.raw("split"), "split");
    const long long m_train = sf.integer("m_train");
    const long long m_test = sf.integer("m_test", 0);
    if (m_train < 2) config_error("split.m_train", "must be at least 2");
    if (m_test < 0) config_error("split.m_test", "must be nonnegative");
    cfg.split.m_train = m_train;
    cfg.split.m_test = m_test;
    cfg.split.bridge = sf.boolean("bridge", true);
    sf.finish();
  }

  f.require("method");
  cfg.method = parse_method(f.raw("method"));

  if (f.has("eval")) {
    Fields ef(f.raw("eval"), "eval");
    if (ef.has("r_used")) cfg.eval.r_used = positive_int(ef, "r_used", 1);
    if (ef.has("horizon")) cfg.eval.horizon = positive_int(ef, "horizon", 1);
    cfg.eval.per_channel = ef.boolean("per_channel", false);
    ef.finish();
  }
  if (f.has("output")) {
    Fields of(f.raw("output"), "output");
    cfg.output.dir = of.string("dir", cfg.output.dir);
    cfg.output.trace = of.boolean("trace", false);
    of.finish();
  }
  f.finish();
  return cfg;
}

Json to_json(const MethodConfig& m) {
  using K = MethodConfig::Kind;
  Json j{{"name", std::string(method_id(m.kind))}};
  switch (m.kind) {
    case K::ExactDmd:
      j["r"] = m.rank;
      break;
    case K::StandardDmd:
      break;
    case K::Ridge:
      j["lambda"] = m.lambda;
      break;
    case K::BatchPidmd:
      j["constraint"] = std::string(constraint_id(m.constraint.kind));
      j["lambda"] = m.constraint.lambda;
      j["step"] = m.auto_step ? Json("auto") : step_to_json(m.step);
      j["max_iters"] = m.batch.max_iters;
      j["rel_tol"] = m.batch.rel_tol;
      break;
    case K::Opidmd:
      j["constraint"] = std::string(constraint_id(m.constraint.kind));
      j["lambda"] = m.constraint.lambda;
      j["step"] = step_to_json(m.step);
      j["epochs"] = m.epochs;
      break;
    case K::OnlineDmd:
      j["rho"] = m.rho;
      j["alpha"] = m.alpha;
      break;
  }
  return j;
}

Json to_json(const ExperimentConfig& cfg) {
  Json j;
  if (!cfg.name.empty()) j["name"] = cfg.name;
  j["seed"] = cfg.seed;
  j["generator"] = cfg.generator;
  j["noise"] = Json{{"ratio", cfg.noise_ratio}};
  if (cfg.noise_seed) j["noise"]["seed"] = *cfg.noise_seed;
  j["split"] = Json{{"m_train", cfg.split.m_train}, {"m_test", cfg.split.m_test}, {"bridge", cfg.split.bridge}};
  j["method"] = to_json(cfg.method);
  Json eval{{"per_channel", cfg.eval.per_channel}};
  if (cfg.eval.r_used) eval["r_used"] = *cfg.eval.r_used;
  if (cfg.eval.horizon) eval["horizon"] = *cfg.eval.horizon;
  j["eval"] = eval;
  j["output"] = Json{{"dir", cfg.output.dir}, {"trace", cfg.output.trace}};
  return j;
}

Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

bool is_suite(const Json& j) { return j.is_object() && j.contains("experiments"); }

std::vector<ExperimentConfig> expand_suite(const Json& suite) {
  Fields f(suite, "");
  const std::string name = f.string("name", "");
  Json base = f.has("base") ? f.raw("base") : Json::object();
  if (!base.is_object()) config_error("base", "expected an object");
  const Json& rows = f.raw("experiments");
  f.finish();
  if (!rows.is_array() || rows.empty()) config_error("experiments", "expected a non-empty array");
  std::vector<ExperimentConfig> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_object()) config_error("experiments[" + std::to_string(i) + "]", "expected an object");
    Json merged = base;
    merged.merge_patch(rows[i]);
    if (!merged.contains("name")) {
      std::string label = name.empty() ? "" : name + "/";
      label += merged.contains("method") && merged["method"].contains("name") && merged["method"]["name"].is_string()
                   ? merged["method"]["name"].get<std::string>()
                   : std::to_string(i);
      merged["name"] = label;
    }
    try {
      out.push_back(parse_experiment(merged));
    } catch (const Error& e) {
      throw Error(e.code(), "experiments[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return out;
}

SnapshotMatrix generate_clean(const Json& generator, std::uint64_t seed) {
  const GeneratorSpec spec = parse_generator(generator, seed);
  return std::visit(
      [](const auto& c) -> SnapshotMatrix {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Advection2DConfig>) return gen_advection2d(c);
        if constexpr (std::is_same_v<T, Schrodinger1DConfig>) return gen_schrodinger1d(c);
        if constexpr (std::is_same_v<T, AdvDiff1DConfig>) return gen_advdiff1d(c);
        if constexpr (std::is_same_v<T, LorenzConfig>) return gen_lorenz(c);
        if constexpr (std::is_same_v<T, Msd5Config>) return gen_msd5(c);
        if constexpr (std::is_same_v<T, CylinderSource>) return load_cylinder(c);
        if constexpr (std::is_same_v<T, CsvSource>) return read_csv(c.clean);
      },
      spec);
}

Dataset build_dataset(const ExperimentConfig& cfg) {
  Dataset d;
  d.clean = generate_clean(cfg.generator, cfg.seed);
  const GeneratorSpec spec = parse_generator(cfg.generator, cfg.seed);
  if (const auto* csv = std::get_if<CsvSource>(&spec); csv && !csv->noisy.empty()) {
    d.noisy = read_csv(csv->noisy);
    if (d.noisy.n_state() != d.clean.n_state() || d.noisy.n_time() != d.clean.n_time()) {
      throw Error(ErrorCode::ShapeMismatch, "clean and noisy CSV files differ in shape");
    }
  } else {
    d.noisy = add_noise(d.clean, cfg.noise());
  }
  return d;
}

TimingStats timing_stats(std::vector<double> samples) {
  TimingStats s;
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  s.count = samples.size();
  double sum = 0.0;
  for (double v : samples) sum += v;
  s.mean = sum / static_cast<double>(s.count);
  s.p50 = percentile(samples, 0.50);
  s.p90 = percentile(samples, 0.90);
  s.p99 = percentile(samples, 0.99);
  s.max = samples.back();
  return s;
}

Json to_json(const RunReport& r) {
  Json j;
  j["name"] = r.name;
  j["method"] = r.method;
  j["constraint"] = r.constraint;
  j["params"] = r.params;
  j["n_state"] = r.n_state;
  j["m_train"] = r.m_train;
  j["horizon"] = r.horizon;
  j["r_used"] = r.r_used;
  j["r2"] = score_to_json(r.r2);
  j["diverged"] = r.diverged;
  j["pathological_r2"] = score_to_json(r.pathological_r2);
  j["error"] = r.error_code ? Json{{"code", *r.error_code}, {"message", r.error_message}} : Json(nullptr);
  j["iterations"] = r.iterations;
  j["tail_loss"] = score_to_json(r.tail_loss);
  j["spectral_radius"] = score_to_json(r.spectral_radius);
  j["eigs_outside_unit_circle"] = r.eigs_outside_unit_circle;
  j["timing"] = Json{{"fit_seconds", r.fit_seconds},
                     {"update",
                      {{"count", r.update.count},
                       {"mean", r.update.mean},
                       {"p50", r.update.p50},
                       {"p90", r.update.p90},
                       {"p99", r.update.p99},
                       {"max", r.update.max}}}};
  return j;
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const Dataset& data) {
  using K = MethodConfig::Kind;
  const MethodConfig& m = cfg.method;
  RunOutcome out;
  RunReport& rep = out.report;
  rep.name = cfg.name;
  rep.method = std::string(method_id(m.kind));
  rep.constraint = row_constraint(m);
  rep.params = to_json(m);

  if (cfg.split.m_test < 1) config_error("split.m_test", "evaluation needs at least one test column");
  const SplitResult parts = split(data.clean, data.noisy, cfg.split);
  const Eigen::Index n = parts.init_state.size();
  rep.n_state = n;
  rep.m_train = parts.train.length();
  rep.horizon = cfg.eval.horizon.value_or(cfg.split.m_test);
  if (rep.horizon > cfg.split.m_test) config_error("eval.horizon", "exceeds split.m_test");
  out.init_state = parts.init_state;
  out.dt = data.clean.dt();

  const bool dense = m.kind != K::ExactDmd && m.kind != K::StandardDmd;
  if (dense && n > kMaxDenseState) {
    config_error("method.name", rep.method + " needs a dense " + std::to_string(n) + "x" + std::to_string(n) +
                                    " operator; use exact_dmd for this state size");
  }

  std::vector<double> update_seconds;
  const auto start = Clock::now();
  try {
    switch (m.kind) {
      case K::ExactDmd:
        out.dmd = exact_dmd(parts.train.X(), parts.train.Y(), m.rank);
        break;
      case K::StandardDmd:
        out.dmd = standard_dmd(parts.train.X(), parts.train.Y());
        break;
      case K::Ridge:
        out.full_operator = ridge_dmd(parts.train.X(), parts.train.Y(), m.lambda).a;
        break;
      case K::BatchPidmd: {
        const Matrix x = parts.train.X();
        const StepRule rule = m.auto_step ? StepRule::fixed(batch_lipschitz_step(x)) : m.step;
        BatchFitResult res = batch_pi_dmd(x, parts.train.Y(), m.constraint, rule, m.batch);
        rep.iterations = res.iterations;
        out.full_operator = std::move(res.a);
        break;
      }
      case K::Opidmd: {
        OnlineFitOptions opts;
        opts.epochs = m.epochs;
        opts.record_trace = true;
        opts.record_timing = true;
        OnlineFitResult res = opidmd_fit(parts.train, m.constraint, m.step, opts);
        rep.iterations = static_cast<int>(res.state.k);
        out.full_operator = std::move(res.state.a);
        rep.tail_loss = tail_mean_loss(res.trace);
        if (cfg.output.trace) out.trace = std::move(res.trace);
        update_seconds = std::move(res.update_seconds);
        break;
      }
      case K::OnlineDmd: {
        RlsFitResult res = online_dmd_fit(parts.train, m.alpha, m.rho, true);
        rep.iterations = static_cast<int>(res.state.k);
        out.full_operator = std::move(res.state.a);
        update_seconds = std::move(res.update_seconds);
        break;
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Diverged && e.code() != ErrorCode::IllConditioned) throw;
    rep.diverged = true;
    rep.error_code = std::string(to_string(e.code()));
    rep.error_message = e.what();
  }
  rep.fit_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  rep.update = timing_stats(std::move(update_seconds));

  if (rep.diverged) return out;
  if (out.full_operator && operator_blew_up(*out.full_operator)) {
    rep.diverged = true;
    rep.error_message = "operator left the divergence bound";
  }

  const Matrix truth = parts.test.values().leftCols(rep.horizon);
  try {
    const ModalDecomposition md =
        out.full_operator ? decompose(*out.full_operator, cfg.eval.r_used.value_or(n), parts.init_state)
                          : decompose(*out.dmd, cfg.eval.r_used.value_or(out.dmd->r), parts.init_state);
    rep.r_used = md.r_used;
    out.prediction = predict(md, rep.horizon);
    const double score = r_squared(out.prediction, truth, cfg.eval.per_channel);
    if (!std::isfinite(score)) rep.diverged = true;
    (rep.diverged ? rep.pathological_r2 : rep.r2) = score;
    const EigenSummary eig = eigen_summary(md.eigenvalues);
    rep.spectral_radius = eig.spectral_radius;
    for (Eigen::Index i = 0; i < md.eigenvalues.size(); ++i) {
      if (std::abs(md.eigenvalues(i)) > 1.0 + 1e-9) ++rep.eigs_outside_unit_circle;
    }
  } catch (const Error& e) {
    if (!rep.diverged || e.code() != ErrorCode::EigFailure) throw;
  }
  return out;
}

void save_operator(const RunOutcome& run, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Json meta;
  meta["n_state"] = run.init_state.size();
  meta["dt"] = run.dt;
  if (run.full_operator) {
    meta["kind"] = "full";
    write_matrix_csv(*run.full_operator, dir / "operator.csv");
  } else if (run.dmd) {
    meta["kind"] = "modal";
    meta["r"] = run.dmd->r;
    write_matrix_csv(run.dmd->modes.real(), dir / "modes_re.csv");
    write_matrix_csv(run.dmd->modes.imag(), dir / "modes_im.csv");
    write_eigenvalues_csv(run.dmd->eigenvalues, dir / "eigenvalues.csv");
  } else {
    throw Error(ErrorCode::InvalidConfig, "no fitted operator to save");
  }
  if (run.full_operator) {
    const EigenSummary eig = eigen_summary(*run.full_operator);
    write_eigenvalues_csv(eig.eigenvalues, dir / "eigenvalues.csv");
  }
  write_matrix_csv(run.init_state, dir / "init_state.csv");
  std::ofstream os(dir / "operator.json");
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + (dir / "operator.json").string());
  os << meta.dump(2) << '\n';
}

namespace {

ComplexVector read_eigenvalues_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::complex<double>> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell[3];
    for (auto& c : cell) {
      if (!std::getline(ss, c, ',')) throw Error(ErrorCode::ParseError, "expected index,re,im", line_no);
    }
    try {
      values.emplace_back(std::stod(cell[1]), std::stod(cell[2]));
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "bad eigenvalue", line_no);
    }
  }
  return Eigen::Map<const ComplexVector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

ModalDecomposition load_decomposition(const std::filesystem::path& dir, const Vector& x0,
                                      std::optional<Eigen::Index> r_used) {
  const Json meta = load_json_file(dir / "operator.json");
  const std::string kind = meta.value("kind", "");
  if (kind == "full") {
    const Matrix a = read_matrix_csv(dir / "operator.csv");
    return decompose(a, r_used.value_or(a.rows()), x0);
  }
  if (kind == "modal") {
    const Matrix re = read_matrix_csv(dir / "modes_re.csv");
    const Matrix im = read_matrix_csv(dir / "modes_im.csv");
    if (re.rows() != im.rows() || re.cols() != im.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "mode files differ in shape");
    }
    ComplexMatrix modes(re.rows(), re.cols());
    modes.real() = re;
    modes.imag() = im;
    const ComplexVector eigs = read_eigenvalues_csv(dir / "eigenvalues.csv");
    return decompose_modes(eigs, modes, r_used.value_or(eigs.size()), x0);
  }
  throw Error(ErrorCode::ParseError, "operator.json: unknown kind '" + kind + "'", 1);
}

namespace {

std::string data_key(const ExperimentConfig& cfg) {
  const NoiseSpec noise = cfg.noise();
  return cfg.generator.dump() + '|' + std::to_string(cfg.seed) + '|' + std::to_string(noise.ratio) + '|' +
         std::to_string(noise.seed);
}

RunReport failed_row(const ExperimentConfig& cfg, const Error& e) {
  RunReport rep;
  rep.name = cfg.name;
  rep.method = std::string(method_id(cfg.method.kind));
  rep.constraint = row_constraint(cfg.method);
  rep.params = to_json(cfg.method);
  rep.error_code = std::string(to_string(e.code()));
  rep.error_message = e.what();
  rep.diverged = e.code() == ErrorCode::Diverged;
  return rep;
}

}  // namespace

std::vector<RunReport> run_suite(const std::vector<ExperimentConfig>& configs, const SuiteOptions& options) {
  std::map<std::string, std::shared_ptr<const Dataset>> cache;
  std::vector<std::shared_ptr<const Dataset>> data(configs.size());
  std::vector<std::optional<RunReport>> reports(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const std::string key = data_key(configs[i]);
    auto it = cache.find(key);
    if (it == cache.end()) {
      try {
        it = cache.emplace(key, std::make_shared<const Dataset>(build_dataset(configs[i]))).first;
      } catch (const Error& e) {
        reports[i] = failed_row(configs[i], e);
        continue;
      }
    }
    data[i] = it->second;
  }

  auto run_row = [&](std::size_t i) {
    if (reports[i]) return;
    try {
      reports[i] = run_experiment(configs[i], *data[i]).report;
    } catch (const Error& e) {
      reports[i] = failed_row(configs[i], e);
    }
  };

  const unsigned workers = options.parallel ? std::max(1u, std::min<unsigned>(options.threads,
                                                                           static_cast<unsigned>(configs.size())))
                                            : 1u;
  if (workers == 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) run_row(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) run_row(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<RunReport> out;
  out.reserve(configs.size());
  for (auto& r : reports) out.push_back(std::move(*r));
  return out;
}

Json strip_timing(const Json& j) {
  if (j.is_object()) {
    Json out = Json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() != "timing") out[it.key()] = strip_timing(it.value());
    }
    return out;
  }
  if (j.is_array()) {
    Json out = Json::array();
    for (const auto& v : j) out.push_back(strip_timing(v));
    return out;
  }
  return j;
}

std::string determinism_hash(const Json& j) {
  const std::string text = strip_timing(j).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace opidmd
