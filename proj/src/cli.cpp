#include "opidmd/cli.hpp"

#include "opidmd/error.hpp"
#include "opidmd/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

namespace opidmd {

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct CompareArgs {
  bool parallel = false;
  std::vector<double> sweep_step;
  std::vector<double> sweep_lambda;
};

void write_json(const Json& j, const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::string config_hash(const Json& cfg) {
  Json copy = cfg;
  copy.erase("output");
  return determinism_hash(copy);
}

// Loads --config as a list of experiments, applying --seed and --out.
std::vector<ExperimentConfig> load_configs(const CommonArgs& args, std::string* suite_name, fs::path* out_dir) {
  const Json j = load_json_file(args.config);
  std::vector<ExperimentConfig> configs;
  if (is_suite(j)) {
    configs = expand_suite(j);
    *suite_name = j.value("name", "suite");
  } else {
    configs.push_back(parse_experiment(j));
    *suite_name = configs.front().name;
  }
  for (auto& c : configs) {
    if (args.seed) c.seed = *args.seed;
  }
  *out_dir = !args.out.empty() ? fs::path(args.out) : fs::path(configs.front().output.dir);
  return configs;
}

ExperimentConfig load_single(const CommonArgs& args, fs::path* out_dir, const char* command) {
  std::string name;
  auto configs = load_configs(args, &name, out_dir);
  if (configs.size() != 1) {
    throw Error(ErrorCode::InvalidConfig, std::string(command) + " takes a single experiment; use compare for suites");
  }
  return configs.front();
}

std::string format_score(const Json& v) {
  if (v.is_null()) return "-";
  if (v.is_string()) return v.get<std::string>();
  std::ostringstream os;
  const double d = v.get<double>();
  if (std::abs(d) >= 1e4) {
    os << std::scientific << std::setprecision(2) << d;
  } else {
    os << std::fixed << std::setprecision(4) << d;
  }
  return os.str();
}

void print_table(const Json& rows, std::ostream& out) {
  out << std::left << std::setw(34) << "name" << std::setw(14) << "method" << std::setw(18) << "constraint"
      << std::setw(12) << "r2" << std::setw(10) << "diverged" << std::setw(12) << "fit_s" << "update_p50_us\n";
  for (const auto& r : rows) {
    std::string score = format_score(r["r2"]);
    if (r["diverged"].get<bool>() && !r["pathological_r2"].is_null()) {
      score = "(" + format_score(r["pathological_r2"]) + ")";
    }
    if (!r["error"].is_null() && !r["diverged"].get<bool>()) score = r["error"]["code"].get<std::string>();
    std::ostringstream fit;
    fit << std::fixed << std::setprecision(3) << r["timing"]["fit_seconds"].get<double>();
    std::ostringstream p50;
    if (r["timing"]["update"]["count"].get<std::size_t>() > 0) {
      p50 << std::fixed << std::setprecision(3) << r["timing"]["update"]["p50"].get<double>() * 1e6;
    } else {
      p50 << "-";
    }
    out << std::left << std::setw(34) << r["name"].get<std::string>() << std::setw(14)
        << r["method"].get<std::string>() << std::setw(18) << r["constraint"].get<std::string>() << std::setw(12)
        << score << std::setw(10) << (r["diverged"].get<bool>() ? "yes" : "no") << std::setw(12) << fit.str()
        << p50.str() << '\n';
  }
}

int cmd_generate(const CommonArgs& args, std::ostream& out) {
  fs::path dir;
  const ExperimentConfig cfg = load_single(args, &dir, "generate");
  const Dataset data = build_dataset(cfg);
  fs::create_directories(dir);
  const std::string gen = cfg.generator.value("name", "");
  std::vector<std::string> comments{"generator " + gen};
  if (gen == "advection2d") comments.emplace_back("layout row-major, y fastest: row = i * ny + j");
  write_csv(data.clean, dir / "clean.csv", comments);
  write_csv(data.noisy, dir / "noisy.csv", comments);
  const NoiseSpec noise = cfg.noise();
  Json manifest{{"config_hash", config_hash(to_json(cfg))},
                {"seed", cfg.seed},
                {"noise", {{"ratio", noise.ratio}, {"seed", noise.seed}}},
                {"generator", cfg.generator},
                {"n_state", data.clean.n_state()},
                {"n_time", data.clean.n_time()},
                {"dt", data.clean.dt()}};
  write_json(manifest, dir / "manifest.json");
  out << "wrote " << data.clean.n_state() << "x" << data.clean.n_time() << " clean and noisy series to "
      << dir.string() << '\n';
  return kExitOk;
}

int cmd_fit(const CommonArgs& args, std::ostream& out) {
  fs::path dir;
  const ExperimentConfig cfg = load_single(args, &dir, "fit");
  const RunOutcome run = run_experiment(cfg, build_dataset(cfg));
  fs::create_directories(dir);
  if (run.full_operator || run.dmd) save_operator(run, dir);
  if (cfg.output.trace && !run.trace.empty()) write_trace_csv(run.trace, dir / "trace.csv");

  Json report = to_json(run.report);
  Json config = to_json(cfg);
  config.erase("output");
  report["config"] = config;
  report["hash"] = determinism_hash(report);
  write_json(report, dir / "report.json");
  print_table(Json::array({report}), out);
  return kExitOk;
}

int cmd_predict(const CommonArgs& args, std::ostream& out) {
  fs::path dir;
  const ExperimentConfig cfg = load_single(args, &dir, "predict");
  const Matrix init = read_matrix_csv(dir / "init_state.csv");
  if (init.cols() != 1) throw Error(ErrorCode::ShapeMismatch, "init_state.csv must hold one column");
  const Eigen::Index horizon = cfg.eval.horizon.value_or(cfg.split.m_test);
  if (horizon < 1) throw Error(ErrorCode::InvalidConfig, "field 'eval.horizon': must be positive");
  const ModalDecomposition md = load_decomposition(dir, init.col(0), cfg.eval.r_used);
  const Json meta = load_json_file(dir / "operator.json");
  const double dt = meta.value("dt", 1.0);
  write_csv(SnapshotMatrix(predict(md, horizon), dt), dir / "prediction.csv",
            {"modal prediction, r_used " + std::to_string(md.r_used)});
  out << "wrote " << horizon << "-step prediction (r_used " << md.r_used << ") to "
      << (dir / "prediction.csv").string() << '\n';
  return kExitOk;
}

std::string sweep_label(const char* key, double v) {
  std::ostringstream os;
  os << ' ' << key << '=' << v;
  return os.str();
}

std::vector<ExperimentConfig> apply_sweeps(const std::vector<ExperimentConfig>& configs, const CompareArgs& cmp) {
  using K = MethodConfig::Kind;
  std::vector<ExperimentConfig> out;
  for (const auto& c : configs) {
    const bool stepped = c.method.kind == K::Opidmd;
    const bool penalized = c.method.kind == K::Ridge ||
                           ((c.method.kind == K::Opidmd || c.method.kind == K::BatchPidmd) &&
                            c.method.constraint.has_lambda());
    std::vector<ExperimentConfig> rows{c};
    if (stepped && !cmp.sweep_step.empty()) {
      std::vector<ExperimentConfig> next;
      for (const auto& r : rows) {
        for (double t : cmp.sweep_step) {
          ExperimentConfig v = r;
          v.method.auto_step = false;
          v.method.step.t = t;
          v.method.step.validate();
          v.name += sweep_label("t", t);
          next.push_back(std::move(v));
        }
      }
      rows = std::move(next);
    }
    if (penalized && !cmp.sweep_lambda.empty()) {
      std::vector<ExperimentConfig> next;
      for (const auto& r : rows) {
        for (double l : cmp.sweep_lambda) {
          ExperimentConfig v = r;
          if (v.method.kind == K::Ridge) {
            v.method.lambda = l;
          } else {
            v.method.constraint.lambda = l;
          }
          v.method.constraint.validate();
          v.name += sweep_label("lambda", l);
          next.push_back(std::move(v));
        }
      }
      rows = std::move(next);
    }
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

unsigned thread_cap() {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("OPIDMD_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) cap = static_cast<unsigned>(v);
  }
  return cap;
}

std::string csv_cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void write_compare_csv(const Json& rows, const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << "name,method,constraint,r2,diverged,pathological_r2,error,r_used,iterations,tail_loss,spectral_radius,"
        "fit_seconds,update_count,update_mean,update_p50,update_p90,update_p99,update_max\n";
  for (const auto& r : rows) {
    const Json& t = r["timing"];
    const Json& u = t["update"];
    os << '"' << r["name"].get<std::string>() << "\"," << r["method"].get<std::string>() << ','
       << r["constraint"].get<std::string>() << ',' << csv_cell(r["r2"]) << ',' << (r["diverged"].get<bool>() ? 1 : 0)
       << ',' << csv_cell(r["pathological_r2"]) << ',' << (r["error"].is_null() ? "" : csv_cell(r["error"]["code"]))
       << ',' << r["r_used"].dump() << ',' << r["iterations"].dump() << ',' << csv_cell(r["tail_loss"]) << ','
       << csv_cell(r["spectral_radius"]) << ','
       << t["fit_seconds"].dump() << ',' << u["count"].dump() << ',' << u["mean"].dump() << ','
       << u["p50"].dump() << ',' << u["p90"].dump() << ',' << u["p99"].dump() << ',' << u["max"].dump() << '\n';
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

int cmd_compare(const CommonArgs& args, const CompareArgs& cmp, std::ostream& out) {
  std::string suite;
  fs::path dir;
  const std::vector<ExperimentConfig> configs = apply_sweeps(load_configs(args, &suite, &dir), cmp);

  SuiteOptions options;
  options.parallel = cmp.parallel;
  options.threads = thread_cap();
  const std::vector<RunReport> reports = run_suite(configs, options);

  Json rows = Json::array();
  for (const auto& r : reports) rows.push_back(to_json(r));
  Json table{{"suite", suite}, {"seed", configs.front().seed}, {"parallel", cmp.parallel}, {"rows", rows}};
  table["hash"] = determinism_hash(Json{{"suite", suite}, {"seed", configs.front().seed}, {"rows", rows}});

  fs::create_directories(dir);
  write_json(table, dir / "compare.json");
  write_compare_csv(rows, dir / "compare.csv");
  print_table(rows, out);
  out << "hash " << table["hash"].get<std::string>() << '\n';
  return kExitOk;
}

int cmd_report(const CommonArgs& args, std::ostream& out) {
  fs::path dir = args.out;
  if (dir.empty()) {
    std::string name;
    load_configs(args, &name, &dir);
  }
  if (fs::exists(dir / "compare.json")) {
    const Json table = load_json_file(dir / "compare.json");
    out << "suite " << table.value("suite", "") << '\n';
    print_table(table.at("rows"), out);
    out << "hash " << table.value("hash", "") << '\n';
    return kExitOk;
  }
  if (fs::exists(dir / "report.json")) {
    const Json report = load_json_file(dir / "report.json");
    print_table(Json::array({report}), out);
    out << "hash " << report.value("hash", "") << '\n';
    return kExitOk;
  }
  throw Error(ErrorCode::IoError, "no compare.json or report.json in " + dir.string());
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Online physics-informed DMD experiments"};
  app.require_subcommand(1);

  CommonArgs common;
  CompareArgs cmp;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", common.config, "experiment or suite JSON");
    if (config_required) opt->required();
    sub->add_option("--out", common.out, "output directory (overrides output.dir)");
    sub->add_option("--seed", common.seed, "master seed (overrides seed)");
  };
  auto* generate = app.add_subcommand("generate", "write clean and noisy snapshot CSVs");
  auto* fit = app.add_subcommand("fit", "fit one method and write the operator and report");
  auto* pred = app.add_subcommand("predict", "modal prediction from a fitted operator");
  auto* compare = app.add_subcommand("compare", "run a suite and write the comparison table");
  auto* report = app.add_subcommand("report", "print a stored report or comparison table");
  for (auto* sub : {generate, fit, pred, compare}) add_common(sub, true);
  add_common(report, false);
  compare->add_flag("--parallel", cmp.parallel, "run rows concurrently (capped by OPIDMD_THREADS)");
  compare->add_option("--sweep-step", cmp.sweep_step, "step sizes to sweep for opidmd rows")->delimiter(',');
  compare->add_option("--sweep-lambda", cmp.sweep_lambda, "lambda values to sweep for penalized methods")
      ->delimiter(',');

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  if (report->parsed() && common.config.empty() && common.out.empty()) {
    err << "report needs --config or --out\n";
    return kExitConfig;
  }

  try {
    if (generate->parsed()) return cmd_generate(common, out);
    if (fit->parsed()) return cmd_fit(common, out);
    if (pred->parsed()) return cmd_predict(common, out);
    if (compare->parsed()) return cmd_compare(common, cmp, out);
    return cmd_report(common, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.is_numerical() ? kExitNumerical : kExitConfig;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace opidmd
