#include "helpers.hpp"

#include "opidmd/cli.hpp"
#include "opidmd/error.hpp"
#include "opidmd/experiment.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace opidmd;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "opidmd");
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path write_config(const fs::path& dir, const std::string& name, const Json& j) {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Short Lorenz run, quick enough for every CLI path.
Json small_lorenz(const fs::path& out) {
  return Json{{"name", "lorenz_small"},
              {"seed", 7},
              {"generator", {{"name", "lorenz"}, {"dt", 0.01}, {"n_steps", 2000}}},
              {"noise", {{"ratio", 0.25}}},
              {"split", {{"m_train", 1850}, {"m_test", 150}, {"bridge", true}}},
              {"method", {{"name", "opidmd"}, {"constraint", "tridiagonal"}, {"step", {{"rule", "fixed"}, {"t", 1e-6}}}}},
              {"output", {{"dir", out.string()}}}};
}

Json small_lorenz_suite(const fs::path& out) {
  Json base = small_lorenz(out);
  base.erase("name");
  base.erase("method");
  return Json{{"name", "lorenz_small"},
              {"base", base},
              {"experiments",
               Json::array({Json{{"method", {{"name", "exact_dmd"}, {"r", 3}}}},
                            Json{{"method", {{"name", "online_dmd"}, {"rho", 1.0}}}},
                            Json{{"method", {{"name", "batch_pidmd"}, {"constraint", "tridiagonal"}, {"step", "auto"}}}},
                            Json{{"method",
                                  {{"name", "opidmd"},
                                   {"constraint", "tridiagonal"},
                                   {"step", {{"rule", "fixed"}, {"t", 1e-6}}}}}}})}};
}

}  // namespace

TEST_CASE("every shipped preset survives a config round trip") {
  for (const char* name : {"advection2d", "lorenz", "schrodinger", "advdiff", "msd5", "cylinder"}) {
    const Json suite = load_json_file(fs::path(OPIDMD_PRESET_DIR) / (std::string(name) + ".json"));
    REQUIRE(is_suite(suite));
    const auto configs = expand_suite(suite);
    CHECK(!configs.empty());
    for (const auto& cfg : configs) {
      INFO(name << " / " << cfg.name);
      CHECK(parse_experiment(to_json(cfg)) == cfg);
      CHECK(cfg.seed == 7);
    }
  }
}

TEST_CASE("config parsing is strict") {
  const auto dir = test::scratch_dir("cli_strict");
  Json j = small_lorenz(dir);
  j["bogus"] = 1;
  try {
    parse_experiment(j);
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
    INFO(std::string(e.what()));
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }

  j = small_lorenz(dir);
  j["method"]["step"]["t"] = "big";
  CHECK_THROWS_AS(parse_experiment(j), Error);

  j = small_lorenz(dir);
  j["generator"]["name"] = "navier_stokes";
  const CliResult r = run({"generate", "--config", write_config(dir, "bad.json", j).string()});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("generator.name") != std::string::npos);
}

TEST_CASE("usage errors") {
  CHECK(run({"--help"}).code == kExitOk);
  CHECK(run({"fit", "--help"}).code == kExitOk);
  CHECK(run({"fit"}).code == kExitConfig);
  CHECK(run({}).code == kExitConfig);
  CHECK(run({"frobnicate"}).code == kExitConfig);
  CHECK(run({"fit", "--config", "/nonexistent/config.json"}).code == kExitConfig);
  CHECK(run({"report"}).code == kExitConfig);

  const auto dir = test::scratch_dir("cli_empty");
  const Json empty{{"name", "nothing"}, {"base", small_lorenz(dir)}, {"experiments", Json::array()}};
  const CliResult r = run({"compare", "--config", write_config(dir, "empty.json", empty).string()});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("experiments") != std::string::npos);
}

TEST_CASE("generate with zero noise writes identical series and a manifest") {
  const auto dir = test::scratch_dir("cli_generate");
  Json j = small_lorenz(dir);
  j["noise"]["ratio"] = 0.0;
  const CliResult r = run({"generate", "--config", write_config(dir, "gen.json", j).string()});
  REQUIRE(r.code == kExitOk);
  CHECK(slurp(dir / "clean.csv") == slurp(dir / "noisy.csv"));
  const SnapshotMatrix clean = read_csv(dir / "clean.csv");
  CHECK(clean.n_state() == 3);
  CHECK(clean.n_time() == 2000);
  const Json manifest = load_json_file(dir / "manifest.json");
  CHECK(manifest["seed"] == 7);
  CHECK(manifest["n_time"] == 2000);
  CHECK(manifest.contains("config_hash"));

  // --seed and --out override the file
  const auto other = test::scratch_dir("cli_generate_seed");
  j["noise"]["ratio"] = 0.25;
  const fs::path cfg = write_config(dir, "gen_noisy.json", j);
  REQUIRE(run({"generate", "--config", cfg.string(), "--out", other.string(), "--seed", "11"}).code == kExitOk);
  CHECK(load_json_file(other / "manifest.json")["seed"] == 11);
  CHECK(slurp(other / "clean.csv") != slurp(other / "noisy.csv"));
}

TEST_CASE("fit writes the operator and a report naming the constraint") {
  const auto dir = test::scratch_dir("cli_fit");
  Json j = small_lorenz(dir);
  j["output"]["trace"] = true;
  const CliResult r = run({"fit", "--config", write_config(dir, "fit.json", j).string()});
  REQUIRE(r.code == kExitOk);
  const Json report = load_json_file(dir / "report.json");
  CHECK(report["constraint"] == "tridiagonal");
  CHECK(report["method"] == "opidmd");
  CHECK(report["m_train"] == 1849);
  CHECK(report.contains("hash"));
  CHECK(report["timing"]["update"]["count"] == 1849);
  CHECK(fs::exists(dir / "operator.csv"));
  CHECK(fs::exists(dir / "eigenvalues.csv"));
  CHECK(fs::exists(dir / "trace.csv"));
  const Matrix a = read_matrix_csv(dir / "operator.csv");
  CHECK(is_member(ConstraintSpec::tridiagonal(), a));
  CHECK(r.out.find("tridiagonal") != std::string::npos);

  const CliResult rep = run({"report", "--out", dir.string()});
  CHECK(rep.code == kExitOk);
  CHECK(rep.out.find(report["hash"].get<std::string>()) != std::string::npos);
}

TEST_CASE("ridge without regularization on rank-deficient data exits with a numerical error") {
  const auto dir = test::scratch_dir("cli_singular");
  Matrix m(3, 60);
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    const double v = std::cos(0.1 * k);
    m.col(k) << v, 2.0 * v, -v;
  }
  write_csv(SnapshotMatrix(m, 0.1), dir / "rank1.csv");
  const Json j{{"name", "singular"},
               {"generator", {{"name", "csv"}, {"clean", (dir / "rank1.csv").string()}}},
               {"noise", {{"ratio", 0.0}}},
               {"split", {{"m_train", 50}, {"m_test", 10}}},
               {"method", {{"name", "ridge"}, {"lambda", 0.0}}},
               {"output", {{"dir", dir.string()}}}};
  const CliResult r = run({"fit", "--config", write_config(dir, "ridge.json", j).string()});
  CHECK(r.code == kExitNumerical);
  CHECK(r.err.find("Singular") != std::string::npos);
}

TEST_CASE("predict is a thin wrapper around the modal predictor") {
  const auto dir = test::scratch_dir("cli_predict");
  const fs::path cfg = write_config(dir, "fit.json", small_lorenz(dir));
  REQUIRE(run({"fit", "--config", cfg.string()}).code == kExitOk);
  REQUIRE(run({"predict", "--config", cfg.string()}).code == kExitOk);

  const SnapshotMatrix pred = read_csv(dir / "prediction.csv");
  CHECK(pred.n_time() == 150);
  CHECK(pred.dt() == doctest::Approx(0.01));
  const Matrix a = read_matrix_csv(dir / "operator.csv");
  const Vector x0 = read_matrix_csv(dir / "init_state.csv").col(0);
  CHECK(pred.values() == predict(decompose(a, 3, x0), 150));

  // Modal operators from exact DMD take the same path.
  Json j = small_lorenz(dir);
  j["method"] = Json{{"name", "exact_dmd"}, {"r", 2}};
  j["eval"] = Json{{"horizon", 40}};
  const fs::path modal_cfg = write_config(dir, "modal.json", j);
  REQUIRE(run({"fit", "--config", modal_cfg.string()}).code == kExitOk);
  REQUIRE(run({"predict", "--config", modal_cfg.string()}).code == kExitOk);
  CHECK(read_csv(dir / "prediction.csv").n_time() == 40);
}

TEST_CASE("predict with the identity operator is constant") {
  const auto dir = test::scratch_dir("cli_identity");
  write_matrix_csv(Matrix::Identity(4, 4), dir / "operator.csv");
  Matrix x0(4, 1);
  x0 << 1.0, -2.0, 0.5, 3.0;
  write_matrix_csv(x0, dir / "init_state.csv");
  std::ofstream(dir / "operator.json") << Json{{"n_state", 4}, {"dt", 0.5}, {"kind", "full"}, {"r", 4}}.dump();
  Json j = small_lorenz(dir);
  j["eval"] = Json{{"horizon", 25}};
  REQUIRE(run({"predict", "--config", write_config(dir, "id.json", j).string()}).code == kExitOk);
  const SnapshotMatrix pred = read_csv(dir / "prediction.csv");
  CHECK(pred.n_time() == 25);
  for (Eigen::Index k = 0; k < 25; ++k) CHECK((pred.values().col(k) - x0.col(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("compare runs a suite deterministically") {
  const auto dir = test::scratch_dir("cli_compare");
  const fs::path cfg = write_config(dir, "suite.json", small_lorenz_suite(dir / "a"));
  const CliResult first = run({"compare", "--config", cfg.string()});
  REQUIRE(first.code == kExitOk);
  const Json table = load_json_file(dir / "a" / "compare.json");
  REQUIRE(table["rows"].size() == 4);
  CHECK(table["rows"][0]["method"] == "exact_dmd");
  CHECK(table["rows"][3]["constraint"] == "tridiagonal");
  CHECK(fs::exists(dir / "a" / "compare.csv"));
  const std::string hash = table["hash"];
  CHECK(hash.size() == 16);
  CHECK(first.out.find("hash " + hash) != std::string::npos);

  const CliResult again = run({"compare", "--config", cfg.string(), "--out", (dir / "b").string()});
  REQUIRE(again.code == kExitOk);
  CHECK(load_json_file(dir / "b" / "compare.json")["hash"] == hash);

  setenv("OPIDMD_THREADS", "3", 1);
  const CliResult parallel = run({"compare", "--config", cfg.string(), "--out", (dir / "c").string(), "--parallel"});
  unsetenv("OPIDMD_THREADS");
  REQUIRE(parallel.code == kExitOk);
  CHECK(load_json_file(dir / "c" / "compare.json")["hash"] == hash);

  const CliResult other_seed = run({"compare", "--config", cfg.string(), "--out", (dir / "d").string(), "--seed", "8"});
  REQUIRE(other_seed.code == kExitOk);
  CHECK(load_json_file(dir / "d" / "compare.json")["hash"] != hash);
}

TEST_CASE("compare sweeps expand opidmd rows") {
  const auto dir = test::scratch_dir("cli_sweep");
  const fs::path cfg = write_config(dir, "suite.json", small_lorenz_suite(dir));
  REQUIRE(run({"compare", "--config", cfg.string(), "--sweep-step", "1e-7,1e-6,1e-5"}).code == kExitOk);
  const Json table = load_json_file(dir / "compare.json");
  CHECK(table["rows"].size() == 6);
  for (const auto& row : table["rows"]) {
    if (row["method"] == "opidmd") CHECK(row["tail_loss"].is_number());
  }
}

TEST_CASE("diverging rows stay in the table with the flag set") {
  const auto dir = test::scratch_dir("cli_diverge");
  Json suite = small_lorenz_suite(dir);
  suite["experiments"] = Json::array(
      {Json{{"method", {{"name", "online_dmd"}, {"rho", 0.5}}}},
       Json{{"method", {{"name", "opidmd"}, {"constraint", "unconstrained"}, {"step", {{"rule", "fixed"}, {"t", 1.0}}}}}}});
  REQUIRE(run({"compare", "--config", write_config(dir, "suite.json", suite).string()}).code == kExitOk);
  const Json rows = load_json_file(dir / "compare.json")["rows"];
  REQUIRE(rows.size() == 2);
  const Json& blown = rows[1];
  CHECK(blown["diverged"] == true);
  CHECK(blown["r2"].is_null());
  CHECK(blown["error"]["code"] == "Diverged");
  const Json& forgetful = rows[0];
  const bool drastic = forgetful["diverged"].get<bool>() ||
                       (forgetful["r2"].is_number() && forgetful["r2"].get<double>() < -1e3);
  INFO(forgetful.dump());
  CHECK(drastic);
}

TEST_CASE("exact DMD rank is recorded for a cropped field") {
  const auto dir = test::scratch_dir("cli_cylinder");
  // Travelling waves on a 20 x 30 grid, cropped to 10 x 12 = 120 states.
  const int rows = 20;
  const int cols = 30;
  Matrix field(rows * cols, 151);
  for (Eigen::Index k = 0; k < field.cols(); ++k) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        double v = 0.0;
        for (int m = 1; m <= 30; ++m) v += std::sin(0.07 * m * k + 0.3 * m * r + 0.11 * m * m * c) / m;
        field(r * cols + c, k) = v;
      }
    }
  }
  write_csv(SnapshotMatrix(field, 0.2), dir / "field.csv");
  const Json j{{"name", "cyl"},
               {"seed", 7},
               {"generator",
                {{"name", "cylinder"},
                 {"path", (dir / "field.csv").string()},
                 {"crop",
                  {{"grid_rows", rows}, {"grid_cols", cols}, {"row_begin", 5}, {"row_count", 10},
                   {"col_begin", 3}, {"col_count", 12}}}}},
               {"noise", {{"ratio", 0.0}}},
               {"split", {{"m_train", 140}, {"m_test", 11}}},
               {"method", {{"name", "exact_dmd"}, {"r", 50}}},
               {"output", {{"dir", dir.string()}}}};
  REQUIRE(run({"fit", "--config", write_config(dir, "cyl.json", j).string()}).code == kExitOk);
  const Json report = load_json_file(dir / "report.json");
  CHECK(report["r_used"] == 50);
  CHECK(report["n_state"] == 120);
  CHECK(load_json_file(dir / "operator.json")["kind"] == "modal");
}
