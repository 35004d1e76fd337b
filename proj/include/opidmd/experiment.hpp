#pragma once

#include "opidmd/batch.hpp"
#include "opidmd/online.hpp"
#include "opidmd/prox.hpp"
#include "opidmd/snapshots.hpp"
#include "opidmd/spectral.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace opidmd {

using Json = nlohmann::json;

struct MethodConfig {
  enum class Kind { ExactDmd, StandardDmd, Ridge, BatchPidmd, Opidmd, OnlineDmd };

  Kind kind = Kind::StandardDmd;
  Eigen::Index rank = 0;                  // exact_dmd
  double lambda = 0.0;                    // ridge
  ConstraintSpec constraint;              // batch_pidmd, opidmd
  StepRule step;                          // opidmd; batch_pidmd unless auto_step
  bool auto_step = true;                  // batch_pidmd: t = 1 / L
  int epochs = 1;                         // opidmd
  BatchOptions batch;                     // batch_pidmd
  double rho = 1.0;                       // online_dmd forgetting factor
  double alpha = 1e6;                     // online_dmd, P_0 = alpha I

  bool operator==(const MethodConfig&) const;
};

std::string_view method_id(MethodConfig::Kind kind);

struct EvalConfig {
  std::optional<Eigen::Index> r_used;     // default: every mode
  std::optional<Eigen::Index> horizon;    // default: m_test
  bool per_channel = false;

  bool operator==(const EvalConfig&) const = default;
};

struct OutputConfig {
  std::string dir = "out";
  bool trace = false;

  bool operator==(const OutputConfig&) const = default;
};

/// One run: data source, noise, split, method and evaluation. The generator
/// section is kept as JSON ({"name": ..., parameters...}) and validated
/// strictly on parse.
struct ExperimentConfig {
  std::string name;
  Json generator;
  double noise_ratio = 0.25;
  std::optional<std::uint64_t> noise_seed;  // defaults to seed
  SplitSpec split;
  MethodConfig method;
  EvalConfig eval;
  OutputConfig output;
  std::uint64_t seed = 0;

  NoiseSpec noise() const { return {noise_ratio, noise_seed.value_or(seed)}; }
  bool operator==(const ExperimentConfig&) const;
};

// Strict parsing: unknown keys and wrong types raise InvalidConfig naming the
// offending field.
ExperimentConfig parse_experiment(const Json& j);
Json to_json(const ExperimentConfig& cfg);
Json to_json(const MethodConfig& m);

Json load_json_file(const std::filesystem::path& path);

// A suite is {"name", "base", "experiments": [patch...]}; each experiment is
// base merge-patched with its entry.
bool is_suite(const Json& j);
std::vector<ExperimentConfig> expand_suite(const Json& suite);

// Clean series from the generator section; `seed` drives any seeded excitation.
SnapshotMatrix generate_clean(const Json& generator, std::uint64_t seed);

struct Dataset {
  SnapshotMatrix clean;
  SnapshotMatrix noisy;
};

Dataset build_dataset(const ExperimentConfig& cfg);

struct TimingStats {
  std::size_t count = 0;
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

TimingStats timing_stats(std::vector<double> samples);

struct RunReport {
  std::string name;
  std::string method;
  std::string constraint;
  Json params;
  std::optional<double> r2;
  bool diverged = false;
  // Score of a diverged run when one could be computed (may be -inf).
  std::optional<double> pathological_r2;
  std::optional<std::string> error_code;
  std::string error_message;
  Eigen::Index n_state = 0;
  Eigen::Index m_train = 0;
  Eigen::Index r_used = 0;
  Eigen::Index horizon = 0;
  int iterations = 0;
  // Mean pre-update loss ||y - A x||^2 over the last 10% of online updates.
  std::optional<double> tail_loss;
  std::optional<double> spectral_radius;
  Eigen::Index eigs_outside_unit_circle = 0;
  double fit_seconds = 0.0;
  TimingStats update;
};

// Timing lives under "timing" so it can be stripped before hashing.
Json to_json(const RunReport& r);

struct RunOutcome {
  RunReport report;
  // Fitted operator in one of two forms.
  std::optional<Matrix> full_operator;
  std::optional<ExactDmdResult> dmd;
  Vector init_state;
  double dt = 1.0;
  Matrix prediction;
  std::vector<TraceEntry> trace;
};

// Fits, predicts and scores one configuration. Divergence is recorded in the
// report; every other error propagates.
RunOutcome run_experiment(const ExperimentConfig& cfg, const Dataset& data);

// Persisted operator: operator.json plus operator.csv (full) or
// modes_re.csv / modes_im.csv / eigenvalues.csv (modal).
void save_operator(const RunOutcome& run, const std::filesystem::path& dir);
ModalDecomposition load_decomposition(const std::filesystem::path& dir, const Vector& x0,
                                      std::optional<Eigen::Index> r_used);

struct SuiteOptions {
  bool parallel = false;
  unsigned threads = 1;
};

// Runs every configuration, sharing generated data between rows with the
// same data section. Failures are recorded in the row rather than thrown.
std::vector<RunReport> run_suite(const std::vector<ExperimentConfig>& configs, const SuiteOptions& options = {});

// Copy of `j` with every "timing" member removed, recursively.
Json strip_timing(const Json& j);
// FNV-1a (64 bit) of strip_timing(j).dump(), as 16 hex digits.
std::string determinism_hash(const Json& j);

}  // namespace opidmd
