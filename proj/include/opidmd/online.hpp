#pragma once

#include "opidmd/prox.hpp"
#include "opidmd/snapshots.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace opidmd {

/// Online proximal gradient state: the current operator estimate together
/// with the constraint it must satisfy and the step rule used to update it.
struct OnlineState {
  Matrix a;
  ConstraintSpec spec;
  StepRule rule;
  long long k = 0;

  // A_0 = 0, which lies on every supported manifold.
  static OnlineState zero(Eigen::Index n, ConstraintSpec spec, StepRule rule);
};

inline constexpr double kDivergenceBound = 1e12;

// Gradient of ||y - A x||^2 with respect to A: -2 (y - A x) x^T.
Matrix grad_g(const Matrix& a, const Vector& x, const Vector& y);

struct StepInfo {
  double loss = 0.0;   // ||y - A x||^2 before the update
  double t = 0.0;      // step actually taken
};

// One online proximal gradient update on the pair (x, y). A is left on the
// constraint manifold exactly. Throws Diverged if any entry of the new
// operator is non-finite or exceeds kDivergenceBound in magnitude.
void opidmd_update(OnlineState& state, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& y, StepInfo* info = nullptr);

// Value-returning form of opidmd_update.
OnlineState opidmd_step(OnlineState state, const Vector& x, const Vector& y);

struct TraceEntry {
  long long k = 0;
  double loss = 0.0;
  double step = 0.0;
  double violation = 0.0;
};

struct OnlineFitOptions {
  int epochs = 1;
  std::optional<Matrix> init;
  bool record_trace = false;
  // Per-update wall-clock samples (seconds); empty unless set.
  bool record_timing = false;
};

struct OnlineFitResult {
  OnlineState state;
  std::vector<TraceEntry> trace;
  std::vector<double> update_seconds;
};

OnlineFitResult opidmd_fit(const SnapshotPairStream& pairs, const ConstraintSpec& spec,
                           const StepRule& rule, const OnlineFitOptions& options = {});

void write_trace_csv(const std::vector<TraceEntry>& trace, const std::filesystem::path& path);

/// Recursive least-squares ("Online DMD") state. P tracks the inverse of the
/// (discounted) data covariance X X^T.
struct RlsState {
  Matrix a;
  Matrix p;
  double rho = 1.0;
  long long k = 0;

  static RlsState init(Eigen::Index n, double alpha = 1e6, double rho = 1.0);
};

// Rank-1 update. Throws IllConditioned when the gain is not finite.
void online_dmd_update(RlsState& state, const Eigen::Ref<const Vector>& x,
                       const Eigen::Ref<const Vector>& y);
RlsState online_dmd_step(RlsState state, const Vector& x, const Vector& y);

struct RlsFitResult {
  RlsState state;
  std::vector<double> update_seconds;
};

RlsFitResult online_dmd_fit(const SnapshotPairStream& pairs, double alpha, double rho,
                            bool record_timing = false);

}  // namespace opidmd
