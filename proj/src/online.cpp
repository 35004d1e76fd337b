#include "opidmd/online.hpp"

#include "opidmd/error.hpp"
#include "opidmd/kernels.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

namespace opidmd {

namespace {

void check_divergence(const Matrix& a, long long k) {
  const double* data = a.data();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (!(std::abs(data[i]) <= kDivergenceBound)) {
      throw Error(ErrorCode::Diverged, "operator entry left [-1e12, 1e12] at update " + std::to_string(k));
    }
  }
}

void check_pair(Eigen::Index n, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  if (x.size() != n || y.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "pair length does not match operator size " + std::to_string(n));
  }
}

using Clock = std::chrono::steady_clock;

}  // namespace

OnlineState OnlineState::zero(Eigen::Index n, ConstraintSpec spec, StepRule rule) {
  spec.validate();
  rule.validate();
  return OnlineState{Matrix::Zero(n, n), spec, rule, 0};
}

Matrix grad_g(const Matrix& a, const Vector& x, const Vector& y) {
  if (a.cols() != x.size() || a.rows() != y.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient operands disagree in shape");
  }
  return -2.0 * (y - a * x) * x.transpose();
}

void opidmd_update(OnlineState& state, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& y, StepInfo* info) {
  Matrix& a = state.a;
  const Eigen::Index n = a.rows();
  check_pair(n, x, y);
  const auto& kt = kernels::active();
  const auto un = static_cast<std::size_t>(n);

  Vector r(n);
  kt.residual(a.data(), un, un, x.data(), y.data(), r.data());
  const double loss = kt.dot(r.data(), r.data(), un);
  const bool ridge = state.spec.kind == ConstraintSpec::Kind::L2;
  const double lambda = state.spec.lambda;

  double t = state.rule.t;
  if (state.rule.kind == StepRule::Kind::Fixed) {
    // A - t * grad with grad = -2 r x^T (+ 2 lambda A for the ridge penalty)
    const double beta = ridge ? 1.0 - 2.0 * t * lambda : 1.0;
    kt.scaled_rank1(a.data(), un, un, beta, 2.0 * t, r.data(), x.data());
  } else {
    Matrix grad = -2.0 * r * x.transpose();
    if (ridge) grad += 2.0 * lambda * a;
    const Vector xv = x;
    const Vector yv = y;
    auto g = [&](const Matrix& b) {
      const double res = (yv - b * xv).squaredNorm();
      return ridge ? res + lambda * b.squaredNorm() : res;
    };
    t = backtrack_step(g, grad, a, state.rule, state.spec).t;
    a -= t * grad;
  }
  apply_prox_inplace(state.spec, a, t);
  ++state.k;
  if (info != nullptr) *info = StepInfo{loss, t};
  check_divergence(a, state.k);
}

OnlineState opidmd_step(OnlineState state, const Vector& x, const Vector& y) {
  opidmd_update(state, x, y);
  return state;
}

OnlineFitResult opidmd_fit(const SnapshotPairStream& pairs, const ConstraintSpec& spec,
                           const StepRule& rule, const OnlineFitOptions& options) {
  if (options.epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be at least 1");
  const Eigen::Index n = pairs.n_state();
  OnlineFitResult out{OnlineState::zero(n, spec, rule), {}, {}};
  if (options.init) {
    if (options.init->rows() != n || options.init->cols() != n) {
      throw Error(ErrorCode::ShapeMismatch, "initial operator has the wrong shape");
    }
    out.state.a = *options.init;
  }
  const auto total = static_cast<std::size_t>(pairs.length()) * static_cast<std::size_t>(options.epochs);
  if (options.record_trace) out.trace.reserve(total);
  if (options.record_timing) out.update_seconds.reserve(total);

  StepInfo info;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (Eigen::Index k = 0; k < pairs.length(); ++k) {
      const auto start = options.record_timing ? Clock::now() : Clock::time_point{};
      opidmd_update(out.state, pairs.x(k), pairs.y(k), &info);
      if (options.record_timing) {
        out.update_seconds.push_back(std::chrono::duration<double>(Clock::now() - start).count());
      }
      if (options.record_trace) {
        out.trace.push_back({out.state.k, info.loss, info.t, constraint_violation(spec, out.state.a)});
      }
    }
  }
  return out;
}

void write_trace_csv(const std::vector<TraceEntry>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  out.precision(17);
  out << "k,loss,step,constraint_violation\n";
  for (const auto& e : trace) out << e.k << ',' << e.loss << ',' << e.step << ',' << e.violation << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

RlsState RlsState::init(Eigen::Index n, double alpha, double rho) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidConfig, "RLS alpha must be positive");
  if (!(rho > 0.0 && rho <= 1.0)) throw Error(ErrorCode::InvalidConfig, "forgetting factor must lie in (0, 1]");
  return RlsState{Matrix::Zero(n, n), alpha * Matrix::Identity(n, n), rho, 0};
}

void online_dmd_update(RlsState& state, const Eigen::Ref<const Vector>& x,
                       const Eigen::Ref<const Vector>& y) {
  const Eigen::Index n = state.a.rows();
  check_pair(n, x, y);
  const auto& kt = kernels::active();
  const auto un = static_cast<std::size_t>(n);

  Vector px(n);
  kt.matvec(state.p.data(), un, un, x.data(), px.data());
  const double gamma = 1.0 / (state.rho + kt.dot(x.data(), px.data(), un));
  if (!std::isfinite(gamma)) {
    throw Error(ErrorCode::IllConditioned, "RLS gain is not finite at update " + std::to_string(state.k));
  }
  Vector r(n);
  kt.residual(state.a.data(), un, un, x.data(), y.data(), r.data());
  kt.scaled_rank1(state.a.data(), un, un, 1.0, gamma, r.data(), px.data());
  kt.scaled_rank1(state.p.data(), un, un, 1.0 / state.rho, -gamma / state.rho, px.data(), px.data());
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double m = 0.5 * (state.p(i, j) + state.p(j, i));
      state.p(i, j) = m;
      state.p(j, i) = m;
    }
  }
  ++state.k;
}

RlsState online_dmd_step(RlsState state, const Vector& x, const Vector& y) {
  online_dmd_update(state, x, y);
  return state;
}

RlsFitResult online_dmd_fit(const SnapshotPairStream& pairs, double alpha, double rho,
                            bool record_timing) {
  RlsFitResult out{RlsState::init(pairs.n_state(), alpha, rho), {}};
  if (record_timing) out.update_seconds.reserve(static_cast<std::size_t>(pairs.length()));
  for (Eigen::Index k = 0; k < pairs.length(); ++k) {
    const auto start = record_timing ? Clock::now() : Clock::time_point{};
    online_dmd_update(out.state, pairs.x(k), pairs.y(k));
    if (record_timing) {
      out.update_seconds.push_back(std::chrono::duration<double>(Clock::now() - start).count());
    }
  }
  return out;
}

}  // namespace opidmd
