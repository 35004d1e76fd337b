#include "opidmd/prox.hpp"

#include "opidmd/error.hpp"
#include "opidmd/kernels.hpp"

#include <cmath>
#include <string>

namespace opidmd {

namespace {

void require_square(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::NotSquare,
                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " matrix is not square");
  }
}

void symmetrize_inplace(Matrix& a) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double m = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = m;
      a(j, i) = m;
    }
  }
}

void circulant_inplace(Matrix& a) {
  const Eigen::Index n = a.rows();
  Vector c = Vector::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) sum += a(i, (i + k) % n);
    c(k) = sum / static_cast<double>(n);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = c((j - i + n) % n);
  }
}

void upper_triangular_inplace(Matrix& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = j + 1; i < a.rows(); ++i) a(i, j) = 0.0;
  }
}

void tridiagonal_inplace(Matrix& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (std::abs(i - j) > 1) a(i, j) = 0.0;
    }
  }
}

void soft_threshold_inplace(Matrix& a, double threshold) {
  kernels::active().soft_threshold(a.data(), static_cast<std::size_t>(a.size()), threshold);
}

Eigen::BDCSVD<Matrix> checked_svd(const Matrix& a) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success || !svd.singularValues().allFinite()) {
    throw Error(ErrorCode::SvdFailure, "singular value decomposition did not converge");
  }
  return svd;
}

}  // namespace

bool ConstraintSpec::is_structural() const {
  return kind == Kind::Symmetric || kind == Kind::Circulant || kind == Kind::UpperTriangular ||
         kind == Kind::Tridiagonal;
}

void ConstraintSpec::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::InvalidConfig, "lambda must be a nonnegative finite number");
  }
  if (!has_lambda() && lambda != 0.0) {
    throw Error(ErrorCode::InvalidConfig,
                std::string(constraint_id(kind)) + " constraint does not take a lambda");
  }
}

std::string_view constraint_id(ConstraintSpec::Kind kind) {
  using K = ConstraintSpec::Kind;
  switch (kind) {
    case K::Unconstrained: return "unconstrained";
    case K::L1: return "l1";
    case K::L2: return "l2";
    case K::Nuclear: return "nuclear";
    case K::Symmetric: return "symmetric";
    case K::Circulant: return "circulant";
    case K::UpperTriangular: return "upper_triangular";
    case K::Tridiagonal: return "tridiagonal";
  }
  return "unknown";
}

ConstraintSpec::Kind parse_constraint_kind(std::string_view id) {
  using K = ConstraintSpec::Kind;
  for (K k : {K::Unconstrained, K::L1, K::L2, K::Nuclear, K::Symmetric, K::Circulant,
              K::UpperTriangular, K::Tridiagonal}) {
    if (constraint_id(k) == id) return k;
  }
  if (id == "ogd") return K::Unconstrained;
  throw Error(ErrorCode::InvalidConfig, "unknown constraint '" + std::string(id) + "'");
}

void StepRule::validate() const {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw Error(ErrorCode::InvalidConfig, "step size must be positive");
  }
  if (kind == Kind::Backtracking && !(beta > 0.0 && beta < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "backtracking beta must lie in (0, 1)");
  }
}

Matrix project_symmetric(const Matrix& a) {
  require_square(a);
  Matrix s = a;
  symmetrize_inplace(s);
  return s;
}

Matrix project_circulant(const Matrix& a) {
  require_square(a);
  Matrix c = a;
  circulant_inplace(c);
  return c;
}

Matrix project_upper_triangular(const Matrix& a) {
  require_square(a);
  Matrix u = a;
  upper_triangular_inplace(u);
  return u;
}

Matrix project_tridiagonal(const Matrix& a) {
  require_square(a);
  Matrix t = a;
  tridiagonal_inplace(t);
  return t;
}

Matrix prox_l1(const Matrix& a, double threshold) {
  if (!(threshold >= 0.0)) throw Error(ErrorCode::InvalidConfig, "threshold must be nonnegative");
  Matrix b = a;
  soft_threshold_inplace(b, threshold);
  return b;
}

Matrix prox_nuclear(const Matrix& a, double threshold) {
  if (!(threshold >= 0.0)) throw Error(ErrorCode::InvalidConfig, "threshold must be nonnegative");
  const auto svd = checked_svd(a);
  const Vector shrunk = (svd.singularValues().array() - threshold).max(0.0).matrix();
  const Eigen::Index k = shrunk.size();
  return svd.matrixU().leftCols(k) * shrunk.asDiagonal() * svd.matrixV().leftCols(k).transpose();
}

void apply_prox_inplace(const ConstraintSpec& spec, Matrix& a, double t) {
  using K = ConstraintSpec::Kind;
  switch (spec.kind) {
    case K::Unconstrained:
    case K::L2:
      return;
    case K::L1:
      soft_threshold_inplace(a, t * spec.lambda);
      return;
    case K::Nuclear:
      a = prox_nuclear(a, t * spec.lambda);
      return;
    case K::Symmetric:
      require_square(a);
      symmetrize_inplace(a);
      return;
    case K::Circulant:
      require_square(a);
      circulant_inplace(a);
      return;
    case K::UpperTriangular:
      require_square(a);
      upper_triangular_inplace(a);
      return;
    case K::Tridiagonal:
      require_square(a);
      tridiagonal_inplace(a);
      return;
  }
}

Matrix apply_prox(const ConstraintSpec& spec, const Matrix& a, double t) {
  if (!(t > 0.0)) throw Error(ErrorCode::InvalidConfig, "prox step must be positive");
  Matrix out = a;
  apply_prox_inplace(spec, out, t);
  return out;
}

double penalty(const ConstraintSpec& spec, const Matrix& a) {
  using K = ConstraintSpec::Kind;
  switch (spec.kind) {
    case K::L1: return spec.lambda * a.cwiseAbs().sum();
    case K::L2: return spec.lambda * a.squaredNorm();
    case K::Nuclear:
      if (spec.lambda == 0.0) return 0.0;
      return spec.lambda * Eigen::BDCSVD<Matrix>(a).singularValues().sum();
    default: return 0.0;
  }
}

bool is_member(const ConstraintSpec& spec, const Matrix& a) {
  using K = ConstraintSpec::Kind;
  const Eigen::Index n = a.rows();
  if (spec.is_structural() && a.rows() != a.cols()) return false;
  switch (spec.kind) {
    case K::Symmetric:
      return a == a.transpose();
    case K::Circulant:
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (a(i, j) != a((i + 1) % n, (j + 1) % n)) return false;
        }
      }
      return true;
    case K::UpperTriangular:
      for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j + 1; i < n; ++i) {
          if (a(i, j) != 0.0) return false;
        }
      }
      return true;
    case K::Tridiagonal:
      for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
          if (std::abs(i - j) > 1 && a(i, j) != 0.0) return false;
        }
      }
      return true;
    default:
      return true;
  }
}

double constraint_violation(const ConstraintSpec& spec, const Matrix& a) {
  if (!spec.is_structural()) return 0.0;
  Matrix p = a;
  apply_prox_inplace(spec, p, 1.0);
  return (a - p).norm();
}

BacktrackResult backtrack_step(const std::function<double(const Matrix&)>& g, const Matrix& grad,
                               const Matrix& a, const StepRule& rule, const ConstraintSpec& spec) {
  if (rule.kind != StepRule::Kind::Backtracking) {
    throw Error(ErrorCode::InvalidConfig, "backtrack_step needs a backtracking rule");
  }
  rule.validate();
  const double g_at_a = g(a);
  BacktrackResult out{rule.t, 0};
  Matrix candidate(a.rows(), a.cols());
  while (true) {
    const double t = out.t;
    candidate = a - t * grad;
    apply_prox_inplace(spec, candidate, t);
    // candidate == a - t * G_t(a)
    const Matrix gen_grad = (a - candidate) / t;
    const double rhs =
        g_at_a - t * grad.cwiseProduct(gen_grad).sum() + 0.5 * t * gen_grad.squaredNorm();
    const double lhs = g(candidate);
    if (lhs <= rhs) return out;
    out.t *= rule.beta;
    ++out.shrinks;
    if (out.t < 1e-300) {
      throw Error(ErrorCode::StepUnderflow, "backtracking step fell below 1e-300");
    }
  }
}

}  // namespace opidmd
