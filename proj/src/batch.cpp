#include "opidmd/batch.hpp"

#include "opidmd/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace opidmd {

namespace {

void require_pairs(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols() || x.rows() != y.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "X and Y must have the same shape");
  }
  if (x.cols() == 0) throw Error(ErrorCode::ShapeMismatch, "no snapshot pairs");
}

Eigen::BDCSVD<Matrix> thin_svd(const Matrix& x) {
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success || !svd.singularValues().allFinite()) {
    throw Error(ErrorCode::SvdFailure, "SVD of the snapshot matrix did not converge");
  }
  return svd;
}

}  // namespace

Matrix ExactDmdResult::full_operator() const {
  const ComplexMatrix pinv = modes.completeOrthogonalDecomposition().pseudoInverse();
  return (modes * eigenvalues.asDiagonal() * pinv).real();
}

Eigen::Index numerical_rank(const Matrix& x) {
  if (x.size() == 0) return 0;
  const Vector s = Eigen::BDCSVD<Matrix>(x).singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > kRankTolerance * s(0)) ++r;
  return r;
}

ExactDmdResult exact_dmd(const Matrix& x, const Matrix& y, Eigen::Index r) {
  require_pairs(x, y);
  if (r < 1) throw Error(ErrorCode::InvalidConfig, "rank must be at least 1");
  const auto svd = thin_svd(x);
  const Vector& s = svd.singularValues();
  if (r > s.size()) {
    throw Error(ErrorCode::RankDeficient,
                "rank " + std::to_string(r) + " exceeds min(n, m) = " + std::to_string(s.size()));
  }
  if (!(s(r - 1) > kRankTolerance * s(0))) {
    throw Error(ErrorCode::RankDeficient, "singular value " + std::to_string(r) + " is below the rank cutoff");
  }

  ExactDmdResult out;
  out.r = r;
  out.basis = svd.matrixU().leftCols(r);
  const Matrix y_v_sinv = y * svd.matrixV().leftCols(r) * s.head(r).cwiseInverse().asDiagonal();
  out.a_reduced = out.basis.transpose() * y_v_sinv;

  Eigen::EigenSolver<Matrix> eig(out.a_reduced, true);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::EigFailure, "eigendecomposition of the reduced operator failed");
  }
  out.eigenvalues = eig.eigenvalues();
  out.modes = y_v_sinv.cast<std::complex<double>>() * eig.eigenvectors();
  return out;
}

ExactDmdResult standard_dmd(const Matrix& x, const Matrix& y) {
  require_pairs(x, y);
  const Eigen::Index r = numerical_rank(x);
  if (r == 0) throw Error(ErrorCode::RankDeficient, "snapshot matrix is zero");
  return exact_dmd(x, y, r);
}

RidgeSolution ridge_dmd(const Matrix& x, const Matrix& y, double lambda) {
  require_pairs(x, y);
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidConfig, "lambda must be nonnegative");
  const Eigen::Index n = x.rows();
  if (lambda == 0.0 && numerical_rank(x) < n) {
    throw Error(ErrorCode::Singular, "X X^T is singular and lambda is zero");
  }
  Matrix gram = x * x.transpose();
  gram.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::Singular, "X X^T + lambda I is not positive definite");
  }
  // A G = Y X^T with G symmetric  =>  G A^T = X Y^T
  Matrix at = llt.solve(x * y.transpose());
  if (!at.allFinite()) throw Error(ErrorCode::Singular, "ridge solve produced non-finite values");
  return RidgeSolution{at.transpose(), lambda};
}

double batch_lipschitz_step(const Matrix& x) {
  const double smax = Eigen::BDCSVD<Matrix>(x).singularValues()(0);
  if (!(smax > 0.0)) throw Error(ErrorCode::RankDeficient, "snapshot matrix is zero");
  return 1.0 / (2.0 * smax * smax);
}

BatchFitResult batch_pi_dmd(const Matrix& x, const Matrix& y, const ConstraintSpec& spec,
                            const StepRule& rule, const BatchOptions& options) {
  require_pairs(x, y);
  spec.validate();
  rule.validate();
  if (options.max_iters < 1) throw Error(ErrorCode::InvalidConfig, "iteration count must be at least 1");

  const Eigen::Index n = x.rows();
  // Work with the Gram form so each iteration costs O(n^3) instead of O(n^2 m).
  const Matrix gram = x * x.transpose();
  const Matrix cross = y * x.transpose();
  const double y_sq = y.squaredNorm();
  const bool ridge = spec.kind == ConstraintSpec::Kind::L2;

  auto smooth = [&](const Matrix& a) {
    double v = y_sq - 2.0 * a.cwiseProduct(cross).sum() + (a * gram).cwiseProduct(a).sum();
    if (ridge) v += spec.lambda * a.squaredNorm();
    return v;
  };
  auto objective = [&](const Matrix& a) {
    return smooth(a) + (ridge ? 0.0 : penalty(spec, a));
  };

  BatchFitResult out;
  out.a = Matrix::Zero(n, n);
  double f_prev = objective(out.a);
  out.objective_history.push_back(f_prev);
  Matrix grad(n, n);
  for (int it = 1; it <= options.max_iters; ++it) {
    grad.noalias() = 2.0 * (out.a * gram - cross);
    if (ridge) grad += 2.0 * spec.lambda * out.a;
    double t = rule.t;
    if (rule.kind == StepRule::Kind::Backtracking) {
      t = backtrack_step(smooth, grad, out.a, rule, spec).t;
    }
    out.a -= t * grad;
    apply_prox_inplace(spec, out.a, t);
    if (!out.a.allFinite() || out.a.cwiseAbs().maxCoeff() > 1e12) {
      throw Error(ErrorCode::Diverged, "batch proximal gradient diverged at iteration " + std::to_string(it));
    }
    const double f = objective(out.a);
    out.objective_history.push_back(f);
    out.iterations = it;
    out.objective = f;
    const double denom = std::max(std::abs(f_prev), std::numeric_limits<double>::min());
    if (std::abs(f_prev - f) / denom < options.rel_tol) break;
    f_prev = f;
  }
  return out;
}

Matrix ridge_expectation(const Matrix& a_star, const Matrix& x, double lambda) {
  if (a_star.cols() != x.rows()) throw Error(ErrorCode::ShapeMismatch, "A* and X disagree in shape");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidConfig, "lambda must be nonnegative");
  const Eigen::Index n = x.rows();
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeFullU);
  const Vector& s = svd.singularValues();
  Vector shrink = Vector::Zero(n);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double s2 = s(i) * s(i);
    if (s2 > 0.0 && s(i) > kRankTolerance * s(0)) shrink(i) = s2 / (s2 + lambda);
  }
  const Matrix& u = svd.matrixU();
  return a_star * u * shrink.asDiagonal() * u.transpose();
}

Matrix ridge_bias(const Matrix& a_star, const Matrix& x, double lambda) {
  return ridge_expectation(a_star, x, lambda) - a_star;
}

double ridge_variance_trace(const Matrix& x, double sigma, double lambda, Eigen::Index n) {
  if (!(sigma >= 0.0) || !(lambda >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "sigma and lambda must be nonnegative");
  }
  const Vector s = Eigen::BDCSVD<Matrix>(x).singularValues();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double s2 = s(i) * s(i);
    if (!(s2 > 0.0) || !(s(i) > kRankTolerance * s(0))) continue;
    sum += s2 * sigma * sigma / ((s2 + lambda) * (s2 + lambda));
  }
  return static_cast<double>(n) * sum;
}

}  // namespace opidmd
