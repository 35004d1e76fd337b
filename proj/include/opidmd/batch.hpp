#pragma once

#include "opidmd/prox.hpp"
#include "opidmd/snapshots.hpp"

#include <complex>

namespace opidmd {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

// Relative singular value cutoff used for every rank decision.
inline constexpr double kRankTolerance = 1e-12;

/// Rank-r exact DMD. `basis` holds the leading left singular vectors of X, so
/// the rank-r operator is basis * a_reduced * basis^T in state coordinates.
struct ExactDmdResult {
  Matrix a_reduced;
  Matrix basis;
  ComplexMatrix modes;        // exact DMD modes Y V S^-1 W
  ComplexVector eigenvalues;
  Eigen::Index r = 0;

  // modes * diag(eigenvalues) * pinv(modes); only for moderate n.
  Matrix full_operator() const;
};

// Numerical rank of X under the kRankTolerance cutoff.
Eigen::Index numerical_rank(const Matrix& x);

// Throws RankDeficient when sigma_r <= 1e-12 sigma_1.
ExactDmdResult exact_dmd(const Matrix& x, const Matrix& y, Eigen::Index r);

// Exact DMD at the numerical rank of X (no low-rank truncation).
ExactDmdResult standard_dmd(const Matrix& x, const Matrix& y);

struct RidgeSolution {
  Matrix a;
  double lambda = 0.0;
};

// A = Y X^T (X X^T + lambda I)^-1 through a Cholesky factorization.
// Throws Singular when the regularized Gram matrix is not positive definite.
RidgeSolution ridge_dmd(const Matrix& x, const Matrix& y, double lambda);

struct BatchOptions {
  int max_iters = 10000;
  double rel_tol = 1e-10;
};

struct BatchFitResult {
  Matrix a;
  int iterations = 0;
  double objective = 0.0;
  std::vector<double> objective_history;
};

// Full-batch proximal gradient on ||Y - A X||_F^2 + lambda R(A), starting at
// A = 0. Stops after max_iters or when the relative objective change drops
// below rel_tol.
BatchFitResult batch_pi_dmd(const Matrix& x, const Matrix& y, const ConstraintSpec& spec,
                            const StepRule& rule, const BatchOptions& options = {});

// 1 / L for the full-batch loss, L = 2 sigma_max(X)^2.
double batch_lipschitz_step(const Matrix& x);

// E[A] of the ridge estimator when Y = A* X + noise: A* U diag(s^2/(s^2+lambda)) U^T.
Matrix ridge_expectation(const Matrix& a_star, const Matrix& x, double lambda);

// E[A] - A*.
Matrix ridge_bias(const Matrix& a_star, const Matrix& x, double lambda);

// tr Var(A) = n * sum_i s_i^2 sigma^2 / (s_i^2 + lambda)^2 over the singular values of X.
double ridge_variance_trace(const Matrix& x, double sigma, double lambda, Eigen::Index n);

}  // namespace opidmd
