#pragma once

#include "opidmd/snapshots.hpp"

#include <functional>
#include <string>
#include <string_view>

namespace opidmd {

/// Physical structure or penalty imposed on the operator. Structural kinds
/// are indicator functions (their prox is a projection); L1, L2 and Nuclear
/// are penalties weighted by lambda.
struct ConstraintSpec {
  enum class Kind { Unconstrained, L1, L2, Nuclear, Symmetric, Circulant, UpperTriangular, Tridiagonal };

  Kind kind = Kind::Unconstrained;
  double lambda = 0.0;

  static ConstraintSpec unconstrained() { return {Kind::Unconstrained, 0.0}; }
  static ConstraintSpec l1(double lambda) { return {Kind::L1, lambda}; }
  static ConstraintSpec l2(double lambda) { return {Kind::L2, lambda}; }
  static ConstraintSpec nuclear(double lambda) { return {Kind::Nuclear, lambda}; }
  static ConstraintSpec symmetric() { return {Kind::Symmetric, 0.0}; }
  static ConstraintSpec circulant() { return {Kind::Circulant, 0.0}; }
  static ConstraintSpec upper_triangular() { return {Kind::UpperTriangular, 0.0}; }
  static ConstraintSpec tridiagonal() { return {Kind::Tridiagonal, 0.0}; }

  bool is_structural() const;
  bool has_lambda() const { return kind == Kind::L1 || kind == Kind::L2 || kind == Kind::Nuclear; }

  // Throws InvalidConfig for negative lambda or lambda on a structural kind.
  void validate() const;
};

// Stable lowercase identifier ("tridiagonal", "l1", ...), used in configs and reports.
std::string_view constraint_id(ConstraintSpec::Kind kind);
ConstraintSpec::Kind parse_constraint_kind(std::string_view id);

struct StepRule {
  enum class Kind { Fixed, Backtracking };

  Kind kind = Kind::Fixed;
  double t = 1e-3;     // fixed step, or t_init for backtracking
  double beta = 0.5;   // shrink factor, backtracking only

  static StepRule fixed(double t) { return {Kind::Fixed, t, 0.5}; }
  static StepRule backtracking(double t_init, double beta) { return {Kind::Backtracking, t_init, beta}; }

  void validate() const;
};

Matrix project_symmetric(const Matrix& a);
Matrix project_circulant(const Matrix& a);
Matrix project_upper_triangular(const Matrix& a);
Matrix project_tridiagonal(const Matrix& a);

Matrix prox_l1(const Matrix& a, double threshold);
Matrix prox_nuclear(const Matrix& a, double threshold);

// prox of t * R. Structural kinds project regardless of t; L1 and Nuclear
// threshold at t * lambda; L2 and Unconstrained return `a` (the L2 term lives
// in the gradient).
Matrix apply_prox(const ConstraintSpec& spec, const Matrix& a, double t);

// In-place variant used on the hot path of the online update.
void apply_prox_inplace(const ConstraintSpec& spec, Matrix& a, double t);

// Penalty value lambda * R(A) for the non-structural kinds, 0 otherwise.
// L2 uses lambda * ||A||_F^2.
double penalty(const ConstraintSpec& spec, const Matrix& a);

// Exact membership for structural kinds; always true otherwise.
bool is_member(const ConstraintSpec& spec, const Matrix& a);

// Frobenius distance from the structural manifold (0 for penalty kinds).
double constraint_violation(const ConstraintSpec& spec, const Matrix& a);

struct BacktrackResult {
  double t = 0.0;
  int shrinks = 0;
};

// Largest t = t_init * beta^j satisfying the proximal sufficient-decrease
// condition g(A - t G_t) <= g(A) - t <grad, G_t> + t/2 ||G_t||^2, where
// G_t = (A - prox_t(A - t grad)) / t. Throws StepUnderflow below 1e-300.
BacktrackResult backtrack_step(const std::function<double(const Matrix&)>& g, const Matrix& grad,
                               const Matrix& a, const StepRule& rule, const ConstraintSpec& spec);

}  // namespace opidmd
