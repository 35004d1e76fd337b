#pragma once

#include "opidmd/batch.hpp"
#include "opidmd/snapshots.hpp"

#include <filesystem>
#include <vector>

namespace opidmd {

/// Retained eigenpairs of a linear operator plus the amplitudes that express
/// an initial state in that basis. Modes are ordered by descending |lambda|.
struct ModalDecomposition {
  ComplexVector eigenvalues;
  ComplexMatrix eigenvectors;
  ComplexVector amplitudes;
  Eigen::Index r_used = 0;
};

// Full eigendecomposition of A, keeping r_used modes by descending |lambda|
// (ties: larger |b| first, then lower index). A conjugate pair is never split,
// so r_used may grow by one. Throws EigFailure.
ModalDecomposition decompose(const Matrix& a, Eigen::Index r_used, const Vector& x0);

// Same selection applied to precomputed eigenpairs, e.g. exact DMD modes.
ModalDecomposition decompose_modes(const ComplexVector& eigenvalues, const ComplexMatrix& modes,
                                   Eigen::Index r_used, const Vector& x0);

inline ModalDecomposition decompose(const ExactDmdResult& dmd, Eigen::Index r_used, const Vector& x0) {
  return decompose_modes(dmd.eigenvalues, dmd.modes, r_used, x0);
}

// Column k (1-based) is Re(W diag(lambda)^k b).
Matrix predict(const ModalDecomposition& md, Eigen::Index steps);

// 1 - SS_res / SS_tot with one global mean over all entries of truth, or the
// mean of per-row scores when per_channel is set (constant rows are skipped).
// Returns -inf when the prediction holds non-finite values.
double r_squared(const Matrix& pred, const Matrix& truth, bool per_channel = false);

struct EigenSummary {
  double spectral_radius = 0.0;
  ComplexVector eigenvalues;
  Vector unit_circle_distance;
};

EigenSummary eigen_summary(const Matrix& a);
EigenSummary eigen_summary(const ComplexVector& eigenvalues);

struct EvalReport {
  double r2 = 0.0;
  std::vector<double> step_errors;   // ||pred_k - truth_k||_2 per column
  EigenSummary eigen;
};

EvalReport evaluate(const ModalDecomposition& md, const Matrix& truth, bool per_channel = false);

// index,re,im,abs,unit_circle_distance
void write_eigenvalues_csv(const ComplexVector& eigenvalues, const std::filesystem::path& path);

}  // namespace opidmd
