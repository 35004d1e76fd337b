#include "opidmd/spectral.hpp"

#include "opidmd/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace opidmd {

namespace {

using Complex = std::complex<double>;

struct ModeGroup {
  std::vector<Eigen::Index> members;  // one real mode or a conjugate pair
  double magnitude = 0.0;
  double amplitude = 0.0;
  Eigen::Index first = 0;
};

bool conjugates(Complex a, Complex b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - std::conj(b)) <= 1e-10 * scale;
}

ComplexVector least_squares(const ComplexMatrix& w, const Vector& x0) {
  const ComplexVector rhs = x0.cast<Complex>();
  return w.completeOrthogonalDecomposition().solve(rhs);
}

}  // namespace

ModalDecomposition decompose_modes(const ComplexVector& eigenvalues, const ComplexMatrix& modes,
                                   Eigen::Index r_used, const Vector& x0) {
  const Eigen::Index p = eigenvalues.size();
  if (modes.cols() != p) throw Error(ErrorCode::ShapeMismatch, "one mode per eigenvalue required");
  if (modes.rows() != x0.size()) throw Error(ErrorCode::ShapeMismatch, "initial state length mismatch");
  if (r_used < 1 || r_used > p) {
    throw Error(ErrorCode::InvalidConfig,
                "r_used must lie in [1, " + std::to_string(p) + "], got " + std::to_string(r_used));
  }

  const ComplexVector b_all = least_squares(modes, x0);

  std::vector<bool> taken(static_cast<std::size_t>(p), false);
  std::vector<ModeGroup> groups;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (taken[static_cast<std::size_t>(i)]) continue;
    taken[static_cast<std::size_t>(i)] = true;
    ModeGroup g;
    g.members.push_back(i);
    g.first = i;
    if (eigenvalues(i).imag() != 0.0) {
      Eigen::Index best = -1;
      double best_gap = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = i + 1; j < p; ++j) {
        if (taken[static_cast<std::size_t>(j)] || !conjugates(eigenvalues(i), eigenvalues(j))) continue;
        const double gap = std::abs(eigenvalues(i) - std::conj(eigenvalues(j)));
        if (gap < best_gap) {
          best_gap = gap;
          best = j;
        }
      }
      if (best >= 0) {
        taken[static_cast<std::size_t>(best)] = true;
        g.members.push_back(best);
      }
    }
    for (auto m : g.members) {
      g.magnitude = std::max(g.magnitude, std::abs(eigenvalues(m)));
      g.amplitude = std::max(g.amplitude, std::abs(b_all(m)));
    }
    groups.push_back(std::move(g));
  }
  std::stable_sort(groups.begin(), groups.end(), [](const ModeGroup& a, const ModeGroup& b) {
    if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
    if (a.amplitude != b.amplitude) return a.amplitude > b.amplitude;
    return a.first < b.first;
  });

  std::vector<Eigen::Index> kept;
  for (const auto& g : groups) {
    if (static_cast<Eigen::Index>(kept.size()) >= r_used) break;
    kept.insert(kept.end(), g.members.begin(), g.members.end());
  }

  ModalDecomposition md;
  md.r_used = static_cast<Eigen::Index>(kept.size());
  md.eigenvalues.resize(md.r_used);
  md.eigenvectors.resize(modes.rows(), md.r_used);
  for (Eigen::Index c = 0; c < md.r_used; ++c) {
    md.eigenvalues(c) = eigenvalues(kept[static_cast<std::size_t>(c)]);
    md.eigenvectors.col(c) = modes.col(kept[static_cast<std::size_t>(c)]);
  }
  md.amplitudes = md.r_used == p ? b_all(kept) : least_squares(md.eigenvectors, x0);
  return md;
}

ModalDecomposition decompose(const Matrix& a, Eigen::Index r_used, const Vector& x0) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::NotSquare, "operator must be square");
  if (!a.allFinite()) throw Error(ErrorCode::EigFailure, "operator holds non-finite entries");
  Eigen::EigenSolver<Matrix> eig(a, true);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::EigFailure, "eigendecomposition did not converge");
  return decompose_modes(eig.eigenvalues(), eig.eigenvectors(), r_used, x0);
}

Matrix predict(const ModalDecomposition& md, Eigen::Index steps) {
  if (steps < 1) throw Error(ErrorCode::InvalidConfig, "prediction horizon must be at least 1");
  Matrix out(md.eigenvectors.rows(), steps);
  ComplexVector coeff = md.amplitudes;
  for (Eigen::Index k = 0; k < steps; ++k) {
    coeff = md.eigenvalues.cwiseProduct(coeff);
    out.col(k) = (md.eigenvectors * coeff).real();
  }
  return out;
}

double r_squared(const Matrix& pred, const Matrix& truth, bool per_channel) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "prediction and truth differ in shape");
  }
  if (truth.size() == 0) throw Error(ErrorCode::DegenerateTruth, "empty truth matrix");
  if (!pred.allFinite()) return -std::numeric_limits<double>::infinity();

  if (!per_channel) {
    const double mean = truth.mean();
    const double ss_tot = (truth.array() - mean).square().sum();
    if (!(ss_tot > 0.0)) throw Error(ErrorCode::DegenerateTruth, "truth is constant");
    return 1.0 - (pred - truth).squaredNorm() / ss_tot;
  }
  double sum = 0.0;
  int used = 0;
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    const double mean = truth.row(i).mean();
    const double ss_tot = (truth.row(i).array() - mean).square().sum();
    if (!(ss_tot > 0.0)) continue;
    sum += 1.0 - (pred.row(i) - truth.row(i)).squaredNorm() / ss_tot;
    ++used;
  }
  if (used == 0) throw Error(ErrorCode::DegenerateTruth, "every truth channel is constant");
  return sum / used;
}

EigenSummary eigen_summary(const ComplexVector& eigenvalues) {
  EigenSummary s;
  s.eigenvalues = eigenvalues;
  s.unit_circle_distance.resize(eigenvalues.size());
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    const double mag = std::abs(eigenvalues(i));
    s.spectral_radius = std::max(s.spectral_radius, mag);
    s.unit_circle_distance(i) = std::abs(mag - 1.0);
  }
  return s;
}

EigenSummary eigen_summary(const Matrix& a) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::NotSquare, "operator must be square");
  if (!a.allFinite()) throw Error(ErrorCode::EigFailure, "operator holds non-finite entries");
  Eigen::EigenSolver<Matrix> eig(a, false);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::EigFailure, "eigenvalue computation failed");
  return eigen_summary(ComplexVector(eig.eigenvalues()));
}

EvalReport evaluate(const ModalDecomposition& md, const Matrix& truth, bool per_channel) {
  EvalReport rep;
  const Matrix pred = predict(md, truth.cols());
  rep.r2 = r_squared(pred, truth, per_channel);
  rep.step_errors.resize(static_cast<std::size_t>(truth.cols()));
  for (Eigen::Index k = 0; k < truth.cols(); ++k) {
    rep.step_errors[static_cast<std::size_t>(k)] = (pred.col(k) - truth.col(k)).norm();
  }
  rep.eigen = eigen_summary(md.eigenvalues);
  return rep;
}

void write_eigenvalues_csv(const ComplexVector& eigenvalues, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  out.precision(17);
  out << "index,re,im,abs,unit_circle_distance\n";
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    const double mag = std::abs(eigenvalues(i));
    out << i << ',' << eigenvalues(i).real() << ',' << eigenvalues(i).imag() << ',' << mag << ','
        << std::abs(mag - 1.0) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace opidmd
