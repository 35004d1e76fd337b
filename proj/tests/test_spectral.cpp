#include "helpers.hpp"

#include "opidmd/error.hpp"
#include "opidmd/spectral.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

using namespace opidmd;

namespace {

using Complex = std::complex<double>;

// Columns A x0, A^2 x0, ..., A^steps x0.
Matrix powers(const Matrix& a, const Vector& x0, Eigen::Index steps) {
  Matrix out(a.rows(), steps);
  Vector v = x0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    v = a * v;
    out.col(k) = v;
  }
  return out;
}

double max_rel(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("full-rank prediction reproduces powers of the operator") {
  std::mt19937_64 rng(301);
  SUBCASE("diagonal") {
    Vector d(4);
    d << 0.9, -0.5, 0.3, 0.99;
    const Matrix a = d.asDiagonal();
    const Vector x0 = test::random_vector(4, rng);
    CHECK(max_rel(predict(decompose(a, 4, x0), 50), powers(a, x0, 50)) < 1e-12);
  }
  SUBCASE("rotation") {
    const double th = 0.3;
    Matrix a(2, 2);
    a << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    const Vector x0 = Vector::Unit(2, 0);
    const Matrix pred = predict(decompose(a, 2, x0), 100);
    for (Eigen::Index k = 0; k < 100; ++k) {
      CHECK(pred(0, k) == doctest::Approx(std::cos(th * (k + 1))).epsilon(1e-10));
      CHECK(pred(1, k) == doctest::Approx(std::sin(th * (k + 1))).epsilon(1e-10));
    }
  }
  SUBCASE("companion") {
    // x_{k+1} = 1.2 x_k - 0.5 x_{k-1} + 0.1 x_{k-2}
    Matrix a(3, 3);
    a << 1.2, -0.5, 0.1, 1, 0, 0, 0, 1, 0;
    const Vector x0 = test::random_vector(3, rng);
    CHECK(max_rel(predict(decompose(a, 3, x0), 60), powers(a, x0, 60)) < 1e-9);
  }
  SUBCASE("random") {
    Matrix a = test::random_matrix(10, 10, rng);
    a /= 1.1 * Eigen::EigenSolver<Matrix>(a).eigenvalues().cwiseAbs().maxCoeff();
    const Vector x0 = test::random_vector(10, rng);
    CHECK(max_rel(predict(decompose(a, 10, x0), 40), powers(a, x0, 40)) < 1e-9);
  }
}

TEST_CASE("the identity operator predicts a constant state") {
  std::mt19937_64 rng(303);
  const Vector x0 = test::random_vector(5, rng);
  const Matrix pred = predict(decompose(Matrix::Identity(5, 5), 5, x0), 150);
  for (Eigen::Index k = 0; k < 150; ++k) CHECK((pred.col(k) - x0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("modes are ordered by magnitude and conjugate pairs stay together") {
  Matrix a = Matrix::Zero(4, 4);
  a(0, 0) = 0.5;
  a.block<2, 2>(1, 1) << 0.6, -0.6, 0.6, 0.6;   // |lambda| = 0.849
  a(3, 3) = -0.95;
  const Vector x0 = Vector::Ones(4);

  const ModalDecomposition all = decompose(a, 4, x0);
  for (Eigen::Index i = 1; i < 4; ++i) CHECK(std::abs(all.eigenvalues(i - 1)) >= std::abs(all.eigenvalues(i)));
  CHECK(all.eigenvalues(0).real() == doctest::Approx(-0.95));

  const ModalDecomposition two = decompose(a, 2, x0);
  CHECK(two.r_used == 3);
  CHECK(std::abs(two.eigenvalues(1) - std::conj(two.eigenvalues(2))) < 1e-12);

  const ModalDecomposition one = decompose(a, 1, x0);
  CHECK(one.r_used == 1);

  // A truncated real prediction stays real: imaginary parts cancel across each pair.
  const Matrix pred = predict(two, 20);
  Matrix trunc = a;
  trunc(0, 0) = 0.0;
  CHECK(max_rel(pred, powers(trunc, x0, 20)) < 1e-10);
}

TEST_CASE("decompose argument checks") {
  CHECK_THROWS_AS(decompose(Matrix::Identity(3, 3), 0, Vector::Ones(3)), Error);
  CHECK_THROWS_AS(decompose(Matrix::Identity(3, 3), 4, Vector::Ones(3)), Error);
  CHECK_THROWS_AS(decompose(Matrix::Identity(3, 3), 3, Vector::Ones(2)), Error);
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 1) = std::numeric_limits<double>::infinity();
  try {
    decompose(bad, 2, Vector::Ones(2));
    FAIL("expected EigFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EigFailure);
  }
  CHECK_THROWS_AS(predict(decompose(Matrix::Identity(2, 2), 2, Vector::Ones(2)), 0), Error);
}

TEST_CASE("exact DMD modes feed the modal predictor") {
  std::mt19937_64 rng(307);
  Matrix a = test::random_matrix(6, 6, rng);
  a /= 1.2 * Eigen::EigenSolver<Matrix>(a).eigenvalues().cwiseAbs().maxCoeff();
  const Matrix x = test::random_matrix(6, 50, rng);
  const ExactDmdResult dmd = exact_dmd(x, a * x, 6);
  const Vector x0 = test::random_vector(6, rng);
  CHECK(max_rel(predict(decompose(dmd, 6, x0), 30), powers(a, x0, 30)) < 1e-8);
}

TEST_CASE("r squared conventions") {
  Matrix truth(2, 3);
  truth << 1, 2, 3, 4, 5, 6;
  CHECK(r_squared(truth, truth) == 1.0);

  const Matrix mean_pred = Matrix::Constant(2, 3, truth.mean());
  CHECK(r_squared(mean_pred, truth) == doctest::Approx(0.0));

  Matrix off = truth;
  off(0, 0) += 1.0;
  const double ss_tot = (truth.array() - 3.5).square().sum();
  CHECK(r_squared(off, truth) == doctest::Approx(1.0 - 1.0 / ss_tot));

  // per channel: row means 2 and 5, each row SS_tot = 2
  CHECK(r_squared(off, truth, true) == doctest::Approx(0.5 * ((1.0 - 0.5) + 1.0)));

  Matrix with_constant = truth;
  with_constant.row(1).setConstant(7.0);
  Matrix pred = with_constant;
  pred(1, 0) = 100.0;
  CHECK(r_squared(pred, with_constant, true) == 1.0);

  Matrix nan_pred = truth;
  nan_pred(1, 1) = std::nan("");
  CHECK(r_squared(nan_pred, truth) == -std::numeric_limits<double>::infinity());

  CHECK_THROWS_AS(r_squared(truth, Matrix::Constant(2, 3, 1.0)), Error);
  CHECK_THROWS_AS(r_squared(truth, Matrix::Constant(2, 3, 1.0), true), Error);
  CHECK_THROWS_AS(r_squared(truth.leftCols(2), truth), Error);
}

TEST_CASE("eigen summary and csv") {
  Vector d(3);
  d << 1.05, -0.5, 1.0;
  const EigenSummary s = eigen_summary(Matrix(d.asDiagonal()));
  CHECK(s.spectral_radius == doctest::Approx(1.05));
  CHECK(s.unit_circle_distance.minCoeff() == doctest::Approx(0.0));

  const ModalDecomposition md = decompose(Matrix(d.asDiagonal()), 3, Vector::Ones(3));
  Matrix truth = predict(md, 10);
  const EvalReport rep = evaluate(md, truth);
  CHECK(rep.r2 == 1.0);
  CHECK(rep.step_errors.size() == 10);

  const auto dir = test::scratch_dir("eigs");
  write_eigenvalues_csv(s.eigenvalues, dir / "eigs.csv");
  std::ifstream in(dir / "eigs.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "index,re,im,abs,unit_circle_distance");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("spectral worked examples") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 0.5;
  d(1, 1) = 0.1;
  const ModalDecomposition md = decompose(d, 2, Vector::Ones(2));
  CHECK(md.eigenvalues(0).real() == doctest::Approx(0.5));
  CHECK(md.eigenvalues(1).real() == doctest::Approx(0.1));
  for (Eigen::Index i = 0; i < 2; ++i) {
    const Complex wb = md.eigenvectors.col(i).sum() * md.amplitudes(i);
    CHECK(std::abs(std::abs(wb) - 1.0) < 1e-12);
  }

  const Matrix geo = predict(decompose(Matrix::Constant(1, 1, 0.5), 1, Vector::Ones(1)), 3);
  CHECK(geo(0, 0) == doctest::Approx(0.5));
  CHECK(geo(0, 1) == doctest::Approx(0.25));
  CHECK(geo(0, 2) == doctest::Approx(0.125));

  const EigenSummary id = eigen_summary(Matrix(Matrix::Identity(3, 3)));
  CHECK(id.spectral_radius == doctest::Approx(1.0));
  CHECK(id.unit_circle_distance.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(eigen_summary(Matrix(0.5 * Matrix::Identity(3, 3))).spectral_radius == doctest::Approx(0.5));
}

TEST_CASE("modal reconstruction of a random diagonalizable operator") {
  std::mt19937_64 rng(311);
  const Matrix a = test::random_matrix(6, 6, rng);
  const ModalDecomposition md = decompose(a, 6, test::random_vector(6, rng));
  const ComplexMatrix w = md.eigenvectors;
  const ComplexMatrix back = w * md.eigenvalues.asDiagonal() * w.completeOrthogonalDecomposition().pseudoInverse();
  CHECK((back.real() - a).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(back.imag().cwiseAbs().maxCoeff() < 1e-8);

  const Vector x0 = test::random_vector(6, rng);
  CHECK(max_rel(predict(decompose(a, 6, x0), 20), powers(a, x0, 20)) < 1e-6);
}

TEST_CASE("spectral radius of a companion matrix matches its polynomial roots") {
  // roots 0.9, -0.7, 0.5 +- 0.4i: (z - 0.9)(z + 0.7)(z^2 - z + 0.41)
  const std::vector<Complex> roots = {0.9, -0.7, Complex(0.5, 0.4), Complex(0.5, -0.4)};
  Eigen::VectorXcd poly = Eigen::VectorXcd::Zero(5);
  poly(0) = 1.0;
  for (const Complex& r : roots) {
    for (int i = 4; i > 0; --i) poly(i) -= r * poly(i - 1);
  }
  Matrix c = Matrix::Zero(4, 4);
  for (int j = 0; j < 4; ++j) c(0, j) = -poly(j + 1).real();
  for (int i = 1; i < 4; ++i) c(i, i - 1) = 1.0;
  CHECK(eigen_summary(c).spectral_radius == doctest::Approx(0.9).epsilon(1e-8));
}
