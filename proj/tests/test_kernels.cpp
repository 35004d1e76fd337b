#include "helpers.hpp"

#include "opidmd/kernels.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace opidmd;
namespace k = opidmd::kernels;

namespace {

constexpr double kTol = 1e-12;

double rel_err(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

const std::size_t kSizes[] = {1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 65, 200};

void check_table_against_eigen(const k::KernelTable& t) {
  std::mt19937_64 rng(17);
  for (std::size_t rows : kSizes) {
    for (std::size_t cols : {std::size_t{1}, std::size_t{3}, rows}) {
      const auto r = static_cast<Eigen::Index>(rows);
      const auto c = static_cast<Eigen::Index>(cols);
      const Matrix a = test::random_matrix(r, c, rng);
      const Vector x = test::random_vector(c, rng);
      const Vector y = test::random_vector(r, rng);

      Vector out(r);
      t.matvec(a.data(), rows, cols, x.data(), out.data());
      CHECK(rel_err(out, a * x) < kTol);

      t.residual(a.data(), rows, cols, x.data(), y.data(), out.data());
      CHECK(rel_err(out, y - a * x) < kTol);

      Matrix b = a;
      t.scaled_rank1(b.data(), rows, cols, 0.7, -1.3, y.data(), x.data());
      CHECK(rel_err(b, 0.7 * a - 1.3 * y * x.transpose()) < kTol);

      CHECK(std::abs(t.dot(y.data(), y.data(), rows) - y.squaredNorm()) < kTol * std::max(1.0, y.squaredNorm()));
    }
  }
}

}  // namespace

TEST_CASE("scalar kernels match Eigen") {
  CHECK(k::scalar_table().isa == "scalar");
  check_table_against_eigen(k::scalar_table());
}

TEST_CASE("scalar soft threshold") {
  double v[] = {3.0, -3.0, 1.0, -1.0, 0.5, 0.0, -0.0, 1.0000001};
  k::scalar_table().soft_threshold(v, 8, 1.0);
  const double want[] = {2.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0000001 - 1.0};
  for (int i = 0; i < 8; ++i) CHECK(v[i] == want[i]);
  CHECK(!std::signbit(v[2]));
  CHECK(!std::signbit(v[3]));
}

TEST_CASE("active table is one of the known variants") {
  const auto& t = k::active();
  const bool known = t.isa == "scalar" || t.isa == "avx2";
  CHECK(known);
}

TEST_CASE("avx2 kernels match the scalar reference") {
  const k::KernelTable* avx = k::avx2_table();
  if (avx == nullptr) {
    MESSAGE("AVX2 variant unavailable on this machine; skipped");
    return;
  }
  CHECK(avx->isa == "avx2");
  check_table_against_eigen(*avx);

  const auto& ref = k::scalar_table();
  std::mt19937_64 rng(23);
  for (std::size_t rows : kSizes) {
    const auto r = static_cast<Eigen::Index>(rows);
    const Matrix a = test::random_matrix(r, r, rng);
    const Vector x = test::random_vector(r, rng);
    const Vector y = test::random_vector(r, rng);
    Vector o1(r), o2(r);
    ref.residual(a.data(), rows, rows, x.data(), y.data(), o1.data());
    avx->residual(a.data(), rows, rows, x.data(), y.data(), o2.data());
    CHECK(rel_err(o1, o2) < kTol);
    ref.matvec(a.data(), rows, rows, x.data(), o1.data());
    avx->matvec(a.data(), rows, rows, x.data(), o2.data());
    CHECK(rel_err(o1, o2) < kTol);

    Matrix b1 = a, b2 = a;
    ref.scaled_rank1(b1.data(), rows, rows, 1.0 - 1e-3, 2e-3, y.data(), x.data());
    avx->scaled_rank1(b2.data(), rows, rows, 1.0 - 1e-3, 2e-3, y.data(), x.data());
    CHECK(rel_err(b1, b2) < kTol);

    const double d1 = ref.dot(x.data(), y.data(), rows);
    const double d2 = avx->dot(x.data(), y.data(), rows);
    CHECK(std::abs(d1 - d2) < kTol * std::max(1.0, x.norm() * y.norm()));
  }
}

TEST_CASE("avx2 soft threshold is bit-identical to the scalar reference") {
  const k::KernelTable* avx = k::avx2_table();
  if (avx == nullptr) return;
  std::mt19937_64 rng(29);
  for (std::size_t len : kSizes) {
    Vector v = test::random_vector(static_cast<Eigen::Index>(len), rng);
    if (len > 2) {
      v(0) = 0.5;
      v(1) = -0.5;
    }
    Vector v1 = v, v2 = v;
    k::scalar_table().soft_threshold(v1.data(), len, 0.5);
    avx->soft_threshold(v2.data(), len, 0.5);
    CHECK(std::memcmp(v1.data(), v2.data(), len * sizeof(double)) == 0);
  }
}
