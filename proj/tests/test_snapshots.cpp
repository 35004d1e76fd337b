#include "helpers.hpp"

#include "opidmd/error.hpp"
#include "opidmd/snapshots.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace opidmd;

namespace {

SnapshotMatrix ramp(Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = 1.0 + static_cast<double>(i * cols + j);
  }
  return SnapshotMatrix(m, 0.1);
}

void expect_code(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    FAIL("expected " << to_string(code));
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

}  // namespace

TEST_CASE("snapshot matrix validates its contents") {
  Matrix bad = Matrix::Ones(2, 3);
  bad(1, 2) = std::nan("");
  expect_code(ErrorCode::InvalidConfig, [&] { SnapshotMatrix(bad, 1.0); });
  expect_code(ErrorCode::InvalidConfig, [] { SnapshotMatrix(Matrix::Ones(2, 2), 0.0); });

  const SnapshotMatrix s = ramp(4, 6);
  CHECK(s.n_state() == 4);
  CHECK(s.n_time() == 6);
  CHECK(s.dt() == doctest::Approx(0.1));
}

TEST_CASE("build_pairs uses the time-shift pairing") {
  const SnapshotMatrix s = ramp(2, 3);
  const SnapshotPairStream p = build_pairs(s);
  REQUIRE(p.length() == 2);
  CHECK(Matrix(p.X()) == s.values().leftCols(2));
  CHECK(Matrix(p.Y()) == s.values().rightCols(2));
  for (Eigen::Index k = 0; k < p.length(); ++k) {
    CHECK(Vector(p.x(k)) == Vector(s.column(k)));
    CHECK(Vector(p.y(k)) == Vector(s.column(k + 1)));
  }

  CHECK(build_pairs(ramp(3, 2)).length() == 1);
  expect_code(ErrorCode::SeriesTooShort, [] { build_pairs(ramp(3, 1)); });

  const SnapshotMatrix lorenz_sized(Matrix::Zero(3, 150000), 0.01);
  CHECK(build_pairs(lorenz_sized).length() == 149999);
}

TEST_CASE("appending a column extends the pair stream by one pair") {
  std::mt19937_64 rng(3);
  const SnapshotMatrix s(test::random_matrix(4, 9, rng), 1.0);
  const Vector extra = test::random_vector(4, rng);
  const SnapshotMatrix grown = s.append_column(extra);
  const auto before = build_pairs(s);
  const auto after = build_pairs(grown);
  REQUIRE(after.length() == before.length() + 1);
  CHECK(Matrix(after.X().leftCols(before.length())) == Matrix(before.X()));
  CHECK(Vector(after.x(before.length())) == Vector(s.column(s.n_time() - 1)));
  CHECK(Vector(after.y(before.length())) == extra);
}

TEST_CASE("add_noise with zero ratio is an exact copy") {
  std::mt19937_64 rng(5);
  const SnapshotMatrix s(test::random_matrix(6, 20, rng), 1.0);
  const SnapshotMatrix n = add_noise(s, {0.0, 99});
  CHECK(n.values() == s.values());
}

TEST_CASE("add_noise leaves zero entries at zero and does not touch the input") {
  Matrix m = Matrix::Zero(5, 40);
  m.row(2).setConstant(3.0);
  const SnapshotMatrix s(m, 1.0);
  for (std::uint64_t seed : {1ULL, 2ULL, 12345ULL}) {
    const SnapshotMatrix n = add_noise(s, {0.25, seed});
    for (Eigen::Index i = 0; i < 5; ++i) {
      if (i == 2) continue;
      CHECK(n.values().row(i).isZero(0.0));
    }
    CHECK(n.values().row(2) != m.row(2));
  }
  CHECK(s.values() == m);
}

TEST_CASE("add_noise is reproducible per seed") {
  std::mt19937_64 rng(8);
  const SnapshotMatrix s(test::random_matrix(3, 50, rng), 1.0);
  const SnapshotMatrix a = add_noise(s, {0.25, 42});
  const SnapshotMatrix b = add_noise(s, {0.25, 42});
  const SnapshotMatrix c = add_noise(s, {0.25, 43});
  CHECK(a.values() == b.values());
  CHECK(a.values() != c.values());
}

TEST_CASE("add_noise relative deviation has the requested spread") {
  // 10^6 nonzero entries of varying sign and magnitude
  Matrix m(1000, 1000);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = std::sin(0.37 * static_cast<double>(i + 1) * (j + 1)) + 1.5;
  }
  const SnapshotMatrix s(m, 1.0);
  const SnapshotMatrix n = add_noise(s, {0.25, 2024});
  const Eigen::ArrayXXd rel = (n.values() - m).array() / m.array().abs();
  const double mean = rel.mean();
  const double sd = std::sqrt((rel - mean).square().sum() / static_cast<double>(rel.size() - 1));
  CHECK(std::abs(mean) < 1e-3);
  CHECK(sd == doctest::Approx(0.25).epsilon(0.01));
  CHECK(std::abs(sd - 0.25) <= 0.003);
}

TEST_CASE("split follows the bridge convention") {
  const SnapshotMatrix clean = ramp(3, 20);
  const SnapshotMatrix noisy = add_noise(clean, {0.25, 1});
  const SplitResult r = split(clean, noisy, {15, 5, true});
  CHECK(r.train.length() == 14);
  CHECK(Matrix(r.train.X()) == noisy.values().leftCols(14));
  CHECK(Matrix(r.train.Y()) == noisy.values().middleCols(1, 14));
  CHECK(r.init_state == Vector(clean.column(14)));
  CHECK(r.test.values() == clean.values().middleCols(15, 5));

  const SplitResult nb = split(clean, noisy, {15, 5, false});
  CHECK(nb.init_state == Vector(noisy.column(14)));

  const SplitResult empty = split(clean, noisy, {20, 0, true});
  CHECK(empty.test.n_time() == 0);
  CHECK(empty.init_state.size() == 3);
}

TEST_CASE("split sizes for the advection setup") {
  const SnapshotMatrix clean(Matrix::Ones(4, 5001), 2e-4);
  const SplitResult r = split(clean, clean, {4850, 150, true});
  CHECK(r.test.n_time() == 150);
  CHECK(r.train.length() == 4849);
}

TEST_CASE("split rejects bad shapes and ranges") {
  const SnapshotMatrix a = ramp(3, 10);
  expect_code(ErrorCode::ShapeMismatch, [&] { split(a, ramp(3, 11), {5, 2, true}); });
  expect_code(ErrorCode::SplitOutOfRange, [&] { split(a, a, {8, 3, true}); });
  expect_code(ErrorCode::SplitOutOfRange, [&] { split(a, a, {1, 3, true}); });
}

TEST_CASE("csv round trip is exact") {
  std::mt19937_64 rng(11);
  Matrix m = test::random_matrix(5, 7, rng, 1e3);
  m(0, 0) = 1e-300;
  m(1, 1) = -0.0;
  m(2, 2) = 123456789.123456789;
  const SnapshotMatrix s(m, 0.0123);
  const auto dir = test::scratch_dir("csv");
  write_csv(s, dir / "m.csv", {"a comment"});
  const SnapshotMatrix back = read_csv(dir / "m.csv");
  CHECK(back.n_state() == 5);
  CHECK(back.n_time() == 7);
  CHECK(back.dt() == s.dt());
  CHECK(back.values() == m);

  write_matrix_csv(m, dir / "plain.csv");
  CHECK(read_matrix_csv(dir / "plain.csv") == m);
}

TEST_CASE("csv errors carry the offending line") {
  const auto dir = test::scratch_dir("csv_err");
  {
    std::ofstream out(dir / "bad.csv");
    out << "# n_state,3,n_time,3,dt,1\n1,2,3\n4,5\n7,8,9\n";
  }
  try {
    read_csv(dir / "bad.csv");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    REQUIRE(e.line().has_value());
    CHECK(*e.line() == 3);
  }
  {
    std::ofstream out(dir / "nan.csv");
    out << "# n_state,2,n_time,2,dt,1\n1,2\n3,x\n";
  }
  try {
    read_csv(dir / "nan.csv");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(*e.line() == 3);
  }
  {
    std::ofstream out(dir / "rows.csv");
    out << "# n_state,3,n_time,2,dt,1\n1,2\n3,4\n";
  }
  expect_code(ErrorCode::ParseError, [&] { read_csv(dir / "rows.csv"); });
  expect_code(ErrorCode::IoError, [&] { read_csv(dir / "missing.csv"); });
}
