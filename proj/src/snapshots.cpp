#include "opidmd/snapshots.hpp"

#include "opidmd/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <string_view>

namespace opidmd {

SnapshotMatrix::SnapshotMatrix(Matrix values, double dt) : dt_(dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorCode::InvalidConfig, "dt must be positive and finite");
  }
  if (!values.allFinite()) {
    throw Error(ErrorCode::InvalidConfig, "snapshot matrix contains non-finite entries");
  }
  values_ = std::make_shared<const Matrix>(std::move(values));
}

SnapshotMatrix SnapshotMatrix::slice(Eigen::Index first, Eigen::Index count) const {
  if (first < 0 || count < 0 || first + count > n_time()) {
    throw Error(ErrorCode::SplitOutOfRange, "column slice outside the series");
  }
  return SnapshotMatrix(values_->middleCols(first, count), dt_);
}

SnapshotMatrix SnapshotMatrix::append_column(const Vector& column) const {
  if (column.size() != n_state()) {
    throw Error(ErrorCode::ShapeMismatch, "appended column has wrong length");
  }
  Matrix grown(n_state(), n_time() + 1);
  grown.leftCols(n_time()) = *values_;
  grown.col(n_time()) = column;
  return SnapshotMatrix(std::move(grown), dt_);
}

SnapshotPairStream::SnapshotPairStream(std::shared_ptr<const Matrix> source, Eigen::Index first,
                                       Eigen::Index length)
    : source_(std::move(source)), first_(first), length_(length) {
  if (!source_ || first_ < 0 || length_ < 0 || first_ + length_ + 1 > source_->cols()) {
    throw Error(ErrorCode::SplitOutOfRange, "pair range outside the source series");
  }
}

SnapshotPairStream build_pairs(const SnapshotMatrix& series) {
  if (series.n_time() < 2) {
    throw Error(ErrorCode::SeriesTooShort, "need at least two columns to form a pair");
  }
  return SnapshotPairStream(series.shared_values(), 0, series.n_time() - 1);
}

SnapshotMatrix add_noise(const SnapshotMatrix& series, const NoiseSpec& spec) {
  if (!(spec.ratio >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "noise ratio must be nonnegative");
  }
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix noisy = series.values();
  double* data = noisy.data();
  const Eigen::Index count = noisy.size();
  for (Eigen::Index i = 0; i < count; ++i) {
    const double eps = normal(rng);
    const double v = data[i];
    if (spec.ratio != 0.0 && v != 0.0) {
      data[i] = v + spec.ratio * std::abs(v) * eps;
    }
  }
  return SnapshotMatrix(std::move(noisy), series.dt());
}

SplitResult split(const SnapshotMatrix& clean, const SnapshotMatrix& noisy, const SplitSpec& spec) {
  if (clean.n_state() != noisy.n_state() || clean.n_time() != noisy.n_time()) {
    throw Error(ErrorCode::ShapeMismatch, "clean and noisy series differ in shape");
  }
  if (spec.m_train < 2 || spec.m_test < 0 || spec.m_train + spec.m_test > clean.n_time()) {
    throw Error(ErrorCode::SplitOutOfRange,
                "m_train=" + std::to_string(spec.m_train) + " m_test=" +
                    std::to_string(spec.m_test) + " n_time=" + std::to_string(clean.n_time()));
  }
  SplitResult out;
  out.train = SnapshotPairStream(noisy.shared_values(), 0, spec.m_train - 1);
  const auto& init_source = spec.bridge ? clean : noisy;
  out.init_state = init_source.column(spec.m_train - 1);
  out.test = clean.slice(spec.m_train, spec.m_test);
  return out;
}

namespace {

void write_rows(std::ofstream& out, const Matrix& m) {
  char buf[64];
  std::string line;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      if (k > 0) line.push_back(',');
      auto res = std::to_chars(buf, buf + sizeof(buf), m(i, k), std::chars_format::general, 17);
      line.append(buf, res.ptr);
    }
    line.push_back('\n');
    out << line;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::ParseError, "cannot parse '" + std::string(field) + "'", line_no);
  }
  return value;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

void write_csv(const SnapshotMatrix& series, const std::filesystem::path& path,
               const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), series.dt(), std::chars_format::general, 17);
  out << "# n_state," << series.n_state() << ",n_time," << series.n_time() << ",dt,"
      << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
  for (const auto& c : comments) out << "# " << c << '\n';
  write_rows(out, series.values());
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

SnapshotMatrix read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());

  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty file", 1);
  std::string_view header = trim(line);
  if (header.empty() || header.front() != '#') {
    throw Error(ErrorCode::ParseError, "missing '# n_state,...' header", 1);
  }
  header.remove_prefix(1);
  const auto fields = split_fields(trim(header));
  if (fields.size() != 6 || trim(fields[0]) != "n_state" || trim(fields[2]) != "n_time" ||
      trim(fields[4]) != "dt") {
    throw Error(ErrorCode::ParseError, "header must read '# n_state,<int>,n_time,<int>,dt,<float>'", 1);
  }
  const auto n_state = parse_number<long long>(fields[1], 1);
  const auto n_time = parse_number<long long>(fields[3], 1);
  const auto dt = parse_number<double>(fields[5], 1);
  if (n_state <= 0 || n_time <= 0) {
    throw Error(ErrorCode::ParseError, "n_state and n_time must be positive", 1);
  }

  Matrix values(n_state, n_time);
  Eigen::Index row = 0;
  bool in_preamble = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = trim(line);
    if (in_preamble && !body.empty() && body.front() == '#') continue;
    in_preamble = false;
    if (body.empty()) continue;
    if (row >= n_state) {
      throw Error(ErrorCode::ParseError, "more rows than n_state", line_no);
    }
    const auto cells = split_fields(body);
    if (static_cast<long long>(cells.size()) != n_time) {
      throw Error(ErrorCode::ParseError,
                  "expected " + std::to_string(n_time) + " columns, found " +
                      std::to_string(cells.size()),
                  line_no);
    }
    for (Eigen::Index k = 0; k < n_time; ++k) {
      values(row, k) = parse_number<double>(cells[static_cast<std::size_t>(k)], line_no);
    }
    ++row;
  }
  if (row != n_state) {
    throw Error(ErrorCode::ParseError,
                "expected " + std::to_string(n_state) + " rows, found " + std::to_string(row),
                line_no);
  }
  if (!values.allFinite()) throw Error(ErrorCode::ParseError, "non-finite value in file", line_no);
  if (!(dt > 0.0)) throw Error(ErrorCode::ParseError, "dt must be positive", 1);
  return SnapshotMatrix(std::move(values), dt);
}

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << "# n_state," << m.rows() << ",n_time," << m.cols() << ",dt,1\n";
  write_rows(out, m);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  return read_csv(path).values();
}

}  // namespace opidmd
