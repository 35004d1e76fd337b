#include "opidmd/kernels.hpp"

#include <cmath>

namespace opidmd::kernels {
namespace {

void residual(const double* a, std::size_t rows, std::size_t cols, const double* x,
              const double* y, double* out) {
  for (std::size_t i = 0; i < rows; ++i) out[i] = y[i];
  for (std::size_t j = 0; j < cols; ++j) {
    const double xj = x[j];
    const double* col = a + j * rows;
    for (std::size_t i = 0; i < rows; ++i) out[i] -= col[i] * xj;
  }
}

void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* out) {
  for (std::size_t i = 0; i < rows; ++i) out[i] = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    const double xj = x[j];
    const double* col = a + j * rows;
    for (std::size_t i = 0; i < rows; ++i) out[i] += col[i] * xj;
  }
}

void scaled_rank1(double* a, std::size_t rows, std::size_t cols, double beta, double alpha,
                  const double* u, const double* v) {
  for (std::size_t j = 0; j < cols; ++j) {
    const double s = alpha * v[j];
    double* col = a + j * rows;
    if (beta == 1.0) {
      for (std::size_t i = 0; i < rows; ++i) col[i] += s * u[i];
    } else {
      for (std::size_t i = 0; i < rows; ++i) col[i] = beta * col[i] + s * u[i];
    }
  }
}

void soft_threshold(double* data, std::size_t len, double threshold) {
  for (std::size_t i = 0; i < len; ++i) {
    const double mag = std::abs(data[i]) - threshold;
    data[i] = mag > 0.0 ? std::copysign(mag, data[i]) : 0.0;
  }
}

double dot(const double* a, const double* b, std::size_t len) {
  double acc = 0.0;
  for (std::size_t i = 0; i < len; ++i) acc += a[i] * b[i];
  return acc;
}

constexpr KernelTable kScalar{"scalar", residual, matvec, scaled_rank1, soft_threshold, dot};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace opidmd::kernels
