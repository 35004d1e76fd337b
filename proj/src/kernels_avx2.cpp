// Compiled with -mavx2 -mfma; only reached through avx2_table() after a CPU check.
#include "opidmd/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace opidmd::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

// out[i] += s * col[i] for i < rows
inline void axpy(double* out, const double* col, double s, std::size_t rows) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= rows; i += 4) {
    __m256d o = _mm256_loadu_pd(out + i);
    o = _mm256_fmadd_pd(vs, _mm256_loadu_pd(col + i), o);
    _mm256_storeu_pd(out + i, o);
  }
  for (; i < rows; ++i) out[i] = std::fma(s, col[i], out[i]);
}

void residual(const double* a, std::size_t rows, std::size_t cols, const double* x,
              const double* y, double* out) {
  for (std::size_t i = 0; i < rows; ++i) out[i] = y[i];
  for (std::size_t j = 0; j < cols; ++j) axpy(out, a + j * rows, -x[j], rows);
}

void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* out) {
  for (std::size_t i = 0; i < rows; ++i) out[i] = 0.0;
  for (std::size_t j = 0; j < cols; ++j) axpy(out, a + j * rows, x[j], rows);
}

void scaled_rank1(double* a, std::size_t rows, std::size_t cols, double beta, double alpha,
                  const double* u, const double* v) {
  const __m256d vb = _mm256_set1_pd(beta);
  for (std::size_t j = 0; j < cols; ++j) {
    const double s = alpha * v[j];
    double* col = a + j * rows;
    if (beta == 1.0) {
      axpy(col, u, s, rows);
      continue;
    }
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= rows; i += 4) {
      __m256d c = _mm256_mul_pd(vb, _mm256_loadu_pd(col + i));
      c = _mm256_fmadd_pd(vs, _mm256_loadu_pd(u + i), c);
      _mm256_storeu_pd(col + i, c);
    }
    for (; i < rows; ++i) col[i] = std::fma(s, u[i], beta * col[i]);
  }
}

void soft_threshold(double* data, std::size_t len, double threshold) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  const __m256d thr = _mm256_set1_pd(threshold);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4) {
    const __m256d v = _mm256_loadu_pd(data + i);
    const __m256d sign = _mm256_and_pd(v, sign_mask);
    const __m256d mag = _mm256_sub_pd(_mm256_andnot_pd(sign_mask, v), thr);
    const __m256d keep = _mm256_cmp_pd(mag, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(data + i, _mm256_and_pd(_mm256_or_pd(mag, sign), keep));
  }
  for (; i < len; ++i) {
    const double mag = std::abs(data[i]) - threshold;
    data[i] = mag > 0.0 ? std::copysign(mag, data[i]) : 0.0;
  }
}

double dot(const double* a, const double* b, std::size_t len) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= len; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < len; ++i) acc = std::fma(a[i], b[i], acc);
  return acc;
}

}  // namespace

extern const KernelTable kAvx2Table;
const KernelTable kAvx2Table{"avx2", residual, matvec, scaled_rank1, soft_threshold, dot};

}  // namespace opidmd::kernels
