#pragma once

// Inner loops of the online updates. Every kernel has a scalar reference
// implementation and, on x86-64, an AVX2+FMA variant chosen at runtime.
// Matrices are column-major with leading dimension == rows (Eigen's default).

#include <cstddef>
#include <optional>
#include <string_view>

namespace opidmd::kernels {

struct KernelTable {
  std::string_view isa;

  // out = y - A x
  void (*residual)(const double* a, std::size_t rows, std::size_t cols, const double* x,
                   const double* y, double* out);
  // out = A x
  void (*matvec)(const double* a, std::size_t rows, std::size_t cols, const double* x,
                 double* out);
  // A = beta * A + alpha * u v^T
  void (*scaled_rank1)(double* a, std::size_t rows, std::size_t cols, double beta, double alpha,
                       const double* u, const double* v);
  // element-wise sign(a) * max(|a| - threshold, 0); |a| == threshold maps to +0
  void (*soft_threshold)(double* data, std::size_t len, double threshold);
  double (*dot)(const double* a, const double* b, std::size_t len);
};

const KernelTable& scalar_table();

// Null when the binary was built without the AVX2 variant or the CPU lacks it.
const KernelTable* avx2_table();

// Best table for this CPU. OPIDMD_ISA=scalar in the environment forces the
// reference kernels.
const KernelTable& active();

}  // namespace opidmd::kernels
