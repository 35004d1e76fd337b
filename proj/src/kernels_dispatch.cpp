#include "opidmd/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace opidmd::kernels {

#if defined(OPIDMD_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif

const KernelTable* avx2_table() {
#if defined(OPIDMD_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? &kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable* chosen = [] {
    const char* forced = std::getenv("OPIDMD_ISA");
    if (forced != nullptr && std::string_view(forced) == "scalar") return &scalar_table();
    if (const auto* t = avx2_table()) return t;
    return &scalar_table();
  }();
  return *chosen;
}

}  // namespace opidmd::kernels
