#include <cstdlib>
#include <string>

#include "anymdp/simd/kernels.hpp"

namespace anymdp::simd {

#if !defined(ANYMDP_HAVE_AVX2_KERNELS)
const KernelTable* avx2_kernels() { return nullptr; }
#endif
#if !defined(ANYMDP_HAVE_NEON_KERNELS)
const KernelTable* neon_kernels() { return nullptr; }
#endif

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(ANYMDP_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#if defined(ANYMDP_HAVE_NEON_KERNELS)
      return true;
#else
      return false;
#endif
  }
  return false;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

namespace {

const KernelTable* table_for(Isa isa) {
  if (!cpu_supports(isa)) return nullptr;
  switch (isa) {
    case Isa::scalar:
      return &scalar_kernels();
    case Isa::avx2:
      return avx2_kernels();
    case Isa::neon:
      return neon_kernels();
  }
  return nullptr;
}

const KernelTable& select_process_table() {
  if (const char* forced = std::getenv("ANYMDP_SIMD")) {
    const std::string name(forced);
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
      if (name == isa_name(isa)) {
        if (const KernelTable* t = table_for(isa)) return *t;
      }
    }
  }
  for (Isa isa : {Isa::avx2, Isa::neon}) {
    if (const KernelTable* t = table_for(isa)) return *t;
  }
  return scalar_kernels();
}

thread_local const KernelTable* tls_override = nullptr;

}  // namespace

const KernelTable& active() {
  if (tls_override != nullptr) return *tls_override;
  static const KernelTable& process_table = select_process_table();
  return process_table;
}

ScopedKernelOverride::ScopedKernelOverride(const KernelTable& table) : previous_(tls_override) {
  tls_override = &table;
}

ScopedKernelOverride::~ScopedKernelOverride() { tls_override = previous_; }

}  // namespace anymdp::simd
