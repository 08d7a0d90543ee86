#include <cstdlib>
#include <string_view>

#include "sissle/kernels/bitset_kernels.hpp"

namespace sissle::kernels {

#if defined(SISSLE_HAVE_AVX2)
const BitsetKernels& avx2_kernels_impl();
#endif

const BitsetKernels* avx2_kernels() {
#if defined(SISSLE_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    static const bool supported = __builtin_cpu_supports("avx2");
    return supported ? &avx2_kernels_impl() : nullptr;
#else
    return nullptr;
#endif
}

const BitsetKernels& active_kernels() {
    static const BitsetKernels& chosen = [] () -> const BitsetKernels& {
        const char* force = std::getenv("SISSLE_SIMD");
        if (force != nullptr && std::string_view(force) == "scalar") return scalar_kernels();
        if (const BitsetKernels* k = avx2_kernels()) return *k;
        return scalar_kernels();
    }();
    return chosen;
}

}  // namespace sissle::kernels
