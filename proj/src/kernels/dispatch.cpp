#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"

namespace rydlock::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(RYDLOCK_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelSet& select() {
    const char* forced = std::getenv("RYDLOCK_KERNELS");
    if (forced != nullptr && std::string_view(forced) == "scalar") return scalar_kernels();
    if (const KernelSet* v = avx2_kernels()) return *v;
    return scalar_kernels();
}

}  // namespace

const KernelSet& scalar_kernels() {
    static const KernelSet set{"scalar",          scalar::sum,   scalar::sum_squares,
                               scalar::center_and_window, scalar::power, scalar::adler_rk4};
    return set;
}

const KernelSet* avx2_kernels() {
#if defined(RYDLOCK_HAVE_AVX2)
    static const bool supported = cpu_has_avx2();
    static const KernelSet set{"avx2",          avx2::sum,   avx2::sum_squares,
                               avx2::center_and_window, avx2::power, avx2::adler_rk4};
    return supported ? &set : nullptr;
#else
    return nullptr;
#endif
}

const KernelSet& active_kernels() {
    static const KernelSet& set = select();
    return set;
}

}  // namespace rydlock::kernels
