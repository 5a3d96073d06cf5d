#include "epk/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace epk::kernels {

namespace {

constexpr KernelTable kScalar{
    scalar::dot,          scalar::sum_squares,    scalar::max_abs,
    scalar::axpy,         scalar::soft_threshold, scalar::half_difference,
};

#if defined(EPK_HAVE_AVX2)
constexpr KernelTable kAvx2{
    avx2::dot,  avx2::sum_squares,    avx2::max_abs,
    avx2::axpy, avx2::soft_threshold, avx2::half_difference,
};
#endif

bool cpu_has_avx2() noexcept {
#if defined(EPK_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa detect() noexcept {
    if (const char* forced = std::getenv("EPK_SIMD"); forced && std::strcmp(forced, "scalar") == 0)
        return Isa::scalar;
    return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

} // namespace

bool isa_available(Isa isa) noexcept {
    if (isa == Isa::scalar) return true;
    static const bool avx2 = cpu_has_avx2();
    return avx2;
}

const KernelTable& table(Isa isa) noexcept {
#if defined(EPK_HAVE_AVX2)
    if (isa == Isa::avx2 && isa_available(Isa::avx2)) return kAvx2;
#endif
    (void)isa;
    return kScalar;
}

Isa active_isa() noexcept {
    static const Isa isa = detect();
    return isa;
}

std::string_view isa_name(Isa isa) noexcept {
    return isa == Isa::avx2 ? "avx2" : "scalar";
}

} // namespace epk::kernels
