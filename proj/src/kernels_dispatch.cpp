#include <atomic>

#include "kam/kernels.hpp"

namespace kam::kernels {

namespace {

Isa detect() noexcept { return avx2_supported() ? Isa::Avx2 : Isa::Scalar; }

std::atomic<Isa>& current() noexcept {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

}  // namespace

bool avx2_supported() noexcept {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) noexcept {
    if (isa == Isa::Avx2 && !avx2_supported()) isa = Isa::Scalar;
    current().store(isa, std::memory_order_relaxed);
}

double dot(const double* a, const double* b, std::size_t n) noexcept {
    return active_isa() == Isa::Avx2 ? avx2::dot(a, b, n) : scalar::dot(a, b, n);
}

std::size_t mark_affine_below(const double* const* cols, std::size_t ncols, std::size_t count, double c0,
                              const double* grad, double thr, std::uint8_t* flags) noexcept {
    return active_isa() == Isa::Avx2 ? avx2::mark_affine_below(cols, ncols, count, c0, grad, thr, flags)
                                     : scalar::mark_affine_below(cols, ncols, count, c0, grad, thr, flags);
}

}  // namespace kam::kernels
