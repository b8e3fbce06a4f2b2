#include <immintrin.h>

#include <cmath>

#include "kam/kernels.hpp"

#if defined(__GNUC__) && !defined(__clang__)
#pragma GCC target("avx2,fma")
#elif defined(__clang__)
#pragma clang attribute push(__attribute__((target("avx2,fma"))), apply_to = function)
#endif

namespace kam::kernels::avx2 {

double dot(const double* a, const double* b, std::size_t n) noexcept {
    constexpr std::size_t W = 4;
    const std::size_t body = n / W * W;
    __m256d sum = _mm256_setzero_pd();
    for (std::size_t i = 0; i < body; i += W) {
        const __m256d va = _mm256_loadu_pd(a + i);
        const __m256d vb = _mm256_loadu_pd(b + i);
        sum = _mm256_fmadd_pd(va, vb, sum);
    }
    double lane[W];
    _mm256_storeu_pd(lane, sum);
    double total = lane[0] + lane[1] + lane[2] + lane[3];
    for (std::size_t i = body; i < n; ++i) total += a[i] * b[i];
    return total;
}

// Plain mul/add (no FMA) so flags match the scalar reference bit for bit.
std::size_t mark_affine_below(const double* const* cols, std::size_t ncols, std::size_t count, double c0,
                              const double* grad, double thr, std::uint8_t* flags) noexcept {
    constexpr std::size_t W = 4;
    const std::size_t body = count / W * W;
    const __m256d vthr = _mm256_set1_pd(thr);
    const __m256d vc0 = _mm256_set1_pd(c0);
    const __m256d sign = _mm256_set1_pd(-0.0);
    std::size_t hits = 0;
    for (std::size_t c = 0; c < body; c += W) {
        __m256d v = vc0;
        for (std::size_t j = 0; j < ncols; ++j) {
            const __m256d x = _mm256_loadu_pd(cols[j] + c);
            v = _mm256_add_pd(v, _mm256_mul_pd(_mm256_set1_pd(grad[j]), x));
        }
        const __m256d mag = _mm256_andnot_pd(sign, v);
        const int mask = _mm256_movemask_pd(_mm256_cmp_pd(mag, vthr, _CMP_LT_OQ));
        if (mask == 0) continue;
        for (std::size_t l = 0; l < W; ++l) {
            if (mask & (1 << l)) {
                flags[c + l] = 1;
                ++hits;
            }
        }
    }
    for (std::size_t c = body; c < count; ++c) {
        double v = c0;
        for (std::size_t j = 0; j < ncols; ++j) v = v + grad[j] * cols[j][c];
        if ((v < 0.0 ? -v : v) < thr) {
            flags[c] = 1;
            ++hits;
        }
    }
    return hits;
}

}  // namespace kam::kernels::avx2

#if defined(__clang__)
#pragma clang attribute pop
#endif
