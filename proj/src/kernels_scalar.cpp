#include <cmath>

#include "kam/kernels.hpp"

namespace kam::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) noexcept {
    // Four running sums in the same lane layout as the vector path.
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    const std::size_t body = n / 4 * 4;
    for (std::size_t i = 0; i < body; i += 4)
        for (std::size_t l = 0; l < 4; ++l) lane[l] += a[i + l] * b[i + l];
    double sum = lane[0] + lane[1] + lane[2] + lane[3];
    for (std::size_t i = body; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

std::size_t mark_affine_below(const double* const* cols, std::size_t ncols, std::size_t count, double c0,
                              const double* grad, double thr, std::uint8_t* flags) noexcept {
    std::size_t hits = 0;
    for (std::size_t c = 0; c < count; ++c) {
        double v = c0;
        for (std::size_t j = 0; j < ncols; ++j) v = v + grad[j] * cols[j][c];
        if (std::fabs(v) < thr) {
            flags[c] = 1;
            ++hits;
        }
    }
    return hits;
}

}  // namespace kam::kernels::scalar
