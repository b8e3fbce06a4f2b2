#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops with a scalar reference and an AVX2 variant.
// The dispatching entry points pick the AVX2 path when the CPU supports it.
namespace kam::kernels {

enum class Isa { Scalar, Avx2 };

bool avx2_supported() noexcept;
Isa active_isa() noexcept;
/// Forces a path; requesting Avx2 on a CPU without it keeps the scalar path.
void set_isa(Isa isa) noexcept;

double dot(const double* a, const double* b, std::size_t n) noexcept;

/// flags[c] = 1 where |c0 + sum_j grad[j] * cols[j][c]| < thr. Returns the hit count.
std::size_t mark_affine_below(const double* const* cols, std::size_t ncols, std::size_t count, double c0,
                              const double* grad, double thr, std::uint8_t* flags) noexcept;

namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
std::size_t mark_affine_below(const double* const* cols, std::size_t ncols, std::size_t count, double c0,
                              const double* grad, double thr, std::uint8_t* flags) noexcept;
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
std::size_t mark_affine_below(const double* const* cols, std::size_t ncols, std::size_t count, double c0,
                              const double* grad, double thr, std::uint8_t* flags) noexcept;
}  // namespace avx2

}  // namespace kam::kernels
