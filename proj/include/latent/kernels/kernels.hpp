#pragma once

// Inner-loop arithmetic shared by every module: dot products, squared
// Euclidean distances and axpy updates over contiguous double arrays.
//
// Each kernel has a scalar reference implementation plus optional AVX2+FMA
// (x86-64) and NEON (aarch64) variants. One variant is selected at startup:
//   - LATENT_ATLAS_SIMD=scalar|avx2|neon forces a variant (falls back to
//     scalar if the requested one is unavailable on this CPU);
//   - otherwise the widest variant the CPU supports is used.
// The SIMD variants sum in a different order than the scalar reference, so
// results agree to rounding, not bit-for-bit. Within one process the choice
// is fixed, which keeps repeated runs bit-identical.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace latent::kernels {

struct KernelTable {
    std::string_view name;
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*squared_distance)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_table() noexcept;

// nullptr when the variant is not compiled in or the CPU lacks the ISA.
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

// All variants usable on this machine, scalar first.
std::vector<const KernelTable*> available_tables();

const KernelTable& active() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    return active().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    return active().squared_distance(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
    active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace latent::kernels
