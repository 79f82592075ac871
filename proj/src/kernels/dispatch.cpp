#include <cstdlib>
#include <string_view>

#include "latent/kernels/kernels.hpp"

namespace latent::kernels {
namespace {

const KernelTable& select_table() noexcept {
    const char* env = std::getenv("LATENT_ATLAS_SIMD");
    const std::string_view wanted = env ? env : "auto";
    if (wanted == "scalar") return scalar_table();
    if (wanted == "avx2") return avx2_table() ? *avx2_table() : scalar_table();
    if (wanted == "neon") return neon_table() ? *neon_table() : scalar_table();
    if (const KernelTable* t = avx2_table()) return *t;
    if (const KernelTable* t = neon_table()) return *t;
    return scalar_table();
}

}  // namespace

std::vector<const KernelTable*> available_tables() {
    std::vector<const KernelTable*> out{&scalar_table()};
    if (const KernelTable* t = avx2_table()) out.push_back(t);
    if (const KernelTable* t = neon_table()) out.push_back(t);
    return out;
}

const KernelTable& active() noexcept {
    static const KernelTable& table = select_table();
    return table;
}

}  // namespace latent::kernels
