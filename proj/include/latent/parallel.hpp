#pragma once

#include <cstddef>
#include <functional>

namespace latent {

// Worker count: hardware concurrency, capped by LATENT_ATLAS_THREADS when set.
std::size_t worker_count() noexcept;

// Runs body(i) for i in [0, n) across worker_count() threads in contiguous
// chunks. Bodies must write only to slots owned by their index, which keeps
// results independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace latent
