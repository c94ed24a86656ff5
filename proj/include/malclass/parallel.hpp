#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace malclass {

/// Runs fn(0..n-1) on up to `workers` threads. Results must be written to
/// per-index slots so output never depends on scheduling. Calls made from
/// inside a worker run serially. If several indices throw, the exception of
/// the lowest index is rethrown.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// Mixes a base seed with stream coordinates into an independent seed
/// (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace malclass
