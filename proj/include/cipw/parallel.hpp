#pragma once

#include <cstdint>
#include <functional>
#include <random>

#include "cipw/model.hpp"

namespace cipw {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds
std::uint64_t mix64(std::uint64_t z);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);
// uniform in [0,1) from a single hashed key
double unit_draw(std::uint64_t key);

// Worker cap: CIPW_THREADS if set, else hardware concurrency.
int worker_count();

// Runs body over [0, n) split into contiguous chunks. Results must be written
// by index so the outcome does not depend on scheduling.
void parallel_for(Index n, const std::function<void(Index, Index)>& body);

} // namespace cipw
