#pragma once

#include <cstdint>
#include <random>

namespace lodiag {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijection on 64-bit integers.
std::uint64_t mix64(std::uint64_t x);

/// Seed of independent stream `index` under a master seed:
/// master ^ mix64(index). Replication i of a simulation uses stream i.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index);

}  // namespace lodiag
