#pragma once

#include <cstdint>
#include <string_view>

namespace crossing {

/// Stable seed derivation: splitmix64 chained over the master seed, the
/// FNV-1a hash of the purpose label, and the index. Identical on every
/// platform, so any execution order reproduces the same streams.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index = 0);

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

}  // namespace crossing
