#pragma once

#include <cstdint>
#include <random>

namespace rydcav {

using Rng = std::mt19937_64;

/// Mixes (seed, stream) into an independent generator so parallel work items
/// draw the same numbers regardless of scheduling order.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace rydcav
