#pragma once

#include <cstdint>
#include <random>

namespace stickybm {

using Engine = std::mt19937_64;

/// Independent-use streams keyed by (seed, domain, index). Simulation
/// replicas and optimizer restarts draw from different domains so the same
/// seed never correlates them.
enum class StreamDomain : std::uint32_t {
  kSimulation = 0x51u,
  kOptimizer = 0x0Fu,
  kSynthetic = 0x5Au,
};

Engine make_stream(std::uint64_t seed, StreamDomain domain, std::uint64_t index);

}  // namespace stickybm
