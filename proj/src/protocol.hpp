#pragma once

// Message payload conventions shared by the coordinator and the workers.

#include <cstddef>

namespace syncml::protocol {

// Control payload[0].
enum Opcode : int {
  kSetup = 1,         // [op, algorithm, K, h, lambda, gamma, sigma_prime, seed]
  kEcho = 2,          // [op]; later broadcasts are answered with zeros
  kCollectAlpha = 3,  // [op]; reply [count, ids..., values...]
  kShutdown = 4,      // [op]
};

inline constexpr std::size_t kSetupSize = 8;

// Worker failure notice, sent as a Control message.
inline constexpr double kFailure = -1.0;

// Update payloads carry the solver output followed by this trailer:
// [alpha_sqnorm, compute_ns, steps_done, flagged].
inline constexpr std::size_t kTrailerSize = 4;

}  // namespace syncml::protocol
