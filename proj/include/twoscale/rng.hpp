// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace twoscale {

/// Noise channels. Each (seed, path, channel) triple owns an independent
/// counter-based stream; the step index is part of the counter, so any draw
/// can be regenerated without replaying the stream.
enum class Channel : std::uint32_t {
    SlowBrownian = 1,   ///< W^1 increments
    SlowResidual = 2,   ///< part of the exact OU increment not explained by dW^1
    FastBrownian = 3,   ///< W^2 increments
    Initial = 4,        ///< random initial states
    Probe = 5,
};

/// Philox4x32-10 block cipher (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t path, Channel channel);

    /// Fills `out` with standard normals belonging to `step`.
    void fill(std::uint64_t step, std::span<double> out) const;

private:
    std::array<std::uint32_t, 2> key_;
    std::uint32_t path_lo_;
    std::uint32_t path_hi_channel_;
};

}  // namespace twoscale
