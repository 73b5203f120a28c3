// SPDX-License-Identifier: MIT
#include "twoscale/rng.hpp"

#include <cmath>
#include <numbers>

namespace twoscale {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline double to_open_unit(std::uint32_t u) { return (static_cast<double>(u) + 0.5) * 0x1.0p-32; }

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

NormalStream::NormalStream(std::uint64_t seed, std::uint64_t path, Channel channel)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      path_lo_(static_cast<std::uint32_t>(path)),
      path_hi_channel_(static_cast<std::uint32_t>(path >> 32) ^
                       (static_cast<std::uint32_t>(channel) << 24)) {}

void NormalStream::fill(std::uint64_t step, std::span<double> out) const {
    const std::uint32_t step_lo = static_cast<std::uint32_t>(step);
    // block counter lives in the upper bits of the step word
    for (std::size_t base = 0, block = 0; base < out.size(); base += 4, ++block) {
        const auto r = philox4x32(
            {step_lo, static_cast<std::uint32_t>((step >> 32) ^ (block << 16)), path_lo_, path_hi_channel_},
            key_);
        // Box-Muller on two pairs
        double z[4];
        for (int k = 0; k < 2; ++k) {
            const double u1 = to_open_unit(r[2 * k]);
            const double u2 = to_open_unit(r[2 * k + 1]);
            const double rad = std::sqrt(-2.0 * std::log(u1));
            const double ang = 2.0 * std::numbers::pi * u2;
            z[2 * k] = rad * std::cos(ang);
            z[2 * k + 1] = rad * std::sin(ang);
        }
        for (std::size_t j = 0; j < 4 && base + j < out.size(); ++j) out[base + j] = z[j];
    }
}

}  // namespace twoscale
