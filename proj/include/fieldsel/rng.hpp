#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fieldsel {

// mt19937_64 and seed_seq are fully specified by the standard, so a
// (seed, stream) pair yields the same draws on every conforming platform.
std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream);

// Uniform on [0, 1) from the top 53 bits of one draw.
inline double uniform01(std::mt19937_64& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// 64-bit FNV-1a, used for stream ids and config hashes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ULL);

// Stream id for one replica of one experiment at one sample size.
std::uint64_t derive_stream(std::uint64_t base_seed, std::string_view experiment, std::uint64_t n,
                            std::uint64_t replica);

} // namespace fieldsel
