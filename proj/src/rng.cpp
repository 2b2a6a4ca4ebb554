#include "fieldsel/rng.hpp"

#include <array>

namespace fieldsel {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state) {
    for (unsigned char c : bytes) {
        state ^= c;
        state *= 0x100000001b3ULL;
    }
    return state;
}

namespace {

std::uint64_t mix_u64(std::uint64_t state, std::uint64_t value) {
    std::array<char, 8> buf{};
    for (int k = 0; k < 8; ++k) buf[static_cast<std::size_t>(k)] = static_cast<char>((value >> (8 * k)) & 0xFF);
    return fnv1a(std::string_view(buf.data(), buf.size()), state);
}

} // namespace

std::uint64_t derive_stream(std::uint64_t base_seed, std::string_view experiment, std::uint64_t n,
                            std::uint64_t replica) {
    std::uint64_t h = mix_u64(0xcbf29ce484222325ULL, base_seed);
    h = fnv1a(experiment, h);
    h = mix_u64(h, n);
    return mix_u64(h, replica);
}

} // namespace fieldsel
