#pragma once

// Counter-based random number generation (Philox 4x32-10, Salmon et al.,
// SC 2011).  Every 128-bit block is addressed by (seed, stream, position),
// so any draw in a simulation can be recomputed in isolation: replications
// get their own streams, tree nodes get fixed position slots, and nothing
// depends on draw order or thread scheduling.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rcbar {

namespace detail {

inline constexpr std::uint32_t kPhiloxW32A = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW32B = 0xBB67AE85u;
inline constexpr std::uint32_t kPhiloxM4x32A = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM4x32B = 0xCD9E8D57u;

inline void philox_round(std::uint32_t ctr[4], const std::uint32_t key[2]) {
    const std::uint64_t p0 = std::uint64_t{kPhiloxM4x32A} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kPhiloxM4x32B} * ctr[2];
    const std::uint32_t out0 = static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0];
    const std::uint32_t out1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t out2 = static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1];
    const std::uint32_t out3 = static_cast<std::uint32_t>(p0);
    ctr[0] = out0;
    ctr[1] = out1;
    ctr[2] = out2;
    ctr[3] = out3;
}

}  // namespace detail

struct RandomBlock {
    std::uint64_t a = 0;
    std::uint64_t b = 0;
};

// One 128-bit Philox block for counter (position, stream) under `seed`.
inline RandomBlock philox_block(std::uint64_t seed, std::uint64_t stream, std::uint64_t position) {
    std::uint32_t ctr[4] = {
        static_cast<std::uint32_t>(position),
        static_cast<std::uint32_t>(position >> 32),
        static_cast<std::uint32_t>(stream),
        static_cast<std::uint32_t>(stream >> 32),
    };
    std::uint32_t key[2] = {
        static_cast<std::uint32_t>(seed),
        static_cast<std::uint32_t>(seed >> 32),
    };
    for (int r = 0; r < 10; ++r) {
        detail::philox_round(ctr, key);
        key[0] += detail::kPhiloxW32A;
        key[1] += detail::kPhiloxW32B;
    }
    return {std::uint64_t{ctr[0]} | (std::uint64_t{ctr[1]} << 32),
            std::uint64_t{ctr[2]} | (std::uint64_t{ctr[3]} << 32)};
}

// Strictly inside (0,1); the offset keeps log() usable on every output.
inline double unit_double(std::uint64_t x) {
    return (static_cast<double>(x >> 11) + 0.5) * 0x1p-53;
}

// Top-byte tags keep the draw spaces of unrelated consumers disjoint even
// when they share one experiment seed.
enum class StreamKind : std::uint64_t {
    tree = 1,
    branch = 2,
    tail = 3,
    aux = 4,
};

inline std::uint64_t stream_id(StreamKind kind, std::uint64_t index) {
    return (static_cast<std::uint64_t>(kind) << 56) | (index & ((std::uint64_t{1} << 56) - 1));
}

// Sequential view of one stream.  Consumption order is part of the
// contract: a fixed call sequence reproduces the same values no matter
// how many other streams run concurrently.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    std::uint64_t next_u64() {
        if (have_spare_word_) {
            have_spare_word_ = false;
            return spare_word_;
        }
        const RandomBlock blk = philox_block(seed_, stream_, position_++);
        spare_word_ = blk.b;
        have_spare_word_ = true;
        return blk.a;
    }

    double uniform01() { return unit_double(next_u64()); }

    bool bernoulli_half() { return (next_u64() & 1u) != 0; }

    double normal() {
        if (have_spare_normal_) {
            have_spare_normal_ = false;
            return spare_normal_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_normal_ = r * std::sin(t);
        have_spare_normal_ = true;
        return r * std::cos(t);
    }

    double exponential(double rate) { return -std::log(uniform01()) / rate; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t position_ = 0;
    std::uint64_t spare_word_ = 0;
    bool have_spare_word_ = false;
    double spare_normal_ = 0.0;
    bool have_spare_normal_ = false;
};

}  // namespace rcbar
