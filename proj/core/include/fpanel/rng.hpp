#pragma once

#include <cmath>
#include <cstdint>

namespace fpanel {

/// xoshiro256++ with splitmix64 seeding. Streams are derived from a
/// (seed, stream, substream) key, so any worker can reconstruct the draws
/// for one replication independently of scheduling or thread count.
class Rng {
public:
    Rng() : Rng(0, 0, 0) {}

    Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
        std::uint64_t x = seed;
        x = splitmix(x + 0x9e3779b97f4a7c15ULL * (stream + 1));
        x = splitmix(x + 0xbf58476d1ce4e5b9ULL * (substream + 1));
        for (auto& s : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            s = splitmix(x);
        }
        have_cached_ = false;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on (0,1); never returns 0 or 1.
    double uniform() {
        // 53-bit mantissa, shifted away from 0
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // multiply-shift; bias is negligible for n << 2^64
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    static std::uint64_t splitmix(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t splitmix(std::uint64_t&& x) {
        std::uint64_t v = x;
        return splitmix(v);
    }

    std::uint64_t state_[4];
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace fpanel
