#pragma once

#include <cmath>
#include <cstdint>

namespace hdlogit {

namespace detail {

// SplitMix64 finalizer; used both to expand seeds into xoshiro state and as
// the mixing function for derived stream/cell seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// Derive a decorrelated child seed (used for grid cells and sub-streams).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t id) {
    std::uint64_t s = seed ^ (0xD2B74407B1CE6E93ULL * (id + 0x632BE59BD9B4E019ULL));
    return detail::splitmix64(s);
}

// Counter-based stream: (seed, stream_id) fully determines the sequence, so
// replication r of a Monte Carlo run draws from stream r independent of how
// replications are scheduled across threads.  Core generator: xoshiro256++,
// state expanded from the pair by SplitMix64.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id) {
        std::uint64_t sm = mix_seed(seed, stream_id);
        for (auto& word : s_) word = detail::splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the sine mate is cached so draws come
    // in deterministic pairs.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite.
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    bool bernoulli(double prob) { return uniform() < prob; }

private:
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace hdlogit
