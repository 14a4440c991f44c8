// rng.hpp
// Counter-based random streams. Every (master_seed, trial_index, stream_id)
// triple owns an independent deterministic stream, so results do not depend
// on execution order or thread count.

#pragma once

#include <cmath>
#include <cstdint>

namespace ewsim {

namespace detail {

// Finalizer from splitmix64 (Vigna); full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

class CounterRng {
public:
    CounterRng(std::uint64_t master_seed, std::uint64_t trial_index,
               std::uint64_t stream_id)
        : state_(detail::mix64(master_seed + 0x9e3779b97f4a7c15ULL *
                               (detail::mix64(trial_index) ^
                                detail::mix64(stream_id ^ 0xd1b54a32d192ed03ULL)))) {}

    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~0ULL; }

    result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return detail::mix64(state_);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; consumes two uniforms.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        // guard against log(0)
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::uint64_t state_;
};

} // namespace ewsim
