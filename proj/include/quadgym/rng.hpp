#pragma once

// Counter-based random streams.
//
// Every stream is addressed by a key tuple (master seed, env id, episode,
// purpose). Outputs depend only on (key, counter), so the order in which
// environments are processed, or how they are split across workers, cannot
// change any draw.

#include <cstdint>
#include <limits>
#include <random>

namespace quadgym {

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

enum class StreamPurpose : std::uint64_t { Reset = 1, Step = 2, Sensor = 3, Scene = 4 };

/// UniformRandomBitGenerator over a keyed counter.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng() = default;
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    CounterRng(std::uint64_t master, std::uint64_t env, std::uint64_t episode, StreamPurpose purpose)
        : key_(derive_key(master, env, episode, purpose)) {}

    static constexpr std::uint64_t derive_key(std::uint64_t master, std::uint64_t env, std::uint64_t episode,
                                              StreamPurpose purpose) {
        std::uint64_t k = detail::splitmix64(master);
        k = detail::splitmix64(k ^ env);
        k = detail::splitmix64(k ^ (episode * 0x632be59bd9b4e019ULL));
        return detail::splitmix64(k ^ static_cast<std::uint64_t>(purpose));
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return detail::splitmix64(key_ ^ detail::splitmix64(counter_++)); }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(*this); }

    double normal(double mean, double stddev) {
        if (stddev <= 0.0) return mean;
        return std::normal_distribution<double>(mean, stddev)(*this);
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace quadgym
