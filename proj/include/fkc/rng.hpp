#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

#include "fkc/common.hpp"

namespace fkc {

// Counter-based stream: output i is a bijective finalizer applied to
// key + i*golden (splitmix64 construction). Streams derived from
// (seed, stream id) are independent, seekable, and platform-stable, so runs
// are bit-reproducible regardless of how particles are scheduled on threads.
class CounterRng {
public:
    CounterRng() = default;
    CounterRng(uint64_t seed, uint64_t stream)
        : key_(mix64(seed + kGolden) ^ mix64(stream * 0xda942042e4dd58b5ull + 0x5851f42d4c957f2dull)) {}

    uint64_t next_u64() {
        counter_ += kGolden;
        return mix64(key_ + counter_);
    }

    // in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // in (0, 1]
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double normal() {
        double u1 = uniform_pos();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    void fill_normal(std::span<double> out) {
        for (double& v : out) v = normal();
    }

    double exponential(double rate = 1.0) { return -std::log(uniform_pos()) / rate; }

    // Index drawn proportionally to the (nonnegative, not necessarily
    // normalized) weights. Total mass must be positive.
    size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw DegenerateEnsembleError("categorical: zero total mass");
        double u = uniform() * total;
        double c = 0.0;
        for (size_t k = 0; k < weights.size(); ++k) {
            c += weights[k];
            if (u < c) return k;
        }
        return weights.size() - 1;
    }

    static uint64_t mix64(uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

private:
    static constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ull;
    uint64_t key_ = 0;
    uint64_t counter_ = 0;
};

}  // namespace fkc
