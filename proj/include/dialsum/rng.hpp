#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace dialsum {

// FNV-1a over the bytes, finished with a splitmix64 round.
std::uint64_t stable_hash(std::string_view bytes, std::uint64_t seed = 0);

/// Deterministic random stream.
///
/// Only the raw mt19937_64 output is used; the integer and real draws are
/// implemented here so the sequence is identical across standard libraries
/// (the std distributions are implementation-defined).
class RngStream {
public:
    explicit RngStream(std::uint64_t state) : engine_(state) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_int(std::uint64_t n);

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via Box-Muller.
    double normal();

    template <typename T>
    void shuffle(std::vector<T> &v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

RngStream derive_rng(std::uint64_t seed, std::string_view stream_id);

} // namespace dialsum
