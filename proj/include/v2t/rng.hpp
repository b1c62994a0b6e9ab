#pragma once

#include <cstdint>
#include <string_view>

namespace v2t {

// Counter-based splittable generator. A stream is (key, counter); draw i of
// stream k is mix64(k ^ (i * GAMMA)), with mix64 the SplitMix64 finalizer.
// Child streams are derived by hashing the parent key with a stream id, so any
// (seed, path-of-splits) pair names the same stream on every platform —
// results depend only on 64-bit integer arithmetic.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(mix64(seed ^ kSeedTag)), counter_(0) {}

    // Independent child stream; does not disturb this stream's counter.
    Rng split(std::uint64_t stream) const { return Rng(key_, stream); }
    Rng split(std::string_view label) const { return split(hash_label(label)); }

    std::uint64_t next_u64() { return mix64(key_ ^ (++counter_ * kGamma)); }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in {0, ..., n-1}; n must be > 0. Rejection-free modulo with
    // 64-bit state is biased by < 2^-32 for any n below 2^32, which is
    // negligible against the statistical tolerances used here.
    std::uint64_t uniform(std::uint64_t n) { return next_u64() % n; }

    bool bernoulli(double p) { return next_double() < p; }

    // Standard normal via Box-Muller; consumes exactly two uniforms per call.
    double normal();

    static std::uint64_t hash_label(std::string_view label);

private:
    Rng(std::uint64_t parent_key, std::uint64_t stream)
        : key_(mix64(parent_key ^ mix64(stream ^ kSplitTag))), counter_(0) {}

    static std::uint64_t mix64(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t kSeedTag = 0x7C3A9D2F51E6B840ULL;
    static constexpr std::uint64_t kSplitTag = 0x2545F4914F6CDD1DULL;

    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace v2t
