#pragma once

#include <cstdint>

namespace rlm {

// Counter-based random stream. A draw is a hash of (seed, stream, counter),
// so the sequence is fully determined by the seed and never depends on how
// many other streams exist. split() derives an independent sub-stream per
// index, which keeps batch generation reproducible under any parallel
// schedule.
class RngStream {
public:
    RngStream() = default;
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : seed_(seed), key_(derive_key(seed, stream)), stream_(stream) {}

    std::uint64_t next_u64() noexcept {
        counter_ += 1;
        return mix(key_ + golden * counter_);
    }

    // Uniform on [0, 1), 53-bit resolution.
    double next_double() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1); safe as a quantile-function argument.
    double next_open_double() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t next_below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Independent child stream; does not advance this stream.
    RngStream split(std::uint64_t child) const noexcept {
        return RngStream(seed_, mix(stream_ ^ mix(child + golden)));
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

private:
    static constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;

    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z) noexcept {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) noexcept {
        return mix(seed + golden) ^ mix(stream + 2 * golden);
    }

    std::uint64_t seed_ = 0;
    std::uint64_t key_ = derive_key(0, 0);
    std::uint64_t stream_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace rlm
