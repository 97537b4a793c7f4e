#pragma once

#include <array>
#include <cstdint>

namespace repdiv {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// A reproducible random stream identified by (seed, stream_id).
///
/// The generator is xoshiro256** whose state is filled from a SplitMix64
/// sequence keyed on both identifiers. Child streams are derived from the
/// parent's identifiers only, never from its current state, so a work unit
/// indexed by `i` always sees the same numbers regardless of which thread
/// runs it or in what order.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    /// Independent stream for child work unit `index`.
    RngStream derive(std::uint64_t index) const noexcept;

    std::uint64_t next_u64() noexcept;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1).
    double uniform_open() noexcept
    {
        return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
    }

    /// Standard normal (Marsaglia polar method, second variate cached).
    double normal() noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::array<std::uint64_t, 4> state_{};
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace repdiv
