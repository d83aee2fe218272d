#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace hypoips {

/// Philox4x32-10 block cipher (Salmon et al., SC'11): maps a 128-bit counter
/// and a 64-bit key to 128 pseudorandom bits.
class Philox4x32 {
  public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Sequential stream of draws addressed by (key, particle, step). The block
/// counter increments as draws are consumed, so the k-th draw of a stream is
/// a pure function of (seed, replicate, particle, step, k).
class RngStream {
  public:
    RngStream(Philox4x32::Key key, std::uint64_t particle, std::uint64_t step) noexcept;

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept;
    double normal() noexcept;

  private:
    void refill() noexcept;

    Philox4x32::Key key_;
    std::uint32_t particle_;
    std::uint64_t step_;
    std::uint32_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int used_ = 4;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

/// Counter-based splittable generator keyed by (seed, replicate).
class CounterRng {
  public:
    /// Step index reserved for initial-condition draws.
    static constexpr std::uint64_t kInitialStep = std::numeric_limits<std::uint64_t>::max();
    /// Particle index reserved for draws not tied to a particle.
    static constexpr std::uint64_t kGlobalParticle = 0xFFFFFFFFull;

    explicit CounterRng(std::uint64_t seed, std::uint64_t replicate = 0) noexcept;

    RngStream stream(std::uint64_t particle, std::uint64_t step) const noexcept
    {
        return RngStream(key_, particle, step);
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t replicate() const noexcept { return replicate_; }

  private:
    std::uint64_t seed_;
    std::uint64_t replicate_;
    Philox4x32::Key key_;
};

}  // namespace hypoips
