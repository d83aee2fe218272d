#include "hypoips/rng.hpp"

#include <cmath>
#include <numbers>

namespace hypoips {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept
{
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

// 53 random bits -> (0, 1)
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept
{
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) noexcept
{
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    std::uint64_t z = x + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

RngStream::RngStream(Philox4x32::Key key, std::uint64_t particle, std::uint64_t step) noexcept
    : key_(key), particle_(static_cast<std::uint32_t>(particle)), step_(step)
{
}

void RngStream::refill() noexcept
{
    buffer_ = Philox4x32::generate(
        {block_, particle_, static_cast<std::uint32_t>(step_), static_cast<std::uint32_t>(step_ >> 32)}, key_);
    ++block_;
    used_ = 0;
}

double RngStream::uniform() noexcept
{
    if (used_ > 2) {
        refill();
    }
    const double u = to_open_unit(buffer_[static_cast<std::size_t>(used_)],
                                  buffer_[static_cast<std::size_t>(used_ + 1)]);
    used_ += 2;
    return u;
}

double RngStream::normal() noexcept
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    // Box-Muller keeps the draw count per normal fixed, which keeps streams
    // aligned across runs.
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_normal_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t replicate) noexcept : seed_(seed), replicate_(replicate)
{
    const std::uint64_t k = splitmix64(seed ^ splitmix64(replicate ^ 0x5851f42d4c957f2dull));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

}  // namespace hypoips
