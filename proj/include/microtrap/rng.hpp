#pragma once

#include <cstdint>

namespace microtrap
{
inline constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based uniform generator: the k-th draw of item `index` depends only on
/// (seed, index, k), so results do not depend on how work is scheduled.
class CounterRng
{
public:
    constexpr CounterRng(std::uint64_t seed, std::uint64_t index)
        : key_(splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL)))
    {
    }

    // Uniform double in [0, 1).
    constexpr double uniform(std::uint64_t k) const
    {
        return static_cast<double>(splitmix64(key_ + k * 0xd1b54a32d192ed03ULL) >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t key_;
};

} // namespace microtrap
