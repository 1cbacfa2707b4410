// SPDX-License-Identifier: Apache-2.0
#include "mmsound/rng.hpp"

#include <cmath>

namespace mmsound {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {

std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> coords)
{
    std::uint64_t key = splitmix64(seed);
    for (auto c : coords)
        key = splitmix64(key ^ splitmix64(c + 0x632be59bd9b4e019ULL));
    return key;
}

} // namespace

RandomStream::RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> coords)
    : engine_(derive_key(seed, coords))
{
}

double RandomStream::uniform()
{
    // 53 random mantissa bits, offset by half an ulp so 0 is never produced.
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return r * std::cos(kTwoPi * u2);
}

cplx RandomStream::complex_normal(double variance)
{
    const double s = std::sqrt(variance / 2.0);
    const double re = normal();
    const double im = normal();
    return {s * re, s * im};
}

} // namespace mmsound
