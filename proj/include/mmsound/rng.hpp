// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "mmsound/common.hpp"

namespace mmsound {

// Counter-keyed random substream. A stream is identified by a root seed and a
// tuple of integer coordinates (snapshot, entry, purpose, ...), so draws do
// not depend on the order in which streams are visited. Normal deviates use
// Box-Muller on 53-bit uniforms so results are identical across standard
// library implementations.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> coords);

    std::uint64_t next_u64() { return engine_(); }
    // Uniform in (0, 1).
    double uniform();
    double normal();
    // Circularly-symmetric complex Gaussian with E|z|^2 = variance.
    cplx complex_normal(double variance = 1.0);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

} // namespace mmsound
