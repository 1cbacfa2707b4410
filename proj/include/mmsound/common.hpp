// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmsound {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Bad input: wrong sizes, out-of-range parameters, malformed files.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// The inputs were fine but the computation could not produce a finite or
// converged answer.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what)
{
    if (!cond)
        throw ValidationError(what);
}

inline double db10(double linear) { return 10.0 * std::log10(linear); }
inline double from_db10(double db) { return std::pow(10.0, db / 10.0); }

// Wraps an angle to [-pi, pi).
inline double wrap_pi(double a)
{
    a = std::fmod(a + kPi, kTwoPi);
    if (a < 0.0)
        a += kTwoPi;
    return a - kPi;
}

} // namespace mmsound
