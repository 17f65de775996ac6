#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vibro {

/// Friction-modulation drive envelope in milliamperes,
/// m(t) = 6 * sqrt((sin(2*pi*f*t) + 1)/2). The square root compensates the
/// square-law dependence of electroadhesion friction on current; the 20 kHz
/// carrier underneath is not modeled.
inline double fm_envelope_ma(double f_hz, double t_s) {
    if (!(f_hz > 0.0)) throw std::invalid_argument("fm_envelope_ma: f_hz must be positive");
    return 6.0 * std::sqrt((std::sin(2.0 * std::numbers::pi * f_hz * t_s) + 1.0) / 2.0);
}

} // namespace vibro
