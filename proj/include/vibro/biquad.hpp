#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace vibro {

/// Second-order IIR section, difference-equation coefficients with a0 == 1:
///   y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct BiquadCoeffs {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;

    /// Both poles strictly inside the unit circle (Jury criterion for a
    /// monic quadratic). `margin` permits poles on the circle when zero.
    bool stable(double margin = 0.0) const {
        return std::abs(a2) < 1.0 - margin && std::abs(a1) < 1.0 + a2 - margin;
    }

    double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }

    /// Frequency response at normalized angular frequency w = 2*pi*f/fs.
    std::complex<double> response(double w) const {
        const std::complex<double> z1 = std::polar(1.0, -w);
        const std::complex<double> z2 = z1 * z1;
        return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
    }
};

/// Stateful biquad, direct form II transposed.
class Biquad {
public:
    Biquad() = default;
    explicit Biquad(const BiquadCoeffs& c) : c_(c) {}

    double step(double x) {
        const double y = c_.b0 * x + s1_;
        s1_ = c_.b1 * x - c_.a1 * y + s2_;
        s2_ = c_.b2 * x - c_.a2 * y;
        return y;
    }

    /// Step with a lower output bound. When the unclamped output would fall
    /// below `lower_bound` the state update is skipped entirely, so the
    /// internal integrator cannot wind up against the clamp.
    double step_clamped(double x, double lower_bound, bool* saturated = nullptr) {
        const double y = c_.b0 * x + s1_;
        if (y < lower_bound) {
            if (saturated) *saturated = true;
            return lower_bound;
        }
        if (saturated) *saturated = false;
        s1_ = c_.b1 * x - c_.a1 * y + s2_;
        s2_ = c_.b2 * x - c_.a2 * y;
        return y;
    }

    void reset() { s1_ = s2_ = 0.0; }
    const BiquadCoeffs& coeffs() const { return c_; }

private:
    BiquadCoeffs c_{};
    double s1_ = 0.0, s2_ = 0.0;
};

/// 2nd-order Butterworth low-pass, bilinear transform with the cutoff
/// prewarped so the -3 dB point lands on `cutoff_hz` exactly.
/// DC gain is 1 by construction.
inline BiquadCoeffs design_lowpass_iir(double cutoff_hz, double rate_hz) {
    if (!(rate_hz > 0.0))
        throw std::invalid_argument("design_lowpass_iir: rate_hz must be positive");
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < rate_hz / 2.0))
        throw std::invalid_argument("design_lowpass_iir: cutoff_hz outside (0, rate_hz/2)");

    const double k = std::tan(std::numbers::pi * cutoff_hz / rate_hz);
    const double norm = 1.0 + std::numbers::sqrt2 * k + k * k;
    BiquadCoeffs c;
    c.b0 = k * k / norm;
    c.b1 = 2.0 * c.b0;
    c.b2 = c.b0;
    c.a1 = 2.0 * (k * k - 1.0) / norm;
    c.a2 = (1.0 - std::numbers::sqrt2 * k + k * k) / norm;
    return c;
}

} // namespace vibro
