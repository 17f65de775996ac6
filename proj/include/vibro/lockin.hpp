#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "vibro/biquad.hpp"

namespace vibro {

/// Uniformly sampled scalar signal.
struct SampledSignal {
    std::vector<double> samples;
    double rate_hz = 0.0;

    void validate() const {
        if (!(rate_hz > 0.0))
            throw std::invalid_argument("SampledSignal: rate_hz must be positive");
        for (double v : samples)
            if (!std::isfinite(v))
                throw std::invalid_argument("SampledSignal: non-finite sample");
    }
};

/// Amplitude (same unit as the input signal) and phase on the shifted
/// branch (-270, 90] degrees.
struct AmplitudePhase {
    double amplitude = 0.0;
    double phase_deg = 0.0;
};

/// Single-sample demodulation: x[n] * exp(-j*2*pi*f*n/N).
inline std::complex<double> demodulate(double x_n, std::uint64_t n, double f_hz, double rate_hz) {
    const double angle = -2.0 * std::numbers::pi * f_hz * static_cast<double>(n) / rate_hz;
    return x_n * std::complex<double>(std::cos(angle), std::sin(angle));
}

/// Amplitude of a demodulated estimate. The factor of 2 restores the peak
/// amplitude of the real input tone (half the power sits in the negative
/// frequency image).
inline double amplitude(std::complex<double> x) { return 2.0 * std::abs(x); }

/// Four-quadrant phase remapped onto (-270, 90] degrees. The discontinuity
/// sits at 90/-270 instead of +-180, far from the 0..-180 lag range a
/// force-driven mechanical stage operates in.
inline double shifted_phase_deg(std::complex<double> x) {
    if (x.real() == 0.0 && x.imag() == 0.0)
        throw std::domain_error("shifted_phase_deg: phase of zero vector is undefined");
    const double deg = std::atan2(x.imag(), x.real()) * 180.0 / std::numbers::pi;
    return deg > 90.0 ? deg - 360.0 : deg;
}

/// Arithmetic mean of the most recent `window` demodulated samples
/// (boxcar-averaged short-time DFT bin).
inline std::complex<double> boxcar_mean(std::span<const std::complex<double>> y, std::size_t window) {
    if (window == 0)
        throw std::invalid_argument("boxcar_mean: window must be nonzero");
    if (y.size() < window)
        throw std::invalid_argument("boxcar_mean: fewer samples than window");
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t i = y.size() - window; i < y.size(); ++i) acc += y[i];
    return acc / static_cast<double>(window);
}

/// Single-frequency lock-in estimator: demodulation against a unit
/// reference followed by an order-2 IIR low-pass applied independently to
/// the real and imaginary channels. Estimator state starts at zero.
///
/// `ref_phase_rad` shifts the demodulation reference; pi/2 measures phase
/// relative to sin(2*pi*f*t) (a sine drive), 0 relative to cos.
///
/// Single-writer object: one stream, advanced sequentially. Independent
/// estimators never share state.
class LockIn {
public:
    LockIn(double f_hz, double rate_hz, const BiquadCoeffs& averager, double ref_phase_rad = 0.0)
        : f_hz_(f_hz), rate_hz_(rate_hz), ref_phase_(ref_phase_rad), re_(averager), im_(averager) {
        if (!(rate_hz > 0.0))
            throw std::invalid_argument("LockIn: rate_hz must be positive");
        if (!(f_hz > 0.0) || !(f_hz < rate_hz / 2.0))
            throw std::invalid_argument("LockIn: f_hz outside (0, rate_hz/2)");
        if (!averager.stable())
            throw std::invalid_argument("LockIn: averager filter is unstable");
        // Wrap the sample counter where the demodulation phase is exactly
        // periodic (one second of samples, when both f and rate are whole
        // numbers), so the reference never degrades over long runs.
        if (std::abs(f_hz - std::round(f_hz)) < 1e-9 &&
            std::abs(rate_hz - std::round(rate_hz)) < 1e-9) {
            wrap_ = static_cast<std::uint64_t>(std::llround(rate_hz));
        }
    }

    LockIn(double f_hz, double rate_hz, double cutoff_hz = 10.0, double ref_phase_rad = 0.0)
        : LockIn(f_hz, rate_hz, design_lowpass_iir(cutoff_hz, rate_hz), ref_phase_rad) {}

    /// Advance one sample; returns the updated averaged estimate X*.
    std::complex<double> step(double x_n) {
        const double angle =
            -2.0 * std::numbers::pi * f_hz_ * static_cast<double>(n_) / rate_hz_ + ref_phase_;
        const std::complex<double> y = x_n * std::complex<double>(std::cos(angle), std::sin(angle));
        estimate_ = {re_.step(y.real()), im_.step(y.imag())};
        n_ = wrap_ ? (n_ + 1) % wrap_ : n_ + 1;
        return estimate_;
    }

    std::complex<double> estimate() const { return estimate_; }
    double amplitude() const { return vibro::amplitude(estimate_); }
    double phase_deg() const { return shifted_phase_deg(estimate_); }
    AmplitudePhase amplitude_phase() const { return {amplitude(), phase_deg()}; }
    double frequency_hz() const { return f_hz_; }

    void reset() {
        n_ = 0;
        estimate_ = {0.0, 0.0};
        re_.reset();
        im_.reset();
    }

private:
    double f_hz_;
    double rate_hz_;
    double ref_phase_;
    std::uint64_t n_ = 0;
    std::uint64_t wrap_ = 0;
    std::complex<double> estimate_{0.0, 0.0};
    Biquad re_, im_;
};

} // namespace vibro
