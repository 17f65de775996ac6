#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vibro {

/// Whole-finger lumped contact model: mass, damper, spring to ground,
/// driven at the skin node. SI units (kg, N·s/m, N/m).
struct Order2Params {
    double m = 0.0;
    double b = 0.0;
    double k = 0.0;

    void validate() const {
        if (!(m > 0.0 && b > 0.0 && k > 0.0))
            throw std::invalid_argument("Order2Params: all parameters must be positive");
    }
};

/// Skin/tissue layer (m_s, b_s, k_s) riding on a separately suspended
/// phalanx (m_p, b_p, k_p). The skin node contacts the surface; the skin
/// spring/damper couple it to the phalanx node. SI units.
struct Order4Params {
    double mp = 0.0, bp = 0.0, kp = 0.0;
    double ms = 0.0, bs = 0.0, ks = 0.0;

    void validate() const {
        if (!(mp > 0.0 && bp > 0.0 && kp > 0.0 && ms > 0.0 && bs > 0.0 && ks > 0.0))
            throw std::invalid_argument("Order4Params: all parameters must be positive");
    }
};

/// Published parameter presets. Units in the source table are g, N·s/m and
/// N/mm; converted to SI here. The phalanx row equals the whole-finger row.
inline Order2Params preset_order2(const std::string& name) {
    if (name == "w_lt_0.5") return {4.0e-3, 1.0, 0.2e3};
    if (name == "w_gt_0.5") return {4.0e-3, 1.5, 0.3e3};
    throw std::invalid_argument("unknown finger preset: " + name);
}

inline Order4Params preset_order4(const std::string& name) {
    if (name == "w_lt_0.5") return {4.0e-3, 1.0, 0.2e3, 0.2e-3, 1.5, 1.0e3};
    if (name == "w_gt_0.5") return {4.0e-3, 1.5, 0.3e3, 0.2e-3, 8.0, 8.0e3};
    throw std::invalid_argument("unknown finger preset: " + name);
}

inline std::complex<double> s_of(double f_hz) {
    return {0.0, 2.0 * std::numbers::pi * f_hz};
}

/// Mechanical impedance at the contact, (m s^2 + b s + k)/s.
inline std::complex<double> impedance(const Order2Params& p, double f_hz) {
    if (!(f_hz > 0.0)) throw std::invalid_argument("impedance: f_hz must be positive");
    const auto s = s_of(f_hz);
    return (p.m * s * s + p.b * s + p.k) / s;
}

namespace detail {
/// Quartic numerator shared by all 4th-order transfer functions.
inline std::complex<double> quartic_a(const Order4Params& p, std::complex<double> s) {
    const auto s2 = s * s, s3 = s2 * s, s4 = s3 * s;
    return p.ms * p.mp * s4 + (p.ms * (p.bp + p.bs) + p.mp * p.bs) * s3 +
           (p.ms * (p.ks + p.kp) + p.mp * p.ks + p.bs * p.bp) * s2 +
           (p.bs * p.kp + p.bp * p.ks) * s + p.ks * p.kp;
}
inline std::complex<double> skin_velocity_num(const Order4Params& p, std::complex<double> s) {
    return p.mp * s * s * s + (p.bp + p.bs) * s * s + (p.kp + p.ks) * s;
}
} // namespace detail

/// Impedance at the skin periphery of the two-node model.
inline std::complex<double> impedance(const Order4Params& p, double f_hz) {
    if (!(f_hz > 0.0)) throw std::invalid_argument("impedance: f_hz must be positive");
    const auto s = s_of(f_hz);
    return detail::quartic_a(p, s) / detail::skin_velocity_num(p, s);
}

/// Skin velocity per unit peripheral force, V_s/F = 1/Z_s.
inline std::complex<double> skin_admittance(const Order4Params& p, double f_hz) {
    if (!(f_hz > 0.0)) throw std::invalid_argument("skin_admittance: f_hz must be positive");
    const auto s = s_of(f_hz);
    return detail::skin_velocity_num(p, s) / detail::quartic_a(p, s);
}

/// Phalanx velocity per unit peripheral force, V_p/F = (b_s s^2 + k_s s)/A.
inline std::complex<double> phalanx_velocity_tf(const Order4Params& p, double f_hz) {
    if (!(f_hz > 0.0)) throw std::invalid_argument("phalanx_velocity_tf: f_hz must be positive");
    const auto s = s_of(f_hz);
    return (p.bs * s * s + p.ks * s) / detail::quartic_a(p, s);
}

/// Velocity of the skin tissue relative to the phalanx,
/// V_t/F = (m_p s^3 + b_p s^2 + k_p s)/A.
inline std::complex<double> tissue_velocity_tf(const Order4Params& p, double f_hz) {
    if (!(f_hz > 0.0)) throw std::invalid_argument("tissue_velocity_tf: f_hz must be positive");
    const auto s = s_of(f_hz);
    return (p.mp * s * s * s + p.bp * s * s + p.kp * s) / detail::quartic_a(p, s);
}

/// One intensity-matched trial: plate velocity v against the friction-force
/// amplitude F_a it matched, the reaction force F_r it produced, and the
/// concurrent normal load W.
struct MatchRecord {
    double f_hz = 0.0;
    double v = 0.0;   // m/s
    double f_a = 0.0; // N
    double f_r = 0.0; // N
    double w = 0.0;   // N
    std::string subject_id;
};

/// Reaction-to-friction force ratio at matched intensity.
inline double beta(const MatchRecord& r) {
    if (!(r.f_a > 0.0)) throw std::domain_error("beta: F_a must be positive");
    return r.f_r / r.f_a;
}

/// Population standard deviation over mean.
inline double coefficient_of_variation(std::span<const double> samples) {
    if (samples.empty())
        throw std::invalid_argument("coefficient_of_variation: empty sample set");
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(samples.size());
    if (mean == 0.0) throw std::domain_error("coefficient_of_variation: zero mean");
    double var = 0.0;
    for (double v : samples) var += (v - mean) * (v - mean);
    var /= static_cast<double>(samples.size());
    return std::sqrt(var) / mean;
}

} // namespace vibro
