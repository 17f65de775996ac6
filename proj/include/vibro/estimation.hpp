#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vibro/biquad.hpp"
#include "vibro/lockin.hpp"
#include "vibro/plate.hpp"
#include "vibro/sim.hpp"

namespace vibro {

struct EstimationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EstimationConfig {
    double split_hz = 10.0;            // slow/fast complementary split
    double bandpass_q = 10.0;          // resonator at the actuation frequency
    double lockin_cutoff_hz = 10.0;    // impedance lock-in averaging
    double contact_threshold_n = 0.1;
    double contact_hysteresis_n = 0.02;
    double position_floor_n = 0.01;    // minimum |k x_l| per mount for a position fix
    double velocity_floor_m_s = 1e-4;  // minimum velocity lock-in magnitude |X_v|
    double segment_guard_s = 0.25;     // keep-out around segment boundaries in the regression
    double warmup_s = 0.5;             // filter settling, excluded from fits and flags
    std::size_t decimate = 300;        // analysis output every n-th sample
    bool bandlimit_regression = true;  // band-pass the regression channels at the drive frequency
};

// ---------------------------------------------------------------------------
// batch filters

/// Causal 4th-order low-pass: two cascaded 2nd-order Butterworth sections.
inline std::vector<double> lowpass4(std::span<const double> x, double cutoff_hz, double rate_hz) {
    const BiquadCoeffs c = design_lowpass_iir(cutoff_hz, rate_hz);
    Biquad f1(c), f2(c);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f2.step(f1.step(x[i]));
    return out;
}

/// Exact complement of lowpass4: high = x - low, so the two channels sum to
/// the original sample-for-sample.
inline std::vector<double> highpass_complement(std::span<const double> x,
                                               std::span<const double> low) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - low[i];
    return out;
}

/// Constant-peak-gain 2nd-order resonator band-pass.
inline BiquadCoeffs design_bandpass(double f0_hz, double q, double rate_hz) {
    if (!(f0_hz > 0.0) || !(f0_hz < rate_hz / 2.0) || !(q > 0.0))
        throw std::invalid_argument("design_bandpass: bad parameters");
    const double w0 = 2.0 * std::numbers::pi * f0_hz / rate_hz;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    BiquadCoeffs c;
    c.b0 = alpha / a0;
    c.b1 = 0.0;
    c.b2 = -alpha / a0;
    c.a1 = -2.0 * std::cos(w0) / a0;
    c.a2 = (1.0 - alpha) / a0;
    return c;
}

inline std::vector<double> bandpass(std::span<const double> x, double f0_hz, double q,
                                    double rate_hz) {
    Biquad f(design_bandpass(f0_hz, q, rate_hz));
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f.step(x[i]);
    return out;
}

/// Symmetric first difference. Reads one sample ahead (1-sample anticausal);
/// every pipeline channel is evaluated at the same center sample so the
/// group delay cancels in ratios.
inline std::vector<double> central_velocity(std::span<const double> x, double rate_hz) {
    std::vector<double> v(x.size(), 0.0);
    for (std::size_t i = 1; i + 1 < x.size(); ++i) v[i] = (x[i + 1] - x[i - 1]) * rate_hz / 2.0;
    if (x.size() >= 3) {
        v[0] = v[1];
        v[x.size() - 1] = v[x.size() - 2];
    }
    return v;
}

inline std::vector<double> central_acceleration(std::span<const double> x, double rate_hz) {
    std::vector<double> a(x.size(), 0.0);
    for (std::size_t i = 1; i + 1 < x.size(); ++i)
        a[i] = (x[i + 1] - 2.0 * x[i] + x[i - 1]) * rate_hz * rate_hz;
    if (x.size() >= 3) {
        a[0] = a[1];
        a[x.size() - 1] = a[x.size() - 2];
    }
    return a;
}

// ---------------------------------------------------------------------------
// per-sample estimators

/// Normal load from low-passed suspension deflections, W = -(k1 x1 + k2 x2).
inline double estimate_normal_load(double x1_low, double x2_low, double k1, double k2) {
    return -(k1 * x1_low + k2 * x2_low);
}

/// Finger position from the deflection split, P = d / (k2 x2 / (k1 x1) + 1).
/// Defined only for compressive deflections with both mounts carrying at
/// least `floor_n` of load.
inline double estimate_position(double x1_low, double x2_low, double k1, double k2, double d,
                                double floor_n) {
    const double w1 = -k1 * x1_low;
    const double w2 = -k2 * x2_low;
    if (!(w1 > floor_n) || !(w2 > floor_n))
        throw EstimationError("estimate_position: deflections below the determinacy floor");
    return d / (w2 / w1 + 1.0);
}

/// Reaction force on the finger from the force balance,
/// F_f = K (i1 + i2) - F1 - F2.
inline double finger_force(double i1, double i2, double f1, double f2, double force_constant) {
    return force_constant * (i1 + i2) - f1 - f2;
}

// ---------------------------------------------------------------------------
// contact segmentation

struct Segment {
    std::size_t begin = 0; // inclusive
    std::size_t end = 0;   // exclusive
    bool loaded = false;
};

/// Hysteresis thresholding of the load series into alternating
/// loaded/unloaded segments.
inline std::vector<Segment> segment_contacts(std::span<const double> w, double threshold_n,
                                             double hysteresis_n) {
    std::vector<Segment> out;
    if (w.empty()) return out;
    const double rise = threshold_n + hysteresis_n / 2.0;
    const double fall = threshold_n - hysteresis_n / 2.0;
    bool loaded = w[0] > rise;
    std::size_t begin = 0;
    for (std::size_t i = 1; i < w.size(); ++i) {
        const bool next = loaded ? (w[i] > fall) : (w[i] > rise);
        if (next != loaded) {
            out.push_back({begin, i, loaded});
            begin = i;
            loaded = next;
        }
    }
    out.push_back({begin, w.size(), loaded});
    return out;
}

// ---------------------------------------------------------------------------
// suspension regression

struct ParamFit {
    double slope = 0.0;  // per-second drift a
    double value = 0.0;  // base value c, so k(t) = value + slope * t
    double at(double t) const { return value + slope * t; }
};

struct SuspensionFit {
    ParamFit k1, k2, b1, b2;
    double residual_rms_n = 0.0;
    std::size_t samples_used = 0;
};

namespace detail {

struct EndChannels {
    std::vector<double> x, v, a, drive; // drive = K*i - inertial terms
};

/// Least squares of K i - (m/2) xdd -/+ mu*thetadd = (c + a t) x + (c + a t) xd
/// for one end. Returns {a_k, c_k, a_b, c_b}.
inline Eigen::Vector4d fit_end(const std::vector<double>& t, const EndChannels& ch,
                               const std::vector<std::uint8_t>& use) {
    std::size_t n = 0;
    for (auto u : use) n += u;
    if (n < 64) throw EstimationError("fit_suspension: too few unloaded samples");
    Eigen::MatrixXd m(n, 4);
    Eigen::VectorXd rhs(n);
    std::size_t r = 0;
    for (std::size_t i = 0; i < use.size(); ++i) {
        if (!use[i]) continue;
        m(static_cast<Eigen::Index>(r), 0) = ch.x[i];
        m(static_cast<Eigen::Index>(r), 1) = t[i] * ch.x[i];
        m(static_cast<Eigen::Index>(r), 2) = ch.v[i];
        m(static_cast<Eigen::Index>(r), 3) = t[i] * ch.v[i];
        rhs(static_cast<Eigen::Index>(r)) = ch.drive[i];
        ++r;
    }
    // column scaling so the rank check is meaningful for mixed units
    Eigen::Vector4d scale;
    for (int c = 0; c < 4; ++c) {
        scale(c) = m.col(c).norm();
        if (scale(c) == 0.0) throw EstimationError("fit_suspension: no excitation in a regressor");
        m.col(c) /= scale(c);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.singularValues()(3) < 1e-8 * svd.singularValues()(0))
        throw EstimationError("fit_suspension: regression is rank deficient (insufficient excitation)");
    Eigen::Vector4d sol = svd.solve(rhs);
    for (int c = 0; c < 4; ++c) sol(c) /= scale(c);
    return sol; // {c_k, a_k, c_b, a_b} per the column order above
}

} // namespace detail

/// Regress first-order time-varying suspension parameters k(t), b(t) from
/// unloaded trace samples against the end-force balance. `use` marks the
/// samples considered unloaded and settled.
inline SuspensionFit fit_suspension(const SimTrace& tr, const std::vector<std::uint8_t>& use,
                                    const PlateParams& nominal, const EstimationConfig& cfg,
                                    double drive_f_hz) {
    if (use.size() != tr.size())
        throw std::invalid_argument("fit_suspension: mask size mismatch");

    auto maybe_band = [&](std::span<const double> x) {
        if (!cfg.bandlimit_regression) return std::vector<double>(x.begin(), x.end());
        return bandpass(x, drive_f_hz, cfg.bandpass_q, tr.rate_hz);
    };
    const auto x1 = maybe_band(tr.hall1);
    const auto x2 = maybe_band(tr.hall2);
    const auto i1 = maybe_band(tr.i1);
    const auto i2 = maybe_band(tr.i2);
    const auto v1 = central_velocity(x1, tr.rate_hz);
    const auto v2 = central_velocity(x2, tr.rate_hz);
    const auto a1 = central_acceleration(x1, tr.rate_hz);
    const auto a2 = central_acceleration(x2, tr.rate_hz);

    const double mh = nominal.mass_kg / 2.0;
    const double mu = nominal.coupling_mass();
    const double kf = nominal.force_constant_n_per_a;

    detail::EndChannels e1, e2;
    e1.x = x1;
    e1.v = v1;
    e2.x = x2;
    e2.v = v2;
    e1.drive.resize(tr.size());
    e2.drive.resize(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double tilt_acc = a2[i] - a1[i]; // d * thetadd
        e1.drive[i] = kf * i1[i] - mh * a1[i] + mu * tilt_acc;
        e2.drive[i] = kf * i2[i] - mh * a2[i] - mu * tilt_acc;
    }

    const Eigen::Vector4d s1 = detail::fit_end(tr.t, e1, use);
    const Eigen::Vector4d s2 = detail::fit_end(tr.t, e2, use);

    SuspensionFit fit;
    fit.k1 = {s1(1), s1(0)};
    fit.b1 = {s1(3), s1(2)};
    fit.k2 = {s2(1), s2(0)};
    fit.b2 = {s2(3), s2(2)};

    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (!use[i]) continue;
        const double r1 = e1.drive[i] - fit.k1.at(tr.t[i]) * x1[i] - fit.b1.at(tr.t[i]) * v1[i];
        const double r2 = e2.drive[i] - fit.k2.at(tr.t[i]) * x2[i] - fit.b2.at(tr.t[i]) * v2[i];
        acc += r1 * r1 + r2 * r2;
        n += 2;
    }
    fit.residual_rms_n = n ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
    fit.samples_used = n / 2;
    return fit;
}

// ---------------------------------------------------------------------------
// device forces and impedance

struct DeviceForceSeries {
    std::vector<double> f1, f2;
};

/// Suspension + inertial forces at each mount from the high-passed motion,
/// with (possibly drifted) fitted parameters.
inline DeviceForceSeries device_forces(std::span<const double> t, std::span<const double> x1_high,
                                       std::span<const double> x2_high, double rate_hz,
                                       const SuspensionFit& fit, const PlateParams& nominal) {
    const auto v1 = central_velocity(x1_high, rate_hz);
    const auto v2 = central_velocity(x2_high, rate_hz);
    const auto a1 = central_acceleration(x1_high, rate_hz);
    const auto a2 = central_acceleration(x2_high, rate_hz);
    const double mh = nominal.mass_kg / 2.0;
    const double mu = nominal.coupling_mass();
    DeviceForceSeries out;
    out.f1.resize(t.size());
    out.f2.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double tilt_acc = a2[i] - a1[i];
        out.f1[i] = fit.k1.at(t[i]) * x1_high[i] + fit.b1.at(t[i]) * v1[i] + mh * a1[i] - mu * tilt_acc;
        out.f2[i] = fit.k2.at(t[i]) * x2_high[i] + fit.b2.at(t[i]) * v2[i] + mh * a2[i] + mu * tilt_acc;
    }
    return out;
}

struct ImpedanceSeries {
    double f_hz = 0.0;
    std::vector<double> t;
    std::vector<double> zmag;        // N·s/m, low-passed
    std::vector<std::uint8_t> valid; // velocity above floor
};

/// Time-resolved impedance magnitude: force and velocity are band-passed at
/// the actuation frequency, taken to phasor form by identical lock-ins, and
/// the magnitude quotient is low-passed. Samples with velocity below the
/// noise floor are flagged invalid rather than emitted as numbers.
inline ImpedanceSeries lockin_impedance(std::span<const double> t, std::span<const double> force_n,
                                        std::span<const double> velocity_m_s, double rate_hz,
                                        double f_hz, const EstimationConfig& cfg) {
    if (t.size() != force_n.size() || t.size() != velocity_m_s.size())
        throw std::invalid_argument("lockin_impedance: size mismatch");
    const auto fb = bandpass(force_n, f_hz, cfg.bandpass_q, rate_hz);
    const auto vb = bandpass(velocity_m_s, f_hz, cfg.bandpass_q, rate_hz);
    const BiquadCoeffs avg = design_lowpass_iir(cfg.lockin_cutoff_hz, rate_hz);
    LockIn li_f(f_hz, rate_hz, avg);
    LockIn li_v(f_hz, rate_hz, avg);
    Biquad lp(design_lowpass_iir(cfg.lockin_cutoff_hz, rate_hz));

    ImpedanceSeries out;
    out.f_hz = f_hz;
    out.t.assign(t.begin(), t.end());
    out.zmag.resize(t.size());
    out.valid.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto xf = li_f.step(fb[i]);
        const auto xv = li_v.step(vb[i]);
        const bool ok = std::abs(xv) > cfg.velocity_floor_m_s / 2.0;
        const double z = ok ? std::abs(xf) / std::abs(xv) : 0.0;
        out.zmag[i] = lp.step(z);
        out.valid[i] = ok;
    }
    return out;
}

// ---------------------------------------------------------------------------
// full pipeline

struct AnalysisSample {
    double t = 0.0;
    double w = 0.0;
    double p = 0.0;
    double zmag = 0.0;
    bool valid = false;
};

struct AnalysisResult {
    double f_hz = 0.0;
    std::vector<AnalysisSample> samples; // decimated
    SuspensionFit fit;
    std::vector<Segment> segments;       // at full trace rate
};

/// Batch identification over one trace: slow/fast split, load and position,
/// contact segmentation, suspension regression on the unloaded parts,
/// device-force subtraction, and lock-in impedance at the drive frequency.
inline AnalysisResult run_identification(const SimTrace& tr, double f_hz,
                                         const PlateParams& nominal,
                                         const EstimationConfig& cfg = {}) {
    if (tr.size() < 16) throw EstimationError("run_identification: trace too short");
    const double rate = tr.rate_hz;
    const double d = nominal.spacing_m;

    // slow/fast split of every consumed channel
    const auto x1_l = lowpass4(tr.hall1, cfg.split_hz, rate);
    const auto x2_l = lowpass4(tr.hall2, cfg.split_hz, rate);
    const auto x1_h = highpass_complement(tr.hall1, x1_l);
    const auto x2_h = highpass_complement(tr.hall2, x2_l);
    const auto i1_l = lowpass4(tr.i1, cfg.split_hz, rate);
    const auto i2_l = lowpass4(tr.i2, cfg.split_hz, rate);
    const auto i1_h = highpass_complement(tr.i1, i1_l);
    const auto i2_h = highpass_complement(tr.i2, i2_l);

    // load with nominal parameters for segmentation
    std::vector<double> w_nominal(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i)
        w_nominal[i] = estimate_normal_load(x1_l[i], x2_l[i], nominal.k1_n_per_m, nominal.k2_n_per_m);
    const auto segments = segment_contacts(w_nominal, cfg.contact_threshold_n, cfg.contact_hysteresis_n);

    // unloaded mask with warm-up and boundary guards
    std::vector<std::uint8_t> unloaded(tr.size(), 0);
    const std::size_t guard = static_cast<std::size_t>(cfg.segment_guard_s * rate);
    const std::size_t warm = static_cast<std::size_t>(cfg.warmup_s * rate);
    for (const auto& s : segments) {
        if (s.loaded) continue;
        const std::size_t b = std::max({s.begin + (s.begin > 0 ? guard : 0), warm});
        const std::size_t e = s.end - (s.end < tr.size() ? std::min(guard, s.end) : 0);
        for (std::size_t i = b; i < e && i < tr.size(); ++i) unloaded[i] = 1;
    }

    AnalysisResult out;
    out.f_hz = f_hz;
    out.segments = segments;
    out.fit = fit_suspension(tr, unloaded, nominal, cfg, f_hz);

    // final load/position with fitted parameters
    std::vector<double> w(tr.size()), p(tr.size());
    std::vector<std::uint8_t> p_ok(tr.size(), 0);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double k1 = out.fit.k1.at(tr.t[i]);
        const double k2 = out.fit.k2.at(tr.t[i]);
        w[i] = estimate_normal_load(x1_l[i], x2_l[i], k1, k2);
        const double w1 = -k1 * x1_l[i], w2 = -k2 * x2_l[i];
        if (w1 > cfg.position_floor_n && w2 > cfg.position_floor_n) {
            p[i] = d / (w2 / w1 + 1.0);
            p_ok[i] = 1;
        } else {
            p[i] = i > 0 ? p[i - 1] : d / 2.0;
        }
    }

    // dynamic decomposition and impedance
    const auto dev = device_forces(tr.t, x1_h, x2_h, rate, out.fit, nominal);
    std::vector<double> ff(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i)
        ff[i] = finger_force(i1_h[i], i2_h[i], dev.f1[i], dev.f2[i], nominal.force_constant_n_per_a);

    const auto v1 = central_velocity(x1_h, rate);
    const auto v2 = central_velocity(x2_h, rate);
    std::vector<double> v_p(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double l1 = std::clamp(p[i] / d, 0.0, 1.0);
        v_p[i] = l1 * v1[i] + (1.0 - l1) * v2[i];
    }
    const auto zmag = lockin_impedance(tr.t, ff, v_p, rate, f_hz, cfg);

    // loaded flag per sample for validity
    std::vector<std::uint8_t> loaded(tr.size(), 0);
    for (const auto& s : segments)
        if (s.loaded)
            for (std::size_t i = s.begin; i < s.end; ++i) loaded[i] = 1;

    const std::size_t dec = std::max<std::size_t>(1, cfg.decimate);
    for (std::size_t i = 0; i < tr.size(); i += dec) {
        AnalysisSample s;
        s.t = tr.t[i];
        s.w = w[i];
        s.p = p[i];
        s.zmag = zmag.zmag[i];
        s.valid = zmag.valid[i] && loaded[i] && p_ok[i] && tr.t[i] >= cfg.warmup_s;
        out.samples.push_back(s);
    }
    return out;
}

} // namespace vibro
