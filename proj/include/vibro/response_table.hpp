#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vibro/plate.hpp"

namespace vibro {

/// Unloaded plant gain versus frequency, used as the feed-forward lookup.
/// Lookups interpolate linearly in log-frequency: geometrically in
/// magnitude, linearly in unwrapped phase. No extrapolation.
class FrequencyResponseTable {
public:
    FrequencyResponseTable(std::vector<double> f_hz, std::vector<std::complex<double>> gain) {
        if (f_hz.size() != gain.size() || f_hz.size() < 2)
            throw std::invalid_argument("FrequencyResponseTable: need >= 2 matching nodes");
        for (std::size_t i = 0; i < f_hz.size(); ++i) {
            if (!(f_hz[i] > 0.0) || (i > 0 && !(f_hz[i] > f_hz[i - 1])))
                throw std::invalid_argument("FrequencyResponseTable: frequencies must be positive and strictly increasing");
            if (!(std::abs(gain[i]) > 0.0) || !std::isfinite(std::abs(gain[i])))
                throw std::invalid_argument("FrequencyResponseTable: gains must be finite and nonzero");
        }
        log_f_.resize(f_hz.size());
        log_mag_.resize(f_hz.size());
        phase_rad_.resize(f_hz.size());
        double prev_phase = std::arg(gain[0]);
        for (std::size_t i = 0; i < f_hz.size(); ++i) {
            log_f_[i] = std::log(f_hz[i]);
            log_mag_[i] = std::log(std::abs(gain[i]));
            double ph = std::arg(gain[i]);
            // unwrap against the previous node
            while (ph - prev_phase > std::numbers::pi) ph -= 2.0 * std::numbers::pi;
            while (ph - prev_phase < -std::numbers::pi) ph += 2.0 * std::numbers::pi;
            phase_rad_[i] = ph;
            prev_phase = ph;
        }
        f_ = std::move(f_hz);
    }

    std::complex<double> at(double f_hz) const {
        if (!(f_hz >= f_.front() && f_hz <= f_.back()))
            throw std::out_of_range("FrequencyResponseTable: frequency outside table range");
        const auto it = std::lower_bound(f_.begin(), f_.end(), f_hz);
        std::size_t hi = static_cast<std::size_t>(it - f_.begin());
        if (hi == 0) hi = 1;
        const std::size_t lo = hi - 1;
        const double lf = std::log(f_hz);
        const double a = (lf - log_f_[lo]) / (log_f_[hi] - log_f_[lo]);
        const double mag = std::exp(log_mag_[lo] + a * (log_mag_[hi] - log_mag_[lo]));
        const double ph = phase_rad_[lo] + a * (phase_rad_[hi] - phase_rad_[lo]);
        return std::polar(mag, ph);
    }

    double magnitude_at(double f_hz) const { return std::abs(at(f_hz)); }
    const std::vector<double>& frequencies() const { return f_; }

    std::size_t peak_index() const {
        return static_cast<std::size_t>(
            std::max_element(log_mag_.begin(), log_mag_.end()) - log_mag_.begin());
    }

private:
    std::vector<double> f_;
    std::vector<double> log_f_;
    std::vector<double> log_mag_;
    std::vector<double> phase_rad_;
};

/// Feed-forward lookup per the table's interpolation rule.
inline std::complex<double> plant_feedforward(const FrequencyResponseTable& table, double f_hz) {
    return table.at(f_hz);
}

/// Analytic center-displacement response of the unloaded plate to a common
/// drive current on both coils, evaluated from the end-force model.
inline std::complex<double> plate_center_response(const PlateParams& p, double f_hz) {
    const double w = 2.0 * std::numbers::pi * f_hz;
    const double mu = p.coupling_mass();
    const double mh = p.mass_kg / 2.0;
    const std::complex<double> jw(0.0, w);
    // [ -w^2(mh+mu) + jw b1 + k1,        w^2 mu        ] [x1]   [K]
    // [        w^2 mu,            -w^2(mh+mu) + jw b2 + k2 ] [x2] = [K]
    const std::complex<double> a11 = -w * w * (mh + mu) + jw * p.b1_ns_per_m + p.k1_n_per_m;
    const std::complex<double> a22 = -w * w * (mh + mu) + jw * p.b2_ns_per_m + p.k2_n_per_m;
    const std::complex<double> a12 = w * w * mu;
    const std::complex<double> det = a11 * a22 - a12 * a12;
    const double k = p.force_constant_n_per_a;
    const std::complex<double> x1 = (a22 * k - a12 * k) / det;
    const std::complex<double> x2 = (a11 * k - a12 * k) / det;
    return 0.5 * (x1 + x2);
}

/// Build the feed-forward table from the simulated unloaded plant on a
/// log-spaced grid.
inline FrequencyResponseTable build_plate_response_table(const PlateParams& p, double f_lo_hz = 20.0,
                                                         double f_hi_hz = 400.0, int n_nodes = 201) {
    if (n_nodes < 2) throw std::invalid_argument("build_plate_response_table: need >= 2 nodes");
    std::vector<double> f(static_cast<std::size_t>(n_nodes));
    std::vector<std::complex<double>> g(static_cast<std::size_t>(n_nodes));
    const double l0 = std::log10(f_lo_hz), l1 = std::log10(f_hi_hz);
    for (int i = 0; i < n_nodes; ++i) {
        f[static_cast<std::size_t>(i)] = std::pow(10.0, l0 + (l1 - l0) * i / (n_nodes - 1));
        g[static_cast<std::size_t>(i)] = plate_center_response(p, f[static_cast<std::size_t>(i)]);
    }
    return FrequencyResponseTable(std::move(f), std::move(g));
}

} // namespace vibro
