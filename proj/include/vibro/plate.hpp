#pragma once

#include <cmath>
#include <stdexcept>

namespace vibro {

/// Rigid plate on two voice-coil mounts. End 1 carries suspension (k1, b1),
/// end 2 (k2, b2), transducer spacing d. Suspension stiffness and damping
/// may drift linearly in time: k(t) = k + a_k * t.
struct PlateParams {
    double mass_kg = 0.032;
    double inertia = 4e-5; // rotary coupling constant of the end-force model
    double force_constant_n_per_a = 7.4;
    double k1_n_per_m = 22.4e3;
    double k2_n_per_m = 22.9e3;
    double b1_ns_per_m = 0.85;
    double b2_ns_per_m = 0.85;
    double spacing_m = 0.055;

    // per-second linear drift of the suspension parameters
    double drift_k1 = 0.0;
    double drift_k2 = 0.0;
    double drift_b1 = 0.0;
    double drift_b2 = 0.0;

    double k1_at(double t) const { return k1_n_per_m + drift_k1 * t; }
    double k2_at(double t) const { return k2_n_per_m + drift_k2 * t; }
    double b1_at(double t) const { return b1_ns_per_m + drift_b1 * t; }
    double b2_at(double t) const { return b2_ns_per_m + drift_b2 * t; }

    /// Inertial cross-coupling mass of the end-force model, I/(2d).
    double coupling_mass() const { return inertia / (2.0 * spacing_m); }

    void validate() const {
        if (!(mass_kg > 0.0 && inertia > 0.0 && force_constant_n_per_a > 0.0))
            throw std::invalid_argument("PlateParams: mass, inertia, force constant must be positive");
        if (!(k1_n_per_m > 0.0 && k2_n_per_m > 0.0 && b1_ns_per_m > 0.0 && b2_ns_per_m > 0.0))
            throw std::invalid_argument("PlateParams: suspension parameters must be positive");
        if (!(spacing_m > 0.0))
            throw std::invalid_argument("PlateParams: spacing must be positive");
    }
};

/// End displacements/velocities of the plate, meters and meters/second.
struct PlateState {
    double x1 = 0.0;
    double v1 = 0.0;
    double x2 = 0.0;
    double v2 = 0.0;
    double t = 0.0;

    double tilt(double spacing_m) const { return (x2 - x1) / spacing_m; }
    bool finite() const {
        return std::isfinite(x1) && std::isfinite(v1) && std::isfinite(x2) && std::isfinite(v2);
    }
};

} // namespace vibro
