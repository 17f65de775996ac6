#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vibro/biquad.hpp"
#include "vibro/contact.hpp"
#include "vibro/control.hpp"
#include "vibro/lockin.hpp"
#include "vibro/noise.hpp"
#include "vibro/plate.hpp"
#include "vibro/response_table.hpp"
#include "vibro/synthesis.hpp"

namespace vibro {

/// Piecewise-linear profile; evaluation clamps to the end values.
class PiecewiseLinear {
public:
    PiecewiseLinear() = default;
    explicit PiecewiseLinear(double constant) : t_{0.0}, v_{constant} {}
    PiecewiseLinear(std::vector<double> t, std::vector<double> v) : t_(std::move(t)), v_(std::move(v)) {
        if (t_.size() != v_.size() || t_.empty())
            throw std::invalid_argument("PiecewiseLinear: need matching nonempty breakpoints");
        for (std::size_t i = 1; i < t_.size(); ++i)
            if (!(t_[i] > t_[i - 1]))
                throw std::invalid_argument("PiecewiseLinear: breakpoints must increase");
    }

    double operator()(double t) const {
        if (t_.empty()) return 0.0;
        if (t <= t_.front()) return v_.front();
        if (t >= t_.back()) return v_.back();
        const auto it = std::upper_bound(t_.begin(), t_.end(), t);
        const std::size_t hi = static_cast<std::size_t>(it - t_.begin());
        const std::size_t lo = hi - 1;
        const double a = (t - t_[lo]) / (t_[hi] - t_[lo]);
        return v_[lo] + a * (v_[hi] - v_[lo]);
    }

    bool empty() const { return t_.empty(); }
    const std::vector<double>& knots() const { return t_; }
    const std::vector<double>& values() const { return v_; }

private:
    std::vector<double> t_;
    std::vector<double> v_;
};

struct ContactWindow {
    double t_on = 0.0;
    double t_off = 0.0;
};

/// Commanded touch: which finger model, when it is on the plate, and the
/// slowly varying load/position profiles. The position coordinate runs
/// from 0 at transducer 2 to `spacing` at transducer 1, matching the
/// load-split convention of the position estimator.
struct TouchScenario {
    FingerSpec finger;
    std::vector<ContactWindow> windows;
    PiecewiseLinear load_n{0.0};
    PiecewiseLinear position_m{0.0275};

    bool active(double t) const {
        for (const auto& w : windows)
            if (t >= w.t_on && t < w.t_off) return true;
        return false;
    }
};

struct DriveConfig {
    double f_hz = 261.0;
    double a_ref_m = 10e-6;
    bool phase_control = true;
    double amp_bandwidth_hz = 5.0;
    double phase_bandwidth_hz = 5.0;
    double lockin_cutoff_hz = 10.0;
};

/// Additive tone on the controller's sensed signal, for sensing-error
/// studies. Does not touch the recorded hall columns.
struct SensedTone {
    double f_hz = 0.0;
    double amplitude_m = 0.0;
};

struct SimConfig {
    PlateParams plate;
    DriveConfig drive;
    TouchScenario touch;
    double duration_s = 2.0;
    double sensor_sigma_m = 1e-6;
    std::uint64_t seed = 0;
    double plant_rate_hz = 30000.0;
    double control_rate_hz = 5000.0;
    std::vector<SensedTone> sensed_tones;
    double displacement_limit_m = 2e-3; // instability abort threshold
    double tilt_limit_rad = 0.05;

    void validate() const {
        plate.validate();
        touch.finger.validate();
        if (!(duration_s >= 0.0)) throw std::invalid_argument("SimConfig: negative duration");
        if (!(drive.f_hz >= 20.0 && drive.f_hz <= 400.0))
            throw std::invalid_argument("SimConfig: drive frequency outside 20-400 Hz");
        if (!(drive.a_ref_m >= 0.0)) throw std::invalid_argument("SimConfig: negative reference");
        if (drive.a_ref_m > 1e-3)
            throw std::invalid_argument("SimConfig: reference beyond 1 mm displacement range");
        if (2.0 * std::numbers::pi * drive.f_hz * drive.a_ref_m > 0.06)
            throw std::invalid_argument("SimConfig: reference beyond 0.06 m/s velocity range");
        const double r = plant_rate_hz / control_rate_hz;
        if (std::abs(r - std::round(r)) > 1e-9 || r < 1.0)
            throw std::invalid_argument("SimConfig: plant rate must be an integer multiple of control rate");
        for (const auto& w : touch.windows)
            if (!(w.t_off > w.t_on)) throw std::invalid_argument("SimConfig: empty contact window");
    }
};

/// Uniformly sampled record of one simulation. Column meanings match the
/// CSV schema: displacements/reads in meters, currents in amperes, a_cmd is
/// the commanded drive-current amplitude, ph_cmd the transducer-2 phase
/// offset in degrees, f_finger the dynamic reaction force on the finger,
/// W_true/P_true the commanded load and position.
struct SimTrace {
    double rate_hz = 30000.0;
    std::vector<double> t, x1, x2, hall1, hall2, i1, i2, a_cmd, ph_cmd, f_finger, w_true, p_true;

    std::size_t size() const { return t.size(); }
    void reserve(std::size_t n) {
        for (auto* v : {&t, &x1, &x2, &hall1, &hall2, &i1, &i2, &a_cmd, &ph_cmd, &f_finger, &w_true, &p_true})
            v->reserve(n);
    }

    std::size_t saturated_ticks = 0;
};

struct SimAbortError : std::runtime_error {
    SimAbortError(const std::string& msg, SimTrace partial_trace)
        : std::runtime_error(msg), partial(std::move(partial_trace)) {}
    SimTrace partial;
};

namespace detail {

/// Coupled plate + finger dynamics, integrated with fixed-step RK4. The
/// plate follows the end-force model (per-end half mass with the rotary
/// coupling term); the contact force enters through the lever ratios of the
/// finger position, and the glued finger mass joins the mass matrix.
class PlantIntegrator {
public:
    PlantIntegrator(const PlateParams& plate, const TouchScenario& touch, double dt)
        : p_(plate), touch_(touch), dt_(dt) {}

    struct Derivs {
        std::array<double, 6> dy{};
        double reaction = 0.0; // dynamic force on the finger
    };

    // y = {x1, v1, x2, v2, xp, vp}
    Derivs eval(const std::array<double, 6>& y, double t, double i1, double i2) const {
        Derivs d;
        const double k1 = p_.k1_at(t), k2 = p_.k2_at(t);
        const double b1 = p_.b1_at(t), b2 = p_.b2_at(t);
        double g1 = p_.force_constant_n_per_a * i1 - k1 * y[0] - b1 * y[1];
        double g2 = p_.force_constant_n_per_a * i2 - k2 * y[2] - b2 * y[3];

        const double mu = p_.coupling_mass();
        const double mh = p_.mass_kg / 2.0;
        double m11 = mh + mu, m22 = mh + mu, m12 = -mu;

        double ap = 0.0;
        double spring_part = 0.0, mc = 0.0, l1 = 0.0, l2 = 0.0;
        if (engaged_) {
            const double w = std::max(0.0, touch_.load_n(t));
            const double pos = std::clamp(touch_.position_m(t), 0.0, p_.spacing_m);
            l1 = pos / p_.spacing_m;
            l2 = 1.0 - l1;
            const double s = l1 * y[0] + l2 * y[2] - x_ref_;
            const double sd = l1 * y[1] + l2 * y[3];

            if (const auto* o2 = std::get_if<Order2Params>(&touch_.finger.model)) {
                spring_part = o2->b * sd + o2->k * s;
                mc = o2->m;
            } else if (const auto* o4 = std::get_if<Order4Params>(&touch_.finger.model)) {
                const Order4Params fp = touch_.finger.scaling.apply(*o4, w);
                spring_part = fp.bs * (sd - y[5]) + fp.ks * (s - y[4]);
                mc = fp.ms;
                ap = (-fp.bp * y[5] - fp.kp * y[4] + spring_part) / fp.mp;
            }
            const double fc = -w - spring_part; // force on the plate
            g1 += l1 * fc;
            g2 += l2 * fc;
            m11 += mc * l1 * l1;
            m22 += mc * l2 * l2;
            m12 += mc * l1 * l2;
        }

        const double det = m11 * m22 - m12 * m12;
        const double a1 = (m22 * g1 - m12 * g2) / det;
        const double a2 = (m11 * g2 - m12 * g1) / det;
        d.dy = {y[1], a1, y[3], a2, y[5], ap};
        d.reaction = spring_part + mc * (l1 * a1 + l2 * a2);
        return d;
    }

    /// Advance one plant step. `currents` yields (i1, i2) at absolute time.
    Derivs step(std::array<double, 6>& y, double t,
                const std::function<std::pair<double, double>(double)>& currents) {
        update_contact(y, t);
        auto at = [&](const std::array<double, 6>& s, double tau) {
            const auto [i1, i2] = currents(tau);
            return eval(s, tau, i1, i2);
        };
        const Derivs k1 = at(y, t);
        const Derivs k2 = at(shifted(y, k1.dy, dt_ / 2.0), t + dt_ / 2.0);
        const Derivs k3 = at(shifted(y, k2.dy, dt_ / 2.0), t + dt_ / 2.0);
        const Derivs k4 = at(shifted(y, k3.dy, dt_), t + dt_);
        for (std::size_t i = 0; i < 6; ++i)
            y[i] += dt_ / 6.0 * (k1.dy[i] + 2.0 * k2.dy[i] + 2.0 * k3.dy[i] + k4.dy[i]);
        return k1;
    }

    bool engaged() const { return engaged_; }

private:
    static std::array<double, 6> shifted(const std::array<double, 6>& y,
                                         const std::array<double, 6>& dy, double h) {
        std::array<double, 6> out;
        for (std::size_t i = 0; i < 6; ++i) out[i] = y[i] + h * dy[i];
        return out;
    }

    void update_contact(std::array<double, 6>& y, double t) {
        const bool want = touch_.finger.present() && touch_.active(t);
        if (want && !engaged_) {
            const double pos = std::clamp(touch_.position_m(t), 0.0, p_.spacing_m);
            const double l1 = pos / p_.spacing_m;
            x_ref_ = l1 * y[0] + (1.0 - l1) * y[2];
            y[4] = y[5] = 0.0;
            engaged_ = true;
        } else if (!want && engaged_) {
            engaged_ = false;
        }
    }

    PlateParams p_;
    TouchScenario touch_;
    double dt_;
    bool engaged_ = false;
    double x_ref_ = 0.0;
};

} // namespace detail

/// Synthesize one loop-shaped discrete controller: 2nd-order low-pass
/// target of the given bandwidth against the estimator filter dynamics,
/// reduced to 2nd order and discretized at the control rate.
inline BiquadCoeffs synthesize_channel_controller(double bandwidth_hz, double filter_cutoff_hz,
                                                  double control_rate_hz) {
    const ContinuousTF target = sensitivity_target(bandwidth_hz);
    const ContinuousTF filter = butterworth2_lowpass(filter_cutoff_hz);
    const ContinuousTF full = solve_controller(target, filter);
    const ContinuousTF reduced = reduce_order(full);
    return discretize_tustin(reduced, control_rate_hz);
}

/// Full closed-loop run: plant stepped at the DAQ rate, sensing/lock-in/
/// control at the embedded rate, drive currents reconstructed from the
/// commanded amplitude and phase. Aborts with the partial trace when the
/// displacement range or the small-tilt assumption is exceeded.
inline SimTrace run_closed_loop(const SimConfig& cfg) {
    cfg.validate();
    const double dt = 1.0 / cfg.plant_rate_hz;
    const std::size_t steps = static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.plant_rate_hz));
    const std::size_t per_tick = static_cast<std::size_t>(std::llround(cfg.plant_rate_hz / cfg.control_rate_hz));

    const FrequencyResponseTable table = build_plate_response_table(cfg.plate);
    const BiquadCoeffs amp_ctrl =
        synthesize_channel_controller(cfg.drive.amp_bandwidth_hz, cfg.drive.lockin_cutoff_hz,
                                      cfg.control_rate_hz);
    const BiquadCoeffs phase_ctrl =
        cfg.drive.phase_bandwidth_hz == cfg.drive.amp_bandwidth_hz
            ? amp_ctrl
            : synthesize_channel_controller(cfg.drive.phase_bandwidth_hz, cfg.drive.lockin_cutoff_hz,
                                            cfg.control_rate_hz);

    ControlChannel amp_channel(cfg.drive.a_ref_m, amp_ctrl, 0.0);
    ControlChannel phase_channel(0.0, phase_ctrl);

    const BiquadCoeffs averager = design_lowpass_iir(cfg.drive.lockin_cutoff_hz, cfg.control_rate_hz);
    // sine drive reference: estimates read as displacement-vs-current lag
    const double ref_phase = std::numbers::pi / 2.0;
    LockIn lockin_center(cfg.drive.f_hz, cfg.control_rate_hz, averager, ref_phase);
    LockIn lockin_end1(cfg.drive.f_hz, cfg.control_rate_hz, averager, ref_phase);
    LockIn lockin_end2(cfg.drive.f_hz, cfg.control_rate_hz, averager, ref_phase);

    // validity floor for phase feedback: 3 sigma of the filtered noise on
    // each quadrature channel
    const double enbw = 1.1107 * cfg.drive.lockin_cutoff_hz;
    const double phase_floor =
        std::max(1e-15, 3.0 * cfg.sensor_sigma_m * std::sqrt(enbw / cfg.control_rate_hz));

    HallSensor hall1(cfg.sensor_sigma_m, GaussianStream::derive(cfg.seed, 1));
    HallSensor hall2(cfg.sensor_sigma_m, GaussianStream::derive(cfg.seed, 2));

    detail::PlantIntegrator plant(cfg.plate, cfg.touch, dt);
    std::array<double, 6> y{};

    SimTrace trace;
    trace.rate_hz = cfg.plant_rate_hz;
    trace.reserve(steps);

    double amp_a = 0.0;      // drive current amplitude, amperes
    double phase_deg = 0.0;  // transducer 2 offset
    const double w0 = 2.0 * std::numbers::pi * cfg.drive.f_hz;
    auto currents = [&](double tau) {
        return std::pair<double, double>{
            amp_a * std::sin(w0 * tau),
            amp_a * std::sin(w0 * tau + phase_deg * std::numbers::pi / 180.0)};
    };

    for (std::size_t n = 0; n < steps; ++n) {
        const double t = static_cast<double>(n) * dt;
        const double h1 = hall1.read(y[0]);
        const double h2 = hall2.read(y[2]);

        if (n % per_tick == 0) {
            double inj = 0.0;
            for (const auto& tone : cfg.sensed_tones)
                inj += tone.amplitude_m * std::sin(2.0 * std::numbers::pi * tone.f_hz * t);
            const auto xc = lockin_center.step((h1 + inj + h2 + inj) / 2.0);
            const auto x1e = lockin_end1.step(h1 + inj);
            const auto x2e = lockin_end2.step(h2 + inj);

            AmplitudePhase est;
            est.amplitude = amplitude(xc);
            bool phase_valid = cfg.drive.phase_control && std::abs(x1e) > phase_floor &&
                               std::abs(x2e) > phase_floor;
            est.phase_deg =
                phase_valid ? shifted_phase_deg(x2e) - shifted_phase_deg(x1e) : 0.0;

            const ControlCommand cmd =
                control_step(amp_channel, phase_channel, est, cfg.drive.f_hz, table, phase_valid);
            amp_a = cmd.current_amplitude_a;
            if (cfg.drive.phase_control) phase_deg = cmd.phase_offset_deg;
            if (cmd.amplitude_saturated) ++trace.saturated_ticks;
        }

        const auto [ia, ib] = currents(t);
        trace.t.push_back(t);
        trace.x1.push_back(y[0]);
        trace.x2.push_back(y[2]);
        trace.hall1.push_back(h1);
        trace.hall2.push_back(h2);
        trace.i1.push_back(ia);
        trace.i2.push_back(ib);
        trace.a_cmd.push_back(amp_a);
        trace.ph_cmd.push_back(phase_deg);

        // step() first settles the contact state for time t, so the load
        // bookkeeping and reaction force are recorded after it
        const auto derivs = plant.step(y, t, currents);
        trace.f_finger.push_back(derivs.reaction);
        trace.w_true.push_back(plant.engaged() ? std::max(0.0, cfg.touch.load_n(t)) : 0.0);
        trace.p_true.push_back(std::clamp(cfg.touch.position_m(t), 0.0, cfg.plate.spacing_m));

        if (std::abs(y[0]) > cfg.displacement_limit_m || std::abs(y[2]) > cfg.displacement_limit_m)
            throw SimAbortError("instability: displacement range exceeded at t = " + std::to_string(t),
                                std::move(trace));
        if (std::abs((y[2] - y[0]) / cfg.plate.spacing_m) > cfg.tilt_limit_rad)
            throw SimAbortError("tilt invariant violated at t = " + std::to_string(t), std::move(trace));
        if (!std::isfinite(y[0]) || !std::isfinite(y[2]))
            throw SimAbortError("non-finite state at t = " + std::to_string(t), std::move(trace));
    }
    return trace;
}

/// Open-loop forced response: equal sinusoidal current on both coils, no
/// sensing chain, optional touch. For sweeps and plant characterization.
inline SimTrace run_forced_open_loop(const PlateParams& plate, double f_hz, double i_amp_a,
                                     double duration_s, const TouchScenario& touch = {},
                                     double rate_hz = 30000.0) {
    plate.validate();
    const double dt = 1.0 / rate_hz;
    const std::size_t steps = static_cast<std::size_t>(std::llround(duration_s * rate_hz));
    detail::PlantIntegrator plant(plate, touch, dt);
    std::array<double, 6> y{};
    const double w0 = 2.0 * std::numbers::pi * f_hz;
    auto currents = [&](double tau) {
        const double i = i_amp_a * std::sin(w0 * tau);
        return std::pair<double, double>{i, i};
    };
    SimTrace trace;
    trace.rate_hz = rate_hz;
    trace.reserve(steps);
    for (std::size_t n = 0; n < steps; ++n) {
        const double t = static_cast<double>(n) * dt;
        const auto [ia, ib] = currents(t);
        trace.t.push_back(t);
        trace.x1.push_back(y[0]);
        trace.x2.push_back(y[2]);
        trace.hall1.push_back(y[0]);
        trace.hall2.push_back(y[2]);
        trace.i1.push_back(ia);
        trace.i2.push_back(ib);
        trace.a_cmd.push_back(i_amp_a);
        trace.ph_cmd.push_back(0.0);
        const auto derivs = plant.step(y, t, currents);
        trace.f_finger.push_back(derivs.reaction);
        trace.w_true.push_back(plant.engaged() ? std::max(0.0, touch.load_n(t)) : 0.0);
        trace.p_true.push_back(std::clamp(touch.position_m(t), 0.0, plate.spacing_m));
    }
    return trace;
}

/// Free decay from an initial state with zero drive.
inline SimTrace run_free_decay(const PlateParams& plate, const PlateState& init, double duration_s,
                               double rate_hz = 30000.0) {
    plate.validate();
    const double dt = 1.0 / rate_hz;
    const std::size_t steps = static_cast<std::size_t>(std::llround(duration_s * rate_hz));
    detail::PlantIntegrator plant(plate, TouchScenario{}, dt);
    std::array<double, 6> y{init.x1, init.v1, init.x2, init.v2, 0.0, 0.0};
    auto currents = [](double) { return std::pair<double, double>{0.0, 0.0}; };
    SimTrace trace;
    trace.rate_hz = rate_hz;
    trace.reserve(steps);
    for (std::size_t n = 0; n < steps; ++n) {
        const double t = static_cast<double>(n) * dt;
        trace.t.push_back(t);
        trace.x1.push_back(y[0]);
        trace.x2.push_back(y[2]);
        trace.hall1.push_back(y[0]);
        trace.hall2.push_back(y[2]);
        plant.step(y, t, currents);
        trace.i1.push_back(0.0);
        trace.i2.push_back(0.0);
        trace.a_cmd.push_back(0.0);
        trace.ph_cmd.push_back(0.0);
        trace.f_finger.push_back(0.0);
        trace.w_true.push_back(0.0);
        trace.p_true.push_back(0.0);
    }
    return trace;
}

} // namespace vibro
