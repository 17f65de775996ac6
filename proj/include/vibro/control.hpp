#pragma once

#include <limits>
#include <optional>

#include "vibro/biquad.hpp"
#include "vibro/lockin.hpp"
#include "vibro/response_table.hpp"

namespace vibro {

/// One regulated quantity (amplitude in meters, or relative phase in
/// degrees): reference, discrete controller and an optional lower output
/// bound with windup-free clamping.
class ControlChannel {
public:
    ControlChannel() = default;
    ControlChannel(double reference, const BiquadCoeffs& controller,
                   std::optional<double> lower_bound = std::nullopt)
        : reference_(reference), controller_(controller), lower_bound_(lower_bound) {}

    double step(double measurement) {
        const double error = reference_ - measurement;
        if (lower_bound_) {
            bool sat = false;
            output_ = controller_.step_clamped(error, *lower_bound_, &sat);
            saturated_ = sat;
        } else {
            output_ = controller_.step(error);
            saturated_ = false;
        }
        return output_;
    }

    /// Hold the command without advancing the controller (dead-channel
    /// guard: feedback below the validity floor must not steer the loop).
    double hold() const { return output_; }

    double reference() const { return reference_; }
    void set_reference(double r) { reference_ = r; }
    double output() const { return output_; }
    bool saturated() const { return saturated_; }
    void reset() { controller_.reset(); output_ = 0.0; saturated_ = false; }

private:
    double reference_ = 0.0;
    Biquad controller_;
    std::optional<double> lower_bound_;
    double output_ = 0.0;
    bool saturated_ = false;
};

/// Per-tick command pair: drive current amplitude and the phase offset of
/// transducer 2 relative to transducer 1 (the phase master).
struct ControlCommand {
    double current_amplitude_a = 0.0;
    double phase_offset_deg = 0.0;
    bool amplitude_saturated = false;
};

/// Dual-channel control law. The amplitude channel regulates the estimated
/// plate amplitude against A_ref in normalized displacement units, then the
/// feed-forward lookup converts to drive current (the plant gain at the
/// drive frequency is inverted). The phase channel's plant gain is unity,
/// so its command is used directly as transducer 2's drive phase offset.
inline ControlCommand control_step(ControlChannel& amplitude_channel, ControlChannel& phase_channel,
                                   const AmplitudePhase& estimate, double f_hz,
                                   const FrequencyResponseTable& table, bool phase_valid = true) {
    ControlCommand cmd;
    const double u = amplitude_channel.step(estimate.amplitude);
    cmd.current_amplitude_a = u / std::abs(plant_feedforward(table, f_hz));
    cmd.amplitude_saturated = amplitude_channel.saturated();
    cmd.phase_offset_deg = phase_valid ? phase_channel.step(estimate.phase_deg) : phase_channel.hold();
    return cmd;
}

} // namespace vibro
