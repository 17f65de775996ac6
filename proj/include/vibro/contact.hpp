#pragma once

#include <stdexcept>
#include <variant>

#include "vibro/finger_model.hpp"

namespace vibro {

/// Load dependence of the skin branch (b_s, k_s) of the 4th-order model.
/// `TableLinear` interpolates between the two published parameter sets as
/// the normal load moves across the 0.5 N split; `PowerLaw` scales both by
/// (W/w_ref)^gamma. Neither claims fidelity beyond "configured input".
struct SkinScaling {
    enum class Mode { None, TableLinear, PowerLaw };
    Mode mode = Mode::None;
    double gamma = 1.0 / 3.0;
    double w_ref = 0.5;
    double w_lo = 0.25; // anchor loads for TableLinear
    double w_hi = 0.75;

    Order4Params apply(const Order4Params& p, double w_n) const {
        switch (mode) {
        case Mode::None:
            return p;
        case Mode::TableLinear: {
            const Order4Params lo = preset_order4("w_lt_0.5");
            const Order4Params hi = preset_order4("w_gt_0.5");
            double a = (w_n - w_lo) / (w_hi - w_lo);
            a = a < 0.0 ? 0.0 : (a > 1.0 ? 1.0 : a);
            Order4Params out = p;
            out.bs = lo.bs + a * (hi.bs - lo.bs);
            out.ks = lo.ks + a * (hi.ks - lo.ks);
            return out;
        }
        case Mode::PowerLaw: {
            if (!(w_n > 0.0)) return p;
            const double s = std::pow(w_n / w_ref, gamma);
            Order4Params out = p;
            out.bs = p.bs * s;
            out.ks = p.ks * s;
            return out;
        }
        }
        return p;
    }
};

/// Which lumped model, if any, loads the plate.
struct FingerSpec {
    std::variant<std::monostate, Order2Params, Order4Params> model;
    SkinScaling scaling;

    bool present() const { return !std::holds_alternative<std::monostate>(model); }
    void validate() const {
        if (const auto* p2 = std::get_if<Order2Params>(&model)) p2->validate();
        if (const auto* p4 = std::get_if<Order4Params>(&model)) p4->validate();
    }
};

/// Finger contact driven by prescribed surface motion. The skin node is
/// glued to the plate while engaged; the 4th-order phalanx node is an
/// internal state advanced here. Returns the total normal force the finger
/// applies to the plate; the dynamic reaction on the finger is exposed
/// separately. The static preload -W passes straight through so the
/// suspension sag encodes the applied load.
class FingerReaction {
public:
    explicit FingerReaction(FingerSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

    void engage(double surface_ref_m) {
        engaged_ = true;
        x_ref_ = surface_ref_m;
        xp_ = vp_ = 0.0;
        reaction_ = 0.0;
    }
    void release() {
        engaged_ = false;
        reaction_ = 0.0;
    }
    bool engaged() const { return engaged_; }

    /// One step under prescribed contact-point kinematics. Inputs are the
    /// plate surface displacement/velocity/acceleration at the finger
    /// position and the commanded load. Output is the force on the plate.
    double step(double x_m, double v_m_s, double a_m_s2, double w_n, double dt) {
        if (!engaged_ || !spec_.present()) {
            reaction_ = 0.0;
            return 0.0;
        }
        const double s = x_m - x_ref_;
        if (const auto* o2 = std::get_if<Order2Params>(&spec_.model)) {
            reaction_ = o2->m * a_m_s2 + o2->b * v_m_s + o2->k * s;
        } else {
            const Order4Params p = spec_.scaling.apply(std::get<Order4Params>(spec_.model), w_n);
            // phalanx node, RK4 with linearly interpolated surface motion
            auto deriv = [&](double xp, double vp, double tau) {
                const double st = s + v_m_s * tau;
                const double vt = v_m_s + a_m_s2 * tau;
                const double ap =
                    (-p.bp * vp - p.kp * xp + p.bs * (vt - vp) + p.ks * (st - xp)) / p.mp;
                return std::pair<double, double>{vp, ap};
            };
            const auto [k1x, k1v] = deriv(xp_, vp_, 0.0);
            const auto [k2x, k2v] = deriv(xp_ + 0.5 * dt * k1x, vp_ + 0.5 * dt * k1v, 0.5 * dt);
            const auto [k3x, k3v] = deriv(xp_ + 0.5 * dt * k2x, vp_ + 0.5 * dt * k2v, 0.5 * dt);
            const auto [k4x, k4v] = deriv(xp_ + dt * k3x, vp_ + dt * k3v, dt);
            xp_ += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            vp_ += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            reaction_ = p.ms * a_m_s2 + p.bs * (v_m_s - vp_) + p.ks * (s - xp_);
        }
        return -w_n - reaction_;
    }

    /// Dynamic reaction force on the finger from the last step.
    double last_reaction() const { return reaction_; }

    double phalanx_displacement() const { return xp_; }
    double phalanx_velocity() const { return vp_; }

private:
    FingerSpec spec_;
    bool engaged_ = false;
    double x_ref_ = 0.0;
    double xp_ = 0.0, vp_ = 0.0;
    double reaction_ = 0.0;
};

} // namespace vibro
