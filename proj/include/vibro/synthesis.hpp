#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vibro/biquad.hpp"
#include "vibro/transfer_function.hpp"

namespace vibro {

struct SynthesisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when no stable 2nd-order approximation meets the fit tolerance;
/// carries the best error achieved.
struct ReductionError : SynthesisError {
    ReductionError(const std::string& msg, double mag_db, double phase_deg)
        : SynthesisError(msg), best_mag_err_db(mag_db), best_phase_err_deg(phase_deg) {}
    double best_mag_err_db;
    double best_phase_err_deg;
};

/// Target closed-loop response: unity-DC 2nd-order low-pass with its -3 dB
/// point at `bandwidth_hz`.
inline ContinuousTF sensitivity_target(double bandwidth_hz) {
    if (!(bandwidth_hz > 0.0))
        throw std::invalid_argument("sensitivity_target: bandwidth must be positive");
    return butterworth2_lowpass(bandwidth_hz);
}

/// Invert the loop equation T = C/(1+LC) for the controller: C = T/(1-LT),
/// composed without cancelling common factors (2nd-order L and T give the
/// full 6th-order rational function). The factor (1 - LT) vanishes at s = 0
/// when both L and T have unity DC gain, which is the integral action that
/// gives zero steady-state error; that pole is accepted, any pole in the
/// open right half plane is not.
inline ContinuousTF solve_controller(const ContinuousTF& T, const ContinuousTF& L) {
    Poly num = poly_mul(T.num, poly_mul(L.den, T.den));
    Poly den = poly_mul(T.den, poly_sub(poly_mul(L.den, T.den), poly_mul(L.num, T.num)));

    den = poly_trim(den);
    if (den.size() < 2)
        throw SynthesisError("solve_controller: 1 - L*T is identically zero");

    ContinuousTF c(poly_trim(num), den);
    if (!c.proper())
        throw SynthesisError("solve_controller: resulting controller is improper");

    const auto poles = c.poles();
    double scale = 0.0;
    for (const auto& p : poles) scale = std::max(scale, std::abs(p));
    for (const auto& p : poles) {
        if (std::abs(p) <= 1e-9 * scale) continue; // integrator pole at the origin
        if (p.real() > 1e-9 * scale)
            throw SynthesisError("solve_controller: unstable controller pole at Re(s) = " +
                                 std::to_string(p.real()));
    }
    return c;
}

/// Magnitude/phase deviation between two responses over a log grid.
struct FitReport {
    double max_mag_err_db = 0.0;
    double max_phase_err_deg = 0.0;
};

inline FitReport measure_fit(const ContinuousTF& reference, const ContinuousTF& approx,
                             double f_lo_hz, double f_hi_hz, int n_points = 240) {
    FitReport r;
    const double l0 = std::log10(f_lo_hz), l1 = std::log10(f_hi_hz);
    for (int i = 0; i < n_points; ++i) {
        const double f = std::pow(10.0, l0 + (l1 - l0) * i / (n_points - 1));
        const std::complex<double> ratio = approx.eval_hz(f) / reference.eval_hz(f);
        r.max_mag_err_db = std::max(r.max_mag_err_db, std::abs(20.0 * std::log10(std::abs(ratio))));
        r.max_phase_err_deg =
            std::max(r.max_phase_err_deg,
                     std::abs(std::arg(ratio) * 180.0 / std::numbers::pi));
    }
    return r;
}

namespace detail {

/// Deterministic Nelder-Mead, good enough for the handful of parameters in
/// the order-reduction polish.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x0, int max_iter = 3000) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> pts(n + 1, x0);
    std::vector<double> vals(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double step = x0[i] != 0.0 ? 0.1 * std::abs(x0[i]) : 0.1;
        pts[i + 1][i] += step;
    }
    for (std::size_t i = 0; i <= n; ++i) vals[i] = f(pts[i]);

    auto centroid = [&](std::size_t skip) {
        std::vector<double> c(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == skip) continue;
            for (std::size_t j = 0; j < n; ++j) c[j] += pts[i][j];
        }
        for (double& v : c) v /= static_cast<double>(n);
        return c;
    };
    auto blend = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
        std::vector<double> out(n);
        for (std::size_t j = 0; j < n; ++j) out[j] = a[j] + t * (b[j] - a[j]);
        return out;
    };

    for (int iter = 0; iter < max_iter; ++iter) {
        std::size_t lo = 0, hi = 0, second = 0;
        for (std::size_t i = 1; i <= n; ++i) {
            if (vals[i] < vals[lo]) lo = i;
            if (vals[i] > vals[hi]) hi = i;
        }
        second = lo;
        for (std::size_t i = 0; i <= n; ++i)
            if (i != hi && vals[i] > vals[second]) second = i;
        if (vals[hi] - vals[lo] < 1e-12 * (std::abs(vals[lo]) + 1e-300)) break;

        const auto c = centroid(hi);
        auto refl = blend(c, pts[hi], -1.0);
        const double fr = f(refl);
        if (fr < vals[lo]) {
            auto exp_ = blend(c, pts[hi], -2.0);
            const double fe = f(exp_);
            if (fe < fr) { pts[hi] = std::move(exp_); vals[hi] = fe; }
            else { pts[hi] = std::move(refl); vals[hi] = fr; }
        } else if (fr < vals[second]) {
            pts[hi] = std::move(refl); vals[hi] = fr;
        } else {
            auto con = blend(c, pts[hi], 0.5);
            const double fc = f(con);
            if (fc < vals[hi]) { pts[hi] = std::move(con); vals[hi] = fc; }
            else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == lo) continue;
                    pts[i] = blend(pts[lo], pts[i], 0.5);
                    vals[i] = f(pts[i]);
                }
            }
        }
    }
    std::size_t lo = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (vals[i] < vals[lo]) lo = i;
    return pts[lo];
}

} // namespace detail

/// Approximate a stable high-order controller by a 2nd-order one over
/// [fit_lo_hz, fit_hi_hz]. An integrator in the input (zero denominator
/// constant) is pinned exactly, so is the DC gain otherwise. Seeded by
/// 1/f-weighted least squares on the complex response over a log grid,
/// then polished against the worst-case magnitude/phase deviation.
/// Throws ReductionError when the tolerance cannot be met.
inline ContinuousTF reduce_order(const ContinuousTF& c_in, double fit_lo_hz = 0.1,
                                 double fit_hi_hz = 20.0, double tol_mag_db = 1.0,
                                 double tol_phase_deg = 10.0) {
    const ContinuousTF c = c_in.normalized();
    if (c.order() <= 2) return c;
    if (!c.proper())
        throw SynthesisError("reduce_order: input must be proper");

    double den_scale = 0.0;
    for (double v : c.den) den_scale = std::max(den_scale, std::abs(v));
    const bool integrator = std::abs(c.den.back()) <= 1e-12 * den_scale;

    // Log grids: a wider one for the least-squares seed (stabilizes the
    // high-frequency tail), the requested band for evaluation.
    auto log_grid = [](double lo, double hi, int n) {
        std::vector<double> g(static_cast<std::size_t>(n));
        const double l0 = std::log10(lo), l1 = std::log10(hi);
        for (int i = 0; i < n; ++i)
            g[static_cast<std::size_t>(i)] = std::pow(10.0, l0 + (l1 - l0) * i / (n - 1));
        return g;
    };
    const auto fit_grid = log_grid(fit_lo_hz, std::max(fit_hi_hz, 50.0), 160);
    const auto eval_grid = log_grid(fit_lo_hz, fit_hi_hz, 200);

    std::vector<std::complex<double>> c_fit(fit_grid.size()), c_eval(eval_grid.size());
    for (std::size_t i = 0; i < fit_grid.size(); ++i) c_fit[i] = c.eval_hz(fit_grid[i]);
    for (std::size_t i = 0; i < eval_grid.size(); ++i) c_eval[i] = c.eval_hz(eval_grid[i]);

    // Pinned quantities. Integrator residue: lim s->0 s*C(s).
    const double ki = integrator ? c.num.back() / c.den[c.den.size() - 2] : 0.0;
    const double g0 = integrator ? 0.0 : (poly_eval(c.num, 0.0) / poly_eval(c.den, 0.0)).real();

    // Parameter vector: integrator case {b2, b1, a1} with b0 = ki*a1, a0 = 0;
    // otherwise {b2, b1, a1, a0} with b0 = g0*a0.
    auto make_tf = [&](const std::vector<double>& p) {
        if (integrator)
            return ContinuousTF({p[0], p[1], ki * p[2]}, {1.0, p[2], 0.0});
        return ContinuousTF({p[0], p[1], g0 * p[3]}, {1.0, p[2], p[3]});
    };
    auto stable = [&](const std::vector<double>& p) {
        return integrator ? p[2] > 0.0 : (p[2] > 0.0 && p[3] > 0.0);
    };
    auto worst_case = [&](const std::vector<double>& p) {
        if (!stable(p)) return 1e9;
        const ContinuousTF tf = make_tf(p);
        double worst = 0.0;
        for (std::size_t i = 0; i < eval_grid.size(); ++i) {
            const std::complex<double> ratio = tf.eval_hz(eval_grid[i]) / c_eval[i];
            const double db = std::abs(20.0 * std::log10(std::abs(ratio)));
            const double deg = std::abs(std::arg(ratio)) * 180.0 / std::numbers::pi;
            worst = std::max(worst, std::max(db / tol_mag_db, deg / tol_phase_deg));
        }
        return worst;
    };

    // Sanathanan-Koerner iterations of the 1/f-weighted linear problem.
    const std::size_t n_unknown = integrator ? 3 : 4;
    std::vector<double> seed(n_unknown, 0.0);
    seed[2] = 2.0 * std::numbers::pi * fit_hi_hz; // initial pole guess
    if (!integrator) seed[3] = seed[2] * seed[2];
    for (int sk = 0; sk < 10; ++sk) {
        Eigen::MatrixXd a(2 * fit_grid.size(), n_unknown);
        Eigen::VectorXd b(2 * fit_grid.size());
        for (std::size_t i = 0; i < fit_grid.size(); ++i) {
            const std::complex<double> s(0.0, 2.0 * std::numbers::pi * fit_grid[i]);
            const std::complex<double> d_prev =
                integrator ? s * s + seed[2] * s : s * s + seed[2] * s + seed[3];
            const double w = 1.0 / (fit_grid[i] * std::max(std::abs(d_prev), 1e-12));
            std::vector<std::complex<double>> row(n_unknown);
            std::complex<double> rhs = c_fit[i] * s * s;
            row[0] = s * s;
            row[1] = s;
            if (integrator) {
                row[2] = ki - c_fit[i] * s;
            } else {
                row[2] = -c_fit[i] * s;
                row[3] = g0 - c_fit[i];
            }
            for (std::size_t j = 0; j < n_unknown; ++j) {
                a(static_cast<Eigen::Index>(2 * i), static_cast<Eigen::Index>(j)) = w * row[j].real();
                a(static_cast<Eigen::Index>(2 * i + 1), static_cast<Eigen::Index>(j)) =
                    w * row[j].imag();
            }
            b(static_cast<Eigen::Index>(2 * i)) = w * rhs.real();
            b(static_cast<Eigen::Index>(2 * i + 1)) = w * rhs.imag();
        }
        const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);
        for (std::size_t j = 0; j < n_unknown; ++j) seed[j] = x(static_cast<Eigen::Index>(j));
    }

    // Minimax polish from the SK seed plus a few pole-location restarts.
    std::vector<double> best;
    double best_val = 1e18;
    std::vector<std::vector<double>> starts{seed};
    for (double mult : {0.5, 1.5, 3.0}) {
        auto s2 = seed;
        s2[2] *= mult;
        if (!integrator) s2[3] *= mult * mult;
        starts.push_back(s2);
    }
    for (const auto& s0 : starts) {
        auto p = detail::nelder_mead(worst_case, s0);
        const double v = worst_case(p);
        if (v < best_val) {
            best_val = v;
            best = p;
        }
    }

    const ContinuousTF reduced = make_tf(best);
    const FitReport rep = measure_fit(c, reduced, fit_lo_hz, fit_hi_hz);
    if (!stable(best) || rep.max_mag_err_db > tol_mag_db || rep.max_phase_err_deg > tol_phase_deg)
        throw ReductionError("reduce_order: tolerance not achievable", rep.max_mag_err_db,
                             rep.max_phase_err_deg);
    return reduced;
}

/// Bilinear substitution s -> (2/Ts)(z-1)/(z+1), order <= 2, no prewarping;
/// DC gain maps exactly (s = 0 lands on z = 1).
inline BiquadCoeffs discretize_tustin(const ContinuousTF& c_in, double rate_hz) {
    if (!(rate_hz > 0.0))
        throw std::invalid_argument("discretize_tustin: rate must be positive");
    const ContinuousTF c = c_in.normalized();
    if (!c.proper() || c.order() > 2)
        throw SynthesisError("discretize_tustin: need a proper transfer function of order <= 2");

    auto padded = [](const Poly& p) {
        Poly out(3, 0.0);
        std::copy(p.rbegin(), p.rend(), out.rbegin());
        return out;
    };
    const Poly n = padded(c.num), d = padded(c.den);
    const double k = 2.0 * rate_hz;

    const double a0 = d[0] * k * k + d[1] * k + d[2];
    if (a0 == 0.0)
        throw SynthesisError("discretize_tustin: pole maps to z = -1");
    BiquadCoeffs out;
    out.b0 = (n[0] * k * k + n[1] * k + n[2]) / a0;
    out.b1 = (-2.0 * n[0] * k * k + 2.0 * n[2]) / a0;
    out.b2 = (n[0] * k * k - n[1] * k + n[2]) / a0;
    out.a1 = (-2.0 * d[0] * k * k + 2.0 * d[2]) / a0;
    out.a2 = (d[0] * k * k - d[1] * k + d[2]) / a0;
    return out;
}

} // namespace vibro
