#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace vibro {

/// Polynomial coefficients in descending powers of s.
using Poly = std::vector<double>;

inline std::complex<double> poly_eval(const Poly& p, std::complex<double> s) {
    std::complex<double> acc{0.0, 0.0};
    for (double c : p) acc = acc * s + c;
    return acc;
}

inline Poly poly_mul(const Poly& a, const Poly& b) {
    if (a.empty() || b.empty()) return {};
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

inline Poly poly_sub(const Poly& a, const Poly& b) {
    Poly out(std::max(a.size(), b.size()), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) out[out.size() - a.size() + i] += a[i];
    for (std::size_t i = 0; i < b.size(); ++i) out[out.size() - b.size() + i] -= b[i];
    return out;
}

inline Poly poly_scale(Poly p, double k) {
    for (double& c : p) c *= k;
    return p;
}

/// Drop leading coefficients that are negligible relative to the largest one.
inline Poly poly_trim(Poly p, double rel_tol = 1e-12) {
    double scale = 0.0;
    for (double c : p) scale = std::max(scale, std::abs(c));
    std::size_t lead = 0;
    while (lead + 1 < p.size() && std::abs(p[lead]) <= rel_tol * scale) ++lead;
    p.erase(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(lead));
    return p;
}

/// Roots via the companion-matrix eigenvalue problem.
inline std::vector<std::complex<double>> poly_roots(const Poly& p_in) {
    Poly p = poly_trim(p_in);
    if (p.size() < 2) return {};
    const std::size_t n = p.size() - 1;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                      static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        companion(0, static_cast<Eigen::Index>(i)) = -p[i + 1] / p[0];
    for (std::size_t i = 1; i < n; ++i)
        companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
    std::vector<std::complex<double>> roots(n);
    for (std::size_t i = 0; i < n; ++i) roots[i] = solver.eigenvalues()(static_cast<Eigen::Index>(i));
    return roots;
}

/// Rational transfer function in the Laplace domain.
struct ContinuousTF {
    Poly num;
    Poly den;

    ContinuousTF() = default;
    ContinuousTF(Poly n, Poly d) : num(std::move(n)), den(std::move(d)) {
        if (poly_trim(den).empty())
            throw std::invalid_argument("ContinuousTF: zero denominator");
    }

    std::size_t num_order() const { return poly_trim(num).size() ? poly_trim(num).size() - 1 : 0; }
    std::size_t den_order() const { return poly_trim(den).size() - 1; }
    std::size_t order() const { return den_order(); }
    bool proper() const { return num_order() <= den_order(); }

    std::complex<double> eval(std::complex<double> s) const {
        return poly_eval(num, s) / poly_eval(den, s);
    }
    std::complex<double> eval_hz(double f_hz) const {
        return eval(std::complex<double>(0.0, 2.0 * std::numbers::pi * f_hz));
    }

    std::vector<std::complex<double>> poles() const { return poly_roots(den); }
    std::vector<std::complex<double>> zeros() const { return poly_roots(num); }

    /// Trim negligible leading coefficients and scale the denominator monic.
    ContinuousTF normalized() const {
        Poly n = poly_trim(num), d = poly_trim(den);
        const double lead = d[0];
        return ContinuousTF(poly_scale(std::move(n), 1.0 / lead),
                            poly_scale(std::move(d), 1.0 / lead));
    }
};

/// Unity-DC 2nd-order Butterworth low-pass prototype in s.
inline ContinuousTF butterworth2_lowpass(double cutoff_hz) {
    if (!(cutoff_hz > 0.0))
        throw std::invalid_argument("butterworth2_lowpass: cutoff must be positive");
    const double w = 2.0 * std::numbers::pi * cutoff_hz;
    return ContinuousTF({w * w}, {1.0, std::numbers::sqrt2 * w, w * w});
}

} // namespace vibro
