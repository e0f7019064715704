#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "eitcorr/bloch.hpp"
#include "eitcorr/errors.hpp"
#include "eitcorr/params.hpp"
#include "eitcorr/response.hpp"

namespace eitcorr {

// Spectrum convention used throughout (analytic paths and the stochastic
// estimator): S_ij(w) = (1/4pi) Int dtau e^{-i w tau} [R_ij(tau) + R_ji(tau)]
// with R_ij(tau) = <dI_i(t) dI_j(t+tau)>, i.e. the symmetrized two-sided
// cross-spectral density divided by 2pi. Real and even in w.

/// Detuning-shift generators: common laser phase noise enters as
/// Delta_i -> Delta_i + phidot(t); dM/dDelta_i are diagonal.
inline Vector8cd detuning_shift_diag_1() {
    Vector8cd d;
    const complexd i(0.0, 1.0);
    d << 0.0, 0.0, -i, i, 0.0, 0.0, -i, i;
    return d;
}

inline Vector8cd detuning_shift_diag_2() {
    Vector8cd d;
    const complexd i(0.0, 1.0);
    d << 0.0, 0.0, 0.0, 0.0, -i, i, i, -i;
    return d;
}

/// Order-eps^2 products of the steady-state polarization quadratures. With
/// the convention eps^2 = gamma_bar / Gamma these are the Pi-tilde matrix
/// elements driving the correlation decomposition.
struct PiProducts {
    double pi_im = 0.0;  ///<  2 eps^2 Im p1 Im p2
    double pi_re = 0.0;  ///<  2 eps^2 Re p1 Re p2
    double pi_ri = 0.0;  ///< -2 eps^2 Im p1 Re p2
    double pi_ir = 0.0;  ///< -2 eps^2 Im p2 Re p1
};

inline PiProducts pi_products(const SteadyState& ss, double epsilon) {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw invalid_parameter_error("pi_products: epsilon must be finite and >= 0");
    const double e2 = epsilon * epsilon;
    PiProducts pi;
    pi.pi_im = 2.0 * e2 * ss.p1.imag() * ss.p2.imag();
    pi.pi_re = 2.0 * e2 * ss.p1.real() * ss.p2.real();
    pi.pi_ri = -2.0 * e2 * ss.p1.imag() * ss.p2.real();
    pi.pi_ir = -2.0 * e2 * ss.p2.imag() * ss.p1.real();
    return pi;
}

/// Lowest-order (in gamma_bar) spectral decomposition at one analysis
/// frequency. s11/s22/s12 are the converted-noise spectra; the nu/alpha/beta
/// scalars re-group the linear-response result onto the steady-state
/// polarization products, with everything not attributable to the four main
/// products collected in the C1 / alpha_C / alpha_I2 / beta_C / beta_I1
/// buckets. The partial-correlation factor r is folded into the cross-beam
/// weights so the re-sum identities hold for any r.
struct SpectralDecomposition {
    double omega = 0.0;

    double pi_im = 0.0, pi_re = 0.0, pi_ri = 0.0, pi_ir = 0.0;
    double nu_im = 0.0, nu_re = 0.0, nu_ri = 0.0, nu_ir = 0.0;

    // main-weight analogues for the auto-spectra (S11: alpha, S22: beta)
    double alpha_im = 0.0, alpha_re = 0.0, alpha_mix = 0.0;
    double beta_im = 0.0, beta_re = 0.0, beta_mix = 0.0;

    // bucket values (already multiplied by their products)
    double extra_c1 = 0.0;
    double alpha_c = 0.0, alpha_i2 = 0.0;
    double beta_c = 0.0, beta_i1 = 0.0;

    double s11 = 0.0, s22 = 0.0, s12 = 0.0;
    double c = std::numeric_limits<double>::quiet_NaN();
    bool c_defined = false;
    bool degenerate = false;  ///< both kappas zero: no atomic imprint
};

/// Normalized correlation C = S12 / sqrt(S11 S22). Never returns NaN: an
/// undefined correlation (vanishing spectra) is a distinct error.
inline double correlation_point(const SpectralDecomposition& dec) {
    const double den = dec.s11 * dec.s22;
    if (!(den > 0.0) || !std::isfinite(den))
        throw undefined_correlation_error("correlation_point: S11*S22 vanishes");
    return dec.s12 / std::sqrt(den);
}

/// Lowest-order noise spectra by linear response: common phase noise shifts
/// both detunings, the drive is v_s = (dM/dDelta_s) x_ss, the fluctuation is
/// dx(w) = chi(w) v phidot(w) with phidot white of spectral density
/// 2 gamma_bar, and dI_i = -2 kappa_i Im dp_i in each beam's rotating frame.
inline SpectralDecomposition noise_spectra(const BlochSystem& sys, const SteadyState& ss,
                                           const SystemParams& params, double omega) {
    params.validate();
    if (!std::isfinite(omega)) throw invalid_parameter_error("noise_spectra: omega not finite");

    SpectralDecomposition dec;
    dec.omega = omega;

    const double g = params.gamma;
    const double gbar = params.gamma_bar;
    const double k1 = params.kappa1, k2 = params.kappa2;
    const double r = params.phase_noise_correlation;
    const double eps2 = gbar / g;

    const PiProducts pi = pi_products(ss, std::sqrt(eps2));
    dec.pi_im = pi.pi_im;
    dec.pi_re = pi.pi_re;
    dec.pi_ri = pi.pi_ri;
    dec.pi_ir = pi.pi_ir;

    // Per-source drives in the Im/Re (tilde) basis.
    const Matrix8cd chit = sys.u * response_kernel(sys, omega) * sys.u_inverse();
    const Vector8cd q1 = sys.u * detuning_shift_diag_1().cwiseProduct(ss.x_ss);
    const Vector8cd q2 = sys.u * detuning_shift_diag_2().cwiseProduct(ss.x_ss);
    const std::array<Vector8cd, 2> q = {q1, q2};
    const double R[2][2] = {{1.0, r}, {r, 1.0}};

    // Response rows of Im p1 and Im p2 in the tilde basis.
    const auto a = chit.row(kRho13);
    const auto b = chit.row(kRho23);

    const double pref = gbar / std::numbers::pi;
    auto spec = [&](const auto& rowA, double kA, const auto& rowB, double kB) {
        complexd tot(0.0, 0.0);
        for (int s = 0; s < 2; ++s)
            for (int sp = 0; sp < 2; ++sp)
                tot += R[s][sp] * (rowA * q[s])(0, 0) * std::conj((rowB * q[sp])(0, 0));
        return pref * 4.0 * kA * kB * tot.real();
    };
    dec.s11 = spec(a, k1, a, k1);
    dec.s22 = spec(b, k2, b, k2);
    dec.s12 = spec(a, k1, b, k2);

    // Per-index-pair contributions T_kl for the diagnostic regrouping.
    auto term = [&](const auto& rowA, double kA, const auto& rowB, double kB, int k, int l) {
        complexd f(0.0, 0.0);
        for (int s = 0; s < 2; ++s)
            for (int sp = 0; sp < 2; ++sp) f += R[s][sp] * q[s](k) * std::conj(q[sp](l));
        return pref * 4.0 * kA * kB * (rowA(k) * std::conj(rowB(l)) * f).real();
    };

    // nu weights: unique scalars multiplying the four main steady-state
    // products in S12 (cross-source, hence the factor r).
    const double cc12 = 2.0 * k1 * k2 * g / std::numbers::pi * r;
    dec.nu_im = cc12 * (a(3) * std::conj(b(5)) + a(5) * std::conj(b(3))).real();
    dec.nu_re = cc12 * (a(2) * std::conj(b(4)) + a(4) * std::conj(b(2))).real();
    dec.nu_ri = cc12 * (a(3) * std::conj(b(4)) + a(4) * std::conj(b(3))).real();
    dec.nu_ir = cc12 * (a(2) * std::conj(b(5)) + a(5) * std::conj(b(2))).real();

    const double cc11 = 2.0 * k1 * k1 * g / std::numbers::pi;
    dec.alpha_im = cc11 * std::norm(a(3));
    dec.alpha_re = cc11 * std::norm(a(2));
    dec.alpha_mix = cc11 * 2.0 * (a(2) * std::conj(a(3))).real();
    const double cc22 = 2.0 * k2 * k2 * g / std::numbers::pi;
    dec.beta_im = cc22 * std::norm(b(5));
    dec.beta_re = cc22 * std::norm(b(4));
    dec.beta_mix = cc22 * 2.0 * (b(4) * std::conj(b(5))).real();

    // Bucket sums over all remaining index pairs (components 2..7 carry the
    // drive; 6,7 terms vanish for r = 1 and are folded into the C-buckets).
    double c1 = 0.0, a_c = 0.0, a_i2 = 0.0, b_c = 0.0, b_i1 = 0.0;
    auto in_beam1 = [](int k) { return k == 2 || k == 3; };
    auto in_beam2 = [](int k) { return k == 4 || k == 5; };
    for (int k = 2; k < 8; ++k) {
        for (int l = 2; l < 8; ++l) {
            const bool main12 = (in_beam1(k) && in_beam2(l)) || (in_beam2(k) && in_beam1(l));
            if (!main12) c1 += term(a, k1, b, k2, k, l);
            const bool main11 = in_beam1(k) && in_beam1(l);
            if (!main11) {
                if (in_beam2(k) && in_beam2(l))
                    a_i2 += term(a, k1, a, k1, k, l);
                else
                    a_c += term(a, k1, a, k1, k, l);
            }
            const bool main22 = in_beam2(k) && in_beam2(l);
            if (!main22) {
                if (in_beam1(k) && in_beam1(l))
                    b_i1 += term(b, k2, b, k2, k, l);
                else
                    b_c += term(b, k2, b, k2, k, l);
            }
        }
    }
    dec.extra_c1 = c1;
    dec.alpha_c = a_c;
    dec.alpha_i2 = a_i2;
    dec.beta_c = b_c;
    dec.beta_i1 = b_i1;

    if (k1 == 0.0 && k2 == 0.0) dec.degenerate = true;
    // at an exact dark state the drive is roundoff noise; the spectra are
    // then zeros, not ratios of noise
    const bool drive_ok = q1.norm() + q2.norm() > 1e-12 * ss.x_ss.norm();
    if (!drive_ok) dec.s11 = dec.s22 = dec.s12 = dec.extra_c1 = 0.0;
    if (drive_ok && dec.s11 * dec.s22 > 0.0) {
        dec.c = correlation_point(dec);
        dec.c_defined = true;
    }
    return dec;
}

/// Heuristic equal-time correlation from the steady-state polarizations:
/// the cosine of the angle between p1 and p2 as 2-vectors. Exactly in [-1,1].
/// Polarizations at or below the dark-state scale (1e-12) count as vanished.
inline double g2_zero(const SteadyState& ss) {
    const double n1 = std::abs(ss.p1), n2 = std::abs(ss.p2);
    if (!(n1 > 1e-12) || !(n2 > 1e-12))
        throw undefined_correlation_error("g2_zero: polarization vanishes (dark state)");
    const double g2 =
        (ss.p1.real() * ss.p2.real() + ss.p1.imag() * ss.p2.imag()) / (n1 * n2);
    return std::clamp(g2, -1.0, 1.0);
}

}  // namespace eitcorr
