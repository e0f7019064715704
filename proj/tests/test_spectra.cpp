#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "eitcorr/bloch.hpp"
#include "eitcorr/moments.hpp"
#include "eitcorr/phasor.hpp"
#include "eitcorr/response.hpp"
#include "eitcorr/spectra.hpp"
#include "eitcorr/units.hpp"

using namespace eitcorr;
using Catch::Approx;

namespace {

SystemParams reference_params(double delta_mhz, double delta1_mhz = 0.2) {
    SystemParams p;
    p.gamma = mhz_to_rad_us(6.0);
    p.gamma_d = khz_to_rad_us(150.0);
    p.gamma_bar = mhz_to_rad_us(1.0);
    p.rabi1 = 0.30 * p.gamma;
    p.rabi2 = 0.34 * p.gamma;
    p.delta1 = mhz_to_rad_us(delta1_mhz);
    p.delta2 = mhz_to_rad_us(delta1_mhz + delta_mhz);
    return p;
}

SpectralDecomposition decompose(const SystemParams& p, double omega_mhz) {
    const BlochSystem sys = build_bloch_system(p);
    const SteadyState ss = steady_state(sys);
    return noise_spectra(sys, ss, p, mhz_to_rad_us(omega_mhz));
}

}  // namespace

TEST_CASE("pi products: dark state gives zeros") {
    SystemParams p = reference_params(0.0, 0.4);
    p.delta2 = p.delta1;
    p.gamma_d = 0.0;
    const SteadyState ss = steady_state(build_bloch_system(p));
    const PiProducts pi = pi_products(ss, 0.4);
    REQUIRE(pi.pi_im == Approx(0.0).margin(1e-24));
    REQUIRE(pi.pi_re == Approx(0.0).margin(1e-24));
    REQUIRE(pi.pi_ri == Approx(0.0).margin(1e-24));
    REQUIRE(pi.pi_ir == Approx(0.0).margin(1e-24));
}

TEST_CASE("pi products: purely absorptive polarizations") {
    SteadyState ss;
    ss.p1 = complexd(0.0, 0.25);
    ss.p2 = complexd(0.0, 0.25);
    const PiProducts pi = pi_products(ss, 1.0);
    REQUIRE(pi.pi_im == Approx(2.0 * 0.25 * 0.25));
    REQUIRE(pi.pi_re == Approx(0.0).margin(1e-18));
    REQUIRE(pi.pi_ri == Approx(0.0).margin(1e-18));
    REQUIRE(pi.pi_ir == Approx(0.0).margin(1e-18));
}

TEST_CASE("pi products fixture at delta = 1 MHz (eps^2 = gamma_bar/Gamma)") {
    const SystemParams p = reference_params(1.0);
    const SteadyState ss = steady_state(build_bloch_system(p));
    const PiProducts pi = pi_products(ss, std::sqrt(p.gamma_bar / p.gamma));
    REQUIRE(pi.pi_im == Approx(3.086768174783e-03).epsilon(1e-11));
    REQUIRE(pi.pi_re == Approx(-3.207169876850e-04).epsilon(1e-11));
    REQUIRE(pi.pi_ri == Approx(5.080590863921e-04).epsilon(1e-11));
    REQUIRE(pi.pi_ir == Approx(-1.948550901291e-03).epsilon(1e-11));
}

TEST_CASE("response kernel: omega = 0 is the steady-state inverse") {
    const BlochSystem sys = build_bloch_system(reference_params(0.7));
    const Matrix8cd chi0 = response_kernel(sys, 0.0);
    REQUIRE((chi0 * sys.m - Matrix8cd::Identity()).norm() < 1e-10);
}

TEST_CASE("response kernel: definition residual at arbitrary omega") {
    const BlochSystem sys = build_bloch_system(reference_params(-2.2, 5.0));
    for (double w_mhz : {0.3, 2.0, 7.7}) {
        const double w = mhz_to_rad_us(w_mhz);
        const Matrix8cd chi = response_kernel(sys, w);
        const Matrix8cd a = sys.m - complexd(0.0, w) * Matrix8cd::Identity();
        REQUIRE((chi * a - Matrix8cd::Identity()).norm() < 1e-10);
    }
}

TEST_CASE("response kernel fixture at omega = 2pi x 2 MHz") {
    const BlochSystem sys = build_bloch_system(reference_params(0.0));
    const Matrix8cd chi = response_kernel(sys, mhz_to_rad_us(2.0));
    // frozen from an independent dense inversion before the main build
    REQUIRE(chi(0, 0).real() == Approx(-2.017712530851e-02).epsilon(1e-10));
    REQUIRE(chi(0, 0).imag() == Approx(4.680692932293e-02).epsilon(1e-10));
    REQUIRE(chi(2, 2).real() == Approx(-4.090777674385e-02).epsilon(1e-10));
    REQUIRE(chi(2, 2).imag() == Approx(1.827463848400e-02).epsilon(1e-10));
    REQUIRE(chi(6, 2).real() == Approx(-2.146611075173e-02).epsilon(1e-10));
    REQUIRE(chi(6, 2).imag() == Approx(5.810918826056e-03).epsilon(1e-10));
}

TEST_CASE("noise spectra: no phase noise, no converted noise") {
    SystemParams p = reference_params(0.8);
    p.gamma_bar = 0.0;
    const SpectralDecomposition dec = decompose(p, 2.0);
    REQUIRE(dec.s11 == 0.0);
    REQUIRE(dec.s22 == 0.0);
    REQUIRE(dec.s12 == 0.0);
    REQUIRE_FALSE(dec.c_defined);
    REQUIRE_THROWS_AS(correlation_point(dec), undefined_correlation_error);
}

TEST_CASE("noise spectra: both kappas zero is degenerate, not an error") {
    SystemParams p = reference_params(0.8);
    p.kappa1 = p.kappa2 = 0.0;
    const SpectralDecomposition dec = decompose(p, 2.0);
    REQUIRE(dec.degenerate);
    REQUIRE(dec.s11 == 0.0);
    REQUIRE(dec.s12 == 0.0);
}

TEST_CASE("noise spectra: positivity of the auto-spectra across the scan") {
    for (double d = -8.0; d <= 8.0; d += 0.5) {
        const SpectralDecomposition dec = decompose(reference_params(d), 2.0);
        REQUIRE(dec.s11 >= 0.0);
        REQUIRE(dec.s22 >= 0.0);
    }
}

TEST_CASE("noise spectra: Cauchy-Schwarz on a (delta, omega) grid") {
    for (double d : {-6.0, -2.0, -0.3, 0.0, 0.4, 1.1, 3.0, 6.5})
        for (double w : {0.5, 2.0, 3.0, 4.0}) {
            const SpectralDecomposition dec = decompose(reference_params(d), w);
            REQUIRE(dec.s12 * dec.s12 <= dec.s11 * dec.s22 * (1.0 + 1e-6));
            if (dec.c_defined) REQUIRE(std::abs(dec.c) <= 1.0 + 1e-6);
        }
}

TEST_CASE("noise spectra: decomposition re-sum identities") {
    for (double d : {-4.0, -1.0, 0.0, 0.3, 2.0, 5.5}) {
        for (double r : {1.0, 0.6}) {
            SystemParams p = reference_params(d, 1.7);
            p.phase_noise_correlation = r;
            const SpectralDecomposition dec = decompose(p, 2.0);
            const double resum12 = dec.nu_im * dec.pi_im + dec.nu_re * dec.pi_re +
                                   dec.nu_ri * dec.pi_ri + dec.nu_ir * dec.pi_ir + dec.extra_c1;
            REQUIRE(resum12 == Approx(dec.s12).epsilon(1e-10));

            const double e2 = p.gamma_bar / p.gamma;
            const SteadyState ss = steady_state(build_bloch_system(p));
            const double im1 = ss.p1.imag(), re1 = ss.p1.real();
            const double im2 = ss.p2.imag(), re2 = ss.p2.real();
            const double resum11 = dec.alpha_im * (2 * e2 * im1 * im1) +
                                   dec.alpha_re * (2 * e2 * re1 * re1) +
                                   dec.alpha_mix * (-2 * e2 * im1 * re1) + dec.alpha_c +
                                   dec.alpha_i2;
            REQUIRE(resum11 == Approx(dec.s11).epsilon(1e-10));
            const double resum22 = dec.beta_im * (2 * e2 * im2 * im2) +
                                   dec.beta_re * (2 * e2 * re2 * re2) +
                                   dec.beta_mix * (-2 * e2 * im2 * re2) + dec.beta_c +
                                   dec.beta_i1;
            REQUIRE(resum22 == Approx(dec.s22).epsilon(1e-10));
        }
    }
}

TEST_CASE("noise spectra: C invariant under gamma_bar scaling to 1e-8") {
    for (double scale : {0.37, 3.7, 41.0}) {
        SystemParams a = reference_params(0.9);
        SystemParams b = a;
        b.gamma_bar *= scale;
        const double ca = correlation_point(decompose(a, 2.0));
        const double cb = correlation_point(decompose(b, 2.0));
        REQUIRE(cb == Approx(ca).epsilon(1e-8));
    }
}

TEST_CASE("noise spectra: beam exchange swaps S11 and S22, keeps C") {
    const SystemParams p = reference_params(1.3, -3.0);
    SystemParams q = p;
    std::swap(q.rabi1, q.rabi2);
    std::swap(q.delta1, q.delta2);
    std::swap(q.kappa1, q.kappa2);
    const SpectralDecomposition a = decompose(p, 2.0);
    const SpectralDecomposition b = decompose(q, 2.0);
    REQUIRE(b.s11 == Approx(a.s22).epsilon(1e-12));
    REQUIRE(b.s22 == Approx(a.s11).epsilon(1e-12));
    REQUIRE(b.s12 == Approx(a.s12).epsilon(1e-12));
    REQUIRE(correlation_point(b) == Approx(correlation_point(a)).epsilon(1e-12));
}

TEST_CASE("noise spectra regression fixtures") {
    // reference resonant point, delta = 0, omega = 2pi x 2 MHz
    const SpectralDecomposition d0 = decompose(reference_params(0.0), 2.0);
    REQUIRE(d0.s11 == Approx(1.585842657375e-09).epsilon(1e-9));
    REQUIRE(d0.s22 == Approx(1.392199135722e-09).epsilon(1e-9));
    REQUIRE(d0.s12 == Approx(1.485253898854e-09).epsilon(1e-9));
    REQUIRE(correlation_point(d0) == Approx(0.999585559184).epsilon(1e-9));

    // delta = 1 MHz: spectra and regrouping weights
    const SpectralDecomposition d1 = decompose(reference_params(1.0), 2.0);
    REQUIRE(d1.s11 == Approx(7.447322498662e-07).epsilon(1e-9));
    REQUIRE(d1.s22 == Approx(1.120369886674e-08).epsilon(1e-9));
    REQUIRE(d1.s12 == Approx(-2.025606857513e-08).epsilon(1e-9));
    REQUIRE(d1.nu_im == Approx(-6.972013682362e-06).epsilon(1e-9));
    REQUIRE(d1.nu_re == Approx(4.254221576401e-04).epsilon(1e-9));
    REQUIRE(d1.nu_ri == Approx(8.058180170124e-06).epsilon(1e-9));
    REQUIRE(d1.nu_ir == Approx(-1.610055885501e-04).epsilon(1e-9));
    REQUIRE(d1.extra_c1 == Approx(-1.801165820708e-07).epsilon(1e-9));
}

TEST_CASE("g2_zero basics") {
    SteadyState ss;
    ss.p1 = complexd(0.3, -0.2);
    ss.p2 = ss.p1 * 2.7;  // identical phasors up to positive scale
    REQUIRE(g2_zero(ss) == Approx(1.0));
    ss.p2 = -ss.p1;
    REQUIRE(g2_zero(ss) == Approx(-1.0));
    ss.p1 = complexd(1.0, 0.0);
    ss.p2 = complexd(-1.0, 0.0);
    REQUIRE(g2_zero(ss) == Approx(-1.0));
    ss.p2 = complexd(0.0, 0.0);
    REQUIRE_THROWS_AS(g2_zero(ss), undefined_correlation_error);
}

TEST_CASE("g2_zero is the cosine of the polarization angle, |g2| <= 1") {
    std::mt19937_64 rng(97);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        SteadyState ss;
        ss.p1 = complexd(u(rng), u(rng));
        ss.p2 = complexd(u(rng), u(rng));
        if (std::abs(ss.p1) < 1e-3 || std::abs(ss.p2) < 1e-3) continue;
        const double g2 = g2_zero(ss);
        REQUIRE(std::abs(g2) <= 1.0);
        const double angle = std::arg(ss.p2) - std::arg(ss.p1);
        REQUIRE(g2 == Approx(std::cos(angle)).epsilon(1e-12));
    }
}

TEST_CASE("g2_zero fixture at reference parameters, delta = 1 MHz") {
    const SteadyState ss = steady_state(build_bloch_system(reference_params(1.0)));
    REQUIRE(g2_zero(ss) == Approx(0.747691411824).epsilon(1e-10));
}

TEST_CASE("phasor model: common shifts leave pure phase modulation") {
    PhasorShifts s;
    s.carrier1 = s.carrier2 = s.upper1 = s.lower1 = s.upper2 = s.lower2 = 0.83;
    const PhasorResult r = phasor_model(s, complexd(0.1, 0.05));
    REQUIRE(std::abs(r.am1) < 1e-15);
    REQUIRE(std::abs(r.am2) < 1e-15);
    REQUIRE(r.sign_of_correlation == 0);
}

TEST_CASE("phasor model: zero shifts keep PM as PM") {
    const PhasorResult r = phasor_model(PhasorShifts{}, complexd(0.2, 0.0));
    REQUIRE(std::abs(r.am1) < 1e-15);
    REQUIRE(std::abs(r.am2) < 1e-15);
}

TEST_CASE("phasor model: process-2 resonance anticorrelates the beams") {
    // Field-2 carrier degenerate with field-1 upper sideband; the shared
    // optical component picks up the resonant phase shift, all others do not.
    const double s = 0.3;
    PhasorShifts sh;
    sh.upper1 = s;    // field-1 upper sideband at the resonant frequency
    sh.carrier2 = s;  // same optical frequency = field-2 carrier
    const PhasorResult r = phasor_model(sh, complexd(0.05, 0.0));
    REQUIRE(std::abs(r.am1) > 0.0);
    REQUIRE(std::abs(r.am2) > 0.0);
    REQUIRE(r.sign_of_correlation == -1);
}

TEST_CASE("moment engine: mean equals deterministic steady state") {
    const SystemParams p = reference_params(0.9);
    const BlochSystem sys = build_bloch_system(p);
    const SteadyState ss = steady_state(sys);
    const MomentEngine eng(sys, p);
    // variance of Im p1 must be real positive
    const complexd c22 = eng.covariance(kRho13, kRho13);
    const complexd c23 = eng.covariance(kRho13, kRho31);
    const complexd c33 = eng.covariance(kRho31, kRho31);
    const double var_im = (-0.25 * (c22 + c33 - 2.0 * c23)).real();
    REQUIRE(var_im >= 0.0);
    (void)ss;
}

TEST_CASE("full spectra: frozen references from the independent prototype") {
    // linear-observable second-moment engine, cross-implemented in numpy
    {
        const SystemParams p = reference_params(0.3);
        const auto f = full_spectra(p, mhz_to_rad_us(2.0));
        REQUIRE(f.s11 == Approx(5.884519472980e-07).epsilon(1e-8));
        REQUIRE(f.s22 == Approx(2.841705374775e-07).epsilon(1e-8));
        REQUIRE(f.s12 == Approx(-1.879492747209e-07).epsilon(1e-8));
        REQUIRE(f.c == Approx(-0.459616517332).epsilon(1e-8));
    }
    {
        const auto f = full_spectra(reference_params(4.0, 6.0), mhz_to_rad_us(2.0));
        REQUIRE(f.c == Approx(0.768171479090).epsilon(1e-8));
    }
    {
        const auto f = full_spectra(reference_params(0.0), mhz_to_rad_us(2.0));
        REQUIRE(f.c == Approx(0.992150030155).epsilon(1e-8));
    }
}

TEST_CASE("full spectra converge to the lowest-order path as gamma_bar -> 0") {
    // smooth scan point: D1 = 0.2, delta = 3, omega = 2pi x 2
    SystemParams p = reference_params(3.0);
    const double c_pert = correlation_point(decompose(p, 2.0));
    double prev_gap = 1e9;
    for (double gb : {0.01, 0.003, 0.001}) {
        p.gamma_bar = mhz_to_rad_us(gb);
        const auto f = full_spectra(p, mhz_to_rad_us(2.0));
        const double gap = std::abs(f.c - c_pert);
        REQUIRE(gap < prev_gap + 1e-12);
        prev_gap = gap;
        // spectra ratio approaches 1 linearly in gamma_bar
        const BlochSystem sys = build_bloch_system(p);
        const SteadyState ss = steady_state(sys);
        const SpectralDecomposition dec = noise_spectra(sys, ss, p, mhz_to_rad_us(2.0));
        REQUIRE(f.s11 / dec.s11 == Approx(1.0).margin(6.0 * gb));
    }
    REQUIRE(prev_gap < 2e-3);
}

TEST_CASE("full spectra satisfy Cauchy-Schwarz") {
    for (double d : {-5.0, -2.0, 0.0, 0.05, 1.0, 4.0})
        for (double w : {2.0, 4.0}) {
            const auto f = full_spectra(reference_params(d), mhz_to_rad_us(w));
            REQUIRE(f.s11 >= 0.0);
            REQUIRE(f.s22 >= 0.0);
            REQUIRE(f.s12 * f.s12 <= f.s11 * f.s22 * (1.0 + 1e-9));
        }
}
