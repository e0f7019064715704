#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>

#include "eitcorr/errors.hpp"
#include "eitcorr/params.hpp"

namespace eitcorr {

using complexd = std::complex<double>;
using Matrix8cd = Eigen::Matrix<complexd, 8, 8>;
using Vector8cd = Eigen::Matrix<complexd, 8, 1>;

/// Component ordering of the Bloch vector x. rho33 is eliminated by trace
/// conservation, which produces the constant drive x0 in dx/dt = M x + x0.
enum BlochIndex : int {
    kRho11 = 0,
    kRho22 = 1,
    kRho13 = 2,  // p1
    kRho31 = 3,
    kRho23 = 4,  // p2
    kRho32 = 5,
    kRho12 = 6,
    kRho21 = 7,
};

/// Bloch evolution matrix of the Lambda system, dx/dt = M x + x0.
///
/// M contains the coherent dynamics plus Gamma and gamma_d relaxation; the
/// laser linewidth gamma_bar is NOT included here (phase noise enters through
/// the perturbative drive or the stochastic oracle, never as homogeneous
/// broadening). U maps components 3-6 (the optical coherences) onto their
/// imaginary/real parts: (Im p1, Re p1, Im p2, Re p2).
struct BlochSystem {
    Matrix8cd m;
    Vector8cd x0;
    Matrix8cd u;

    Matrix8cd u_inverse() const {
        Matrix8cd ui = Matrix8cd::Identity();
        const complexd i(0.0, 1.0);
        for (int b : {kRho13, kRho23}) {
            ui(b, b) = i;
            ui(b, b + 1) = 1.0;
            ui(b + 1, b) = -i;
            ui(b + 1, b + 1) = 1.0;
        }
        return ui;
    }
};

/// Rotating-wave Bloch matrix for the closed Lambda system.
///
/// Conventions: detunings Delta_i = (laser i) - (transition i); excited state
/// decays at Gamma split equally (Gamma/2) into each ground state; optical
/// coherences decay at Gamma/2; the ground coherence rho12 decays at gamma_d
/// and precesses at the two-photon detuning delta = Delta2 - Delta1.
inline BlochSystem build_bloch_system(const SystemParams& p) {
    p.validate();
    const complexd i(0.0, 1.0);
    const double g = p.gamma, gd = p.gamma_d;
    const double w1 = p.rabi1, w2 = p.rabi2, d1 = p.delta1, d2 = p.delta2;

    BlochSystem sys;
    Matrix8cd& m = sys.m;
    m.setZero();

    m(kRho11, kRho11) = -g / 2;
    m(kRho11, kRho22) = -g / 2;
    m(kRho11, kRho13) = i * w1 / 2.0;
    m(kRho11, kRho31) = -i * w1 / 2.0;

    m(kRho22, kRho11) = -g / 2;
    m(kRho22, kRho22) = -g / 2;
    m(kRho22, kRho23) = i * w2 / 2.0;
    m(kRho22, kRho32) = -i * w2 / 2.0;

    m(kRho13, kRho11) = i * w1;
    m(kRho13, kRho22) = i * w1 / 2.0;
    m(kRho13, kRho13) = -(g / 2 + i * d1);
    m(kRho13, kRho12) = i * w2 / 2.0;

    m(kRho31, kRho11) = -i * w1;
    m(kRho31, kRho22) = -i * w1 / 2.0;
    m(kRho31, kRho31) = -(g / 2 - i * d1);
    m(kRho31, kRho21) = -i * w2 / 2.0;

    m(kRho23, kRho11) = i * w2 / 2.0;
    m(kRho23, kRho22) = i * w2;
    m(kRho23, kRho23) = -(g / 2 + i * d2);
    m(kRho23, kRho21) = i * w1 / 2.0;

    m(kRho32, kRho11) = -i * w2 / 2.0;
    m(kRho32, kRho22) = -i * w2;
    m(kRho32, kRho32) = -(g / 2 - i * d2);
    m(kRho32, kRho12) = -i * w1 / 2.0;

    m(kRho12, kRho13) = i * w2 / 2.0;
    m(kRho12, kRho32) = -i * w1 / 2.0;
    m(kRho12, kRho12) = i * (d2 - d1) - gd;

    m(kRho21, kRho31) = -i * w2 / 2.0;
    m(kRho21, kRho23) = i * w1 / 2.0;
    m(kRho21, kRho21) = -i * (d2 - d1) - gd;

    sys.x0 << g / 2, g / 2, -i * w1 / 2.0, i * w1 / 2.0, -i * w2 / 2.0, i * w2 / 2.0, 0.0, 0.0;

    sys.u = Matrix8cd::Identity();
    for (int b : {kRho13, kRho23}) {
        sys.u(b, b) = -i / 2.0;
        sys.u(b, b + 1) = i / 2.0;
        sys.u(b + 1, b) = 0.5;
        sys.u(b + 1, b + 1) = 0.5;
    }
    return sys;
}

/// Zeroth-order stationary solution M x_ss + x0 = 0.
struct SteadyState {
    Vector8cd x_ss;
    complexd p1;                        ///< rho13 steady state
    complexd p2;                        ///< rho23 steady state
    std::array<double, 3> populations;  ///< (rho11, rho22, rho33)
};

inline SteadyState steady_state(const BlochSystem& sys) {
    // Both couplings absent leaves ground populations undetermined.
    const bool no_drive = sys.m(kRho11, kRho13) == complexd(0) &&
                          sys.m(kRho11, kRho31) == complexd(0) &&
                          sys.m(kRho22, kRho23) == complexd(0) &&
                          sys.m(kRho22, kRho32) == complexd(0);
    if (no_drive)
        throw degenerate_input_error(
            "steady_state: both Rabi frequencies are zero; ground populations undetermined");

    Eigen::PartialPivLU<Matrix8cd> lu(sys.m);
    Vector8cd x = lu.solve(-sys.x0);
    // one step of iterative refinement keeps the residual near machine level
    Vector8cd r = sys.m * x + sys.x0;
    x -= lu.solve(r);

    const double resid = (sys.m * x + sys.x0).norm();
    if (!(resid <= 1e-10 * sys.x0.norm()))
        throw singular_matrix_error("steady_state: linear solve residual too large");

    SteadyState ss;
    ss.x_ss = x;
    ss.p1 = x(kRho13);
    ss.p2 = x(kRho23);
    const double r11 = x(kRho11).real();
    const double r22 = x(kRho22).real();
    ss.populations = {r11, r22, 1.0 - r11 - r22};
    return ss;
}

/// Mean thin-sample transmissions of the two beams, from E_out = E + i kappa P:
/// t_i = 1 - 2 kappa_i Im p_i + kappa_i^2 |p_i|^2 (field-amplitude
/// normalization folded into kappa_i). Negative values are clamped and flagged.
struct DcTransmission {
    double t1 = 1.0;
    double t2 = 1.0;
    bool clamped1 = false;
    bool clamped2 = false;
};

inline DcTransmission dc_transmission(const SteadyState& ss, const SystemParams& p) {
    auto one = [](double kappa, complexd pol, double& t, bool& clamped) {
        t = 1.0 - 2.0 * kappa * pol.imag() + kappa * kappa * std::norm(pol);
        if (t < 0.0) {
            t = 0.0;
            clamped = true;
        }
    };
    DcTransmission dc;
    one(p.kappa1, ss.p1, dc.t1, dc.clamped1);
    one(p.kappa2, ss.p2, dc.t2, dc.clamped2);
    return dc;
}

}  // namespace eitcorr
