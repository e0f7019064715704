#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "eitcorr/bloch.hpp"
#include "eitcorr/errors.hpp"
#include "eitcorr/params.hpp"
#include "eitcorr/spectra.hpp"

namespace eitcorr {

// Exact (all orders in gamma_bar) intensity noise spectra for the phase-
// diffusion model. The Ito dynamics dx = (M x + x0) dt + sum_s D_s x dphi_s
// is bilinear, so moment equations close order by order: the stationary
// second moments <x_k x_l> solve a 36-dimensional linear system, and the
// two-time covariance of linear observables regresses with e^{M tau}. With
// the linearized intensity dI_i = -2 kappa_i Im dp_i this gives
//   S_ab(w) = (1/4pi) [F_ab + F_ba + c.c.],  F_ab = w_b^T (i w I - M)^-1 u_a,
// where u_a = <dx dI_a> comes from the stationary second moments. This is the
// deterministic counterpart of the Monte-Carlo oracle (same model, all noise
// orders), complementing the lowest-order decomposition in spectra.hpp.
class MomentEngine {
  public:
    MomentEngine(const BlochSystem& sys, const SystemParams& params)
        : m_(sys.m), gbar_(params.gamma_bar) {
        params.validate();
        const SteadyState ss = steady_state(sys);
        m1_ = ss.x_ss;

        // pair-noise coefficient dd(k,l) entering the diagonal of the
        // second-moment generator
        const Vector8cd d1 = detuning_shift_diag_1();
        const Vector8cd d2 = detuning_shift_diag_2();
        const Vector8cd dc = d1 + d2;
        const double r = params.phase_noise_correlation;
        Eigen::Matrix<complexd, 8, 8> dd;
        for (int k = 0; k < 8; ++k)
            for (int l = 0; l < 8; ++l)
                dd(k, l) = 2.0 * gbar_ *
                           (r * dc(k) * dc(l) +
                            (1.0 - r) * (d1(k) * d1(l) + d2(k) * d2(l)));

        // stationary second moments on the 36 symmetric pairs (k <= l)
        Eigen::MatrixXcd gen = Eigen::MatrixXcd::Zero(kPairs, kPairs);
        Eigen::VectorXcd src = Eigen::VectorXcd::Zero(kPairs);
        for (int ri = 0; ri < kPairs; ++ri) {
            const auto [k, l] = pair_of(ri);
            const std::pair<int, int> slots[2] = {{k, l}, {l, k}};
            for (const auto& [slot, other] : slots) {
                for (int c = 0; c < 8; ++c) {
                    if (m_(slot, c) != complexd(0.0))
                        gen(ri, pair_index(std::min(c, other), std::max(c, other))) +=
                            m_(slot, c);
                }
                src(ri) += sys.x0(slot) * m1_(other);
            }
            gen(ri, ri) += dd(k, l);
        }
        m2_ = Eigen::PartialPivLU<Eigen::MatrixXcd>(gen).solve(-src);
        const double resid = (gen * m2_ + src).norm();
        if (!(resid <= 1e-9 * std::max(src.norm(), 1e-300)))
            throw singular_matrix_error("MomentEngine: second-moment system singular "
                                        "(noise-destabilized dynamics?)");
    }

    /// Stationary covariance <dx_k dx_j>.
    complexd covariance(int k, int j) const {
        return m2_(pair_index(std::min(k, j), std::max(k, j))) - m1_(k) * m1_(j);
    }

    struct FullSpectra {
        double s11 = 0.0, s22 = 0.0, s12 = 0.0;
        double c = std::numeric_limits<double>::quiet_NaN();
        bool c_defined = false;
    };

    /// Symmetrized spectra of the linearized intensities at analysis
    /// frequency omega (same convention as spectra.hpp).
    FullSpectra spectra(double omega, double kappa1, double kappa2) const {
        const complexd i(0.0, 1.0);
        std::array<Vector8cd, 2> w{Vector8cd::Zero(), Vector8cd::Zero()};
        w[0](kRho13) = i * kappa1;
        w[0](kRho31) = -i * kappa1;
        w[1](kRho23) = i * kappa2;
        w[1](kRho32) = -i * kappa2;

        std::array<Vector8cd, 2> u;
        for (int a = 0; a < 2; ++a) {
            for (int k = 0; k < 8; ++k) {
                complexd acc(0.0, 0.0);
                for (int j : {kRho13, kRho31, kRho23, kRho32})
                    acc += w[a](j) * covariance(k, j);
                u[a](k) = acc;
            }
        }

        const Matrix8cd kernel = complexd(0.0, omega) * Matrix8cd::Identity() - m_;
        Eigen::PartialPivLU<Matrix8cd> lu(kernel);
        const Vector8cd y0 = lu.solve(u[0]);
        const Vector8cd y1 = lu.solve(u[1]);

        auto f = [&](int bIdx, const Vector8cd& ya) {
            return (w[bIdx].transpose() * ya)(0, 0);
        };
        const double inv_pi = 1.0 / std::numbers::pi;
        FullSpectra out;
        out.s11 = inv_pi * f(0, y0).real();
        out.s22 = inv_pi * f(1, y1).real();
        out.s12 = 0.5 * inv_pi * (f(1, y0) + f(0, y1)).real();
        // spectra below ~1e-30 are dark-state roundoff, not physics
        if (out.s11 > 0.0 && out.s22 > 0.0 && std::sqrt(out.s11 * out.s22) > 1e-30) {
            out.c = out.s12 / std::sqrt(out.s11 * out.s22);
            out.c_defined = true;
        }
        return out;
    }

  private:
    static constexpr int kPairs = 36;

    // symmetric pair (k,l), k <= l  <->  flat index
    static constexpr int pair_index(int k, int l) { return k * 8 - k * (k - 1) / 2 + (l - k); }
    static constexpr std::pair<int, int> pair_of(int idx) {
        for (int k = 0; k < 8; ++k) {
            const int base = pair_index(k, k);
            if (idx < base + (8 - k)) return {k, k + (idx - base)};
        }
        return {7, 7};
    }

    Matrix8cd m_;
    double gbar_;
    Vector8cd m1_;
    Eigen::VectorXcd m2_;
};

/// One-call helper: exact C(omega) and spectra at a parameter point.
inline MomentEngine::FullSpectra full_spectra(const SystemParams& params, double omega) {
    const BlochSystem sys = build_bloch_system(params);
    return MomentEngine(sys, params).spectra(omega, params.kappa1, params.kappa2);
}

}  // namespace eitcorr
