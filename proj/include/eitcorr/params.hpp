#pragma once

#include <cmath>
#include <string>

#include "eitcorr/errors.hpp"
#include "eitcorr/units.hpp"

namespace eitcorr {

/// Physical parameters of the driven three-level Lambda system.
///
/// Level scheme: two ground states |1>, |2> coupled to one excited state |3>
/// by fields 1 and 2. All rates are angular frequencies in rad/us.
struct SystemParams {
    double gamma = mhz_to_rad_us(6.0);       ///< excited-state decay rate Gamma
    double gamma_d = khz_to_rad_us(150.0);   ///< ground-coherence decay rate
    double gamma_bar = mhz_to_rad_us(1.0);   ///< laser phase-diffusion coefficient
    double rabi1 = 0.30 * mhz_to_rad_us(6.0);
    double rabi2 = 0.34 * mhz_to_rad_us(6.0);
    double delta1 = mhz_to_rad_us(0.2);      ///< one-photon detuning of field 1
    double delta2 = mhz_to_rad_us(0.2);      ///< one-photon detuning of field 2
    double kappa1 = 0.1;                     ///< thin-sample coupling, field 1
    double kappa2 = 0.1;
    /// Cross-correlation of the two beams' phase noise in [0,1]. 1 = common
    /// noise (both beams from the same laser).
    double phase_noise_correlation = 1.0;

    /// Two-photon detuning delta = Delta2 - Delta1 (derived, never stored).
    double two_photon_detuning() const { return delta2 - delta1; }

    void validate() const {
        auto bad = [](double v) { return !std::isfinite(v); };
        if (bad(gamma) || bad(gamma_d) || bad(gamma_bar) || bad(rabi1) || bad(rabi2) ||
            bad(delta1) || bad(delta2) || bad(kappa1) || bad(kappa2) ||
            bad(phase_noise_correlation))
            throw invalid_parameter_error("SystemParams: non-finite value");
        if (gamma <= 0.0) throw invalid_parameter_error("SystemParams: gamma must be > 0");
        if (gamma_d < 0.0) throw invalid_parameter_error("SystemParams: gamma_d must be >= 0");
        if (gamma_bar < 0.0) throw invalid_parameter_error("SystemParams: gamma_bar must be >= 0");
        if (rabi1 < 0.0 || rabi2 < 0.0)
            throw invalid_parameter_error("SystemParams: Rabi frequencies must be >= 0");
        if (kappa1 < 0.0 || kappa2 < 0.0)
            throw invalid_parameter_error("SystemParams: kappa must be >= 0");
        if (phase_noise_correlation < 0.0 || phase_noise_correlation > 1.0)
            throw invalid_parameter_error("SystemParams: phase_noise_correlation must be in [0,1]");
    }
};

}  // namespace eitcorr
