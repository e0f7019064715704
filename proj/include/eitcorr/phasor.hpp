#pragma once

#include <cmath>
#include <complex>

#include "eitcorr/errors.hpp"

namespace eitcorr {

// Linearized sideband picture of the phase-to-amplitude conversion: each
// optical component (carrier, upper/lower sideband at +-omega) acquires a
// phase shift from the atomic response. Starting from a pure phase
// modulation E' = alpha e^{i w t} + E - alpha* e^{-i w t}, the shifts leave a
// residual amplitude modulation with complex amplitude
//   A = alpha (e^{i(phi_u - phi_c)} - e^{i(phi_c - phi_l)}),
// and <dI_1 dI_2> over a beat period has the sign of Re[A1 conj(A2)].

struct PhasorShifts {
    double carrier1 = 0.0;
    double carrier2 = 0.0;
    double upper1 = 0.0;
    double lower1 = 0.0;
    double upper2 = 0.0;
    double lower2 = 0.0;
};

struct PhasorResult {
    std::complex<double> am1;  ///< residual AM quadratures of beam 1
    std::complex<double> am2;
    int sign_of_correlation = 0;  ///< sign of Re[am1 conj(am2)]; 0 when AM vanishes
};

inline PhasorResult phasor_model(const PhasorShifts& shifts,
                                 std::complex<double> sideband_amplitude) {
    for (double v : {shifts.carrier1, shifts.carrier2, shifts.upper1, shifts.lower1,
                     shifts.upper2, shifts.lower2})
        if (!std::isfinite(v)) throw invalid_parameter_error("phasor_model: non-finite shift");

    const std::complex<double> i(0.0, 1.0);
    auto am = [&](double up, double carrier, double low) {
        return sideband_amplitude *
               (std::exp(i * (up - carrier)) - std::exp(i * (carrier - low)));
    };
    PhasorResult out;
    out.am1 = am(shifts.upper1, shifts.carrier1, shifts.lower1);
    out.am2 = am(shifts.upper2, shifts.carrier2, shifts.lower2);
    const double corr = (out.am1 * std::conj(out.am2)).real();
    const double scale = std::abs(sideband_amplitude);
    if (std::abs(corr) > 1e-14 * scale * scale)
        out.sign_of_correlation = corr > 0.0 ? 1 : -1;
    return out;
}

}  // namespace eitcorr
