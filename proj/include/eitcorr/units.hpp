#pragma once

// Unit conventions: all internal rates, detunings and Rabi frequencies are
// angular frequencies in rad/us. External I/O (CLI flags, config files, CSV
// columns) uses ordinary frequency in MHz; conversion is a factor 2*pi at the
// boundary (1 MHz ordinary = 2*pi rad/us).

#include <numbers>

namespace eitcorr {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double mhz_to_rad_us(double mhz) { return two_pi * mhz; }
inline constexpr double rad_us_to_mhz(double w) { return w / two_pi; }
inline constexpr double khz_to_rad_us(double khz) { return two_pi * khz * 1e-3; }

}  // namespace eitcorr
