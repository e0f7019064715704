#pragma once

#include <stdexcept>
#include <string>

namespace eitcorr {

// Base class so callers can catch any library error in one handler.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid physical parameter or scan/estimator configuration.
struct invalid_parameter_error : error {
    using error::error;
};

// (M - i w I) or M could not be inverted to the required residual.
struct singular_matrix_error : error {
    using error::error;
};

// Structurally under-determined input (e.g. both Rabi frequencies zero).
struct degenerate_input_error : error {
    using error::error;
};

// Correlation requested where S11*S22 = 0 or a polarization vanishes.
struct undefined_correlation_error : error {
    using error::error;
};

// Stochastic integration diverged (step size too large).
struct numerical_instability_error : error {
    using error::error;
};

// Not enough samples/segments for the requested spectral estimate.
struct insufficient_data_error : error {
    using error::error;
};

// Curve has no usable extremum for a linewidth fit.
struct no_extremum_error : error {
    using error::error;
};

// Extremum sits on the grid boundary; half-max crossings not bracketed.
struct boundary_extremum_error : error {
    using error::error;
};

struct io_error : error {
    using error::error;
};

}  // namespace eitcorr
