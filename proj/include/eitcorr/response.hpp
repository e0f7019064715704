#pragma once

#include <Eigen/Dense>
#include <complex>

#include "eitcorr/bloch.hpp"
#include "eitcorr/errors.hpp"

namespace eitcorr {

/// Frequency-domain response kernel chi(w) = (M - i w I)^-1, the
/// generalization of the w=0 steady-state inverse. Satisfies
/// chi(w) (M - i w I) = I; checked to 1e-10 and reported as a singularity
/// otherwise (cannot occur for a stable M, guarded defensively).
inline Matrix8cd response_kernel(const BlochSystem& sys, double omega) {
    const Matrix8cd a = sys.m - complexd(0.0, omega) * Matrix8cd::Identity();
    Eigen::PartialPivLU<Matrix8cd> lu(a);
    Matrix8cd chi = lu.solve(Matrix8cd::Identity());
    const double resid = (chi * a - Matrix8cd::Identity()).norm();
    if (!(resid <= 1e-10 * std::sqrt(8.0)))
        throw singular_matrix_error("response_kernel: (M - i w I) is numerically singular");
    return chi;
}

}  // namespace eitcorr
