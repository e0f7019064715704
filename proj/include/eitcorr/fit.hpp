#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "eitcorr/errors.hpp"

namespace eitcorr {

enum class ExtremumKind { kPeak, kDip };

/// Local minima of a sampled curve (interior points only). Plateaus count
/// once, at their left edge.
inline std::vector<std::pair<double, double>> local_minima(
    const std::vector<std::pair<double, double>>& curve) {
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 1; i + 1 < curve.size(); ++i)
        if (curve[i].second < curve[i - 1].second && curve[i].second <= curve[i + 1].second)
            out.push_back(curve[i]);
    return out;
}

inline std::vector<std::pair<double, double>> local_maxima(
    const std::vector<std::pair<double, double>>& curve) {
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 1; i + 1 < curve.size(); ++i)
        if (curve[i].second > curve[i - 1].second && curve[i].second >= curve[i + 1].second)
            out.push_back(curve[i]);
    return out;
}

namespace detail {
inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace detail

/// FWHM of the unique interior extremum of a sampled curve, by half-max
/// crossings with linear interpolation between samples. The baseline is the
/// median of the outer 10% of points (both ends pooled).
inline double fit_linewidth(const std::vector<std::pair<double, double>>& curve,
                            ExtremumKind kind) {
    const std::size_t n = curve.size();
    if (n < 5) throw invalid_parameter_error("fit_linewidth: need at least 5 points");
    for (std::size_t i = 1; i < n; ++i)
        if (!(curve[i].first > curve[i - 1].first))
            throw invalid_parameter_error("fit_linewidth: abscissa must be strictly increasing");

    const double sgn = kind == ExtremumKind::kPeak ? 1.0 : -1.0;
    std::size_t idx = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (sgn * curve[i].second > sgn * curve[idx].second) idx = i;
    if (idx == 0 || idx == n - 1)
        throw boundary_extremum_error("fit_linewidth: extremum at grid boundary");

    const std::size_t k = std::max<std::size_t>(1, n / 20);  // 5% per end
    std::vector<double> outer;
    for (std::size_t i = 0; i < k; ++i) {
        outer.push_back(curve[i].second);
        outer.push_back(curve[n - 1 - i].second);
    }
    const double baseline = detail::median_of(outer);
    const double extremum = curve[idx].second;
    if (sgn * (extremum - baseline) <= 0.0)
        throw no_extremum_error("fit_linewidth: no extremum above the baseline");
    const double half = 0.5 * (extremum + baseline);

    auto cross = [&](bool leftward) -> double {
        std::size_t prev = idx;
        for (;;) {
            const std::size_t next = leftward ? prev - 1 : prev + 1;
            if ((sgn * (curve[next].second - half)) * (sgn * (curve[prev].second - half)) <=
                    0.0 &&
                curve[next].second != curve[prev].second) {
                const double f = (half - curve[prev].second) /
                                 (curve[next].second - curve[prev].second);
                return curve[prev].first + f * (curve[next].first - curve[prev].first);
            }
            prev = next;
            if ((leftward && prev == 0) || (!leftward && prev == n - 1)) break;
        }
        throw no_extremum_error("fit_linewidth: half-max crossing not bracketed by the grid");
    };
    const double left = cross(true);
    const double right = cross(false);
    return right - left;
}

}  // namespace eitcorr
