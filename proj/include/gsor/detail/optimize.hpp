#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>

namespace gsor::detail {

struct ScalarMin {
    double x = 0.0;
    double value = std::numeric_limits<double>::infinity();
};

/// Golden-section search for a unimodal function on [lo, hi].
/// +inf values are allowed and treated as "worse than anything finite".
template <class F>
ScalarMin golden_section(F&& f, double lo, double hi, double x_tol, std::size_t max_iter = 200) {
    constexpr double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1);
    double f2 = f(x2);
    for (std::size_t it = 0; it < max_iter && (b - a) > x_tol; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    return f1 <= f2 ? ScalarMin{x1, f1} : ScalarMin{x2, f2};
}

/// Splits the logistic parametrisation tau = 1/(1+exp(-u)) into (1-tau, tau)
/// without cancellation at either end.
inline std::pair<double, double> logistic_weights(double u) {
    if (u >= 0) {
        const double e = std::exp(-u);
        return {e / (1.0 + e), 1.0 / (1.0 + e)};
    }
    const double e = std::exp(u);
    return {1.0 / (1.0 + e), e / (1.0 + e)};
}

inline double logit(double tau) { return std::log(tau) - std::log1p(-tau); }

}  // namespace gsor::detail
