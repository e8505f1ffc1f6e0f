#pragma once

#include <vector>

#include "fracweak/grid_kernel.hpp"

namespace fracweak {

struct LadderPoint {
    int n = 0;
    double error = 0.0;
    /// Error estimate of `error` itself (quadrature or MC); 0 when exact.
    double est_abs_error = 0.0;
};

/// Least-squares fit of log10(error) against log10(n): error ~ 10^intercept n^slope.
struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::vector<LadderPoint> ladder;
    /// Points left out: non-positive error, or est_abs_error above 10% of the error.
    std::vector<LadderPoint> excluded;

    double rate() const noexcept { return -slope; }
    /// 10^intercept, the constant in front of n^slope.
    double constant() const;
};

/// Throws InsufficientDataError with fewer than 3 usable points or repeated n.
RateFit fit_rate(const std::vector<LadderPoint>& ladder);

struct SeriesValue {
    double value = 0.0;
    long long terms_used = 0;
    double tail_bound = 0.0;
};

/// C = sum over i >= kappa of the variance of r^{H-1/2} over [i, i+1]:
/// ((i+1)^{2H} - i^{2H})/(2H) - (((i+1)^{H+1/2} - i^{H+1/2})/(H+1/2))^2.
SeriesValue series_constant_C(int kappa, const Hurst& hurst, double tol = 1e-12);

/// C_{kappa,H} = sum over k >= kappa of (((k+1)^{2H} - k^{2H})/(2H))^{1/2} - ((k+1)^{H+1/2} - k^{H+1/2})/(H+1/2).
SeriesValue series_constant_C_kappa_H(int kappa, const Hurst& hurst, double tol = 1e-12);

/// One term of each series, evaluated without cancellation for large i.
double series_term_C(int i, const Hurst& hurst);
double series_term_C_kappa_H(int k, const Hurst& hurst);

/// Leading constant of the hybrid weak error for Phi = x^3/6: C_{kappa,H} / (2H (3H + 3/2)).
double leading_constant_hat_C(int kappa, const Hurst& hurst);

/// n solving hat_C n^{-H-1/2} = tilde_C n^{-3H-1/2}, i.e. (tilde_C / hat_C)^{1/(2H)}.
double crossover_n(double hat_C, double tilde_C, const Hurst& hurst);

}  // namespace fracweak
