#pragma once

#include <cstddef>
#include <functional>

#include <boost/math/quadrature/gauss.hpp>

namespace fracweak {

struct QuadOptions {
    double abs_tol = 1e-12;
    std::size_t max_subdivisions = std::size_t{1} << 16;
};

struct QuadResult {
    double value = 0.0;
    double abs_error = 0.0;
    std::size_t subdivisions = 0;
    bool converged = true;
};

using Integrand = std::function<double(double)>;

/// Global adaptive Gauss-Kronrod (21-point rule) on [a, b]. The interval with the
/// largest local error estimate is bisected until the summed estimate drops below
/// abs_tol or the subdivision budget is spent. Never throws; check `converged`.
QuadResult integrate_adaptive(const Integrand& f, double a, double b, const QuadOptions& opts = {});

/// Same as integrate_adaptive but throws AccuracyError when the budget runs out.
QuadResult integrate_or_throw(const Integrand& f, double a, double b, const QuadOptions& opts = {});

/// Integral of (x - a)^gamma * g(x) over [a, b], gamma > -1, with the endpoint
/// singularity removed by the substitution x - a = v^{1/(gamma+1)}.
QuadResult integrate_left_singular(const Integrand& g, double gamma, double a, double b,
                                   const QuadOptions& opts = {});

/// Integral of (b - x)^gamma * g(x) over [a, b], singularity at the right endpoint.
QuadResult integrate_right_singular(const Integrand& g, double gamma, double a, double b,
                                    const QuadOptions& opts = {});

/// Fixed-order rule for inlined lambdas; nodes come from Boost.Math.
/// Supported orders are the ones Boost tabulates: 7, 10, 15, 20, 25, 30.
template <unsigned N, class F>
double gauss_legendre(F&& f, double a, double b) {
    using rule = boost::math::quadrature::gauss<double, N>;
    const auto& x = rule::abscissa();
    const auto& w = rule::weights();
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    std::size_t start = 0;
    if constexpr (N % 2 == 1) {
        sum = w[0] * f(mid);
        start = 1;
    }
    for (std::size_t i = start; i < x.size(); ++i) {
        sum += w[i] * (f(mid + half * x[i]) + f(mid - half * x[i]));
    }
    return half * sum;
}

}  // namespace fracweak
