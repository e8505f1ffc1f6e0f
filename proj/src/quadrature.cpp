#include "fracweak/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fracweak/errors.hpp"
#include "fracweak/summation.hpp"

namespace fracweak {

namespace {

struct Segment {
    double a;
    double b;
    double value;
    double error;
    // Part of the error that bisection can still remove; the rest is roundoff.
    double reducible;
};

struct LargerError {
    bool operator()(const Segment& lhs, const Segment& rhs) const { return lhs.reducible < rhs.reducible; }
};

// 21-point Kronrod rule with its embedded 10-point Gauss rule, nodes and weights from
// Boost.Math. The error estimate follows QUADPACK's QK21, including its roundoff floor.
Segment kronrod_segment(const Integrand& f, double a, double b) {
    using kronrod = boost::math::quadrature::gauss_kronrod<double, 21>;
    using gauss = boost::math::quadrature::gauss<double, 10>;
    const auto& x = kronrod::abscissa();
    const auto& wk = kronrod::weights();
    const auto& wg = gauss::weights();
    constexpr double eps = std::numeric_limits<double>::epsilon();

    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double fv[21];
    fv[0] = f(center);
    double res_k = wk[0] * fv[0];
    double res_g = 0.0;
    double res_abs = std::abs(res_k);
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double fp = f(center + half * x[i]);
        const double fm = f(center - half * x[i]);
        fv[2 * i - 1] = fp;
        fv[2 * i] = fm;
        res_k += wk[i] * (fp + fm);
        res_abs += wk[i] * (std::abs(fp) + std::abs(fm));
        if (i % 2 == 1) res_g += wg[i / 2] * (fp + fm);
    }
    const double mean = 0.5 * res_k;
    double res_asc = wk[0] * std::abs(fv[0] - mean);
    for (std::size_t i = 1; i < x.size(); ++i) {
        res_asc += wk[i] * (std::abs(fv[2 * i - 1] - mean) + std::abs(fv[2 * i] - mean));
    }
    res_asc *= std::abs(half);
    res_abs *= std::abs(half);
    double err = std::abs((res_k - res_g) * half);
    if (res_asc != 0.0 && err != 0.0) err = res_asc * std::min(1.0, std::pow(200.0 * err / res_asc, 1.5));
    const double floor = 50.0 * eps * res_abs;
    err = std::max(err, floor);
    if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
    return {a, b, res_k * half, err, err - floor};
}

}  // namespace

QuadResult integrate_adaptive(const Integrand& f, double a, double b, const QuadOptions& opts) {
    if (a == b) return {};
    if (b < a) {
        QuadResult r = integrate_adaptive(f, b, a, opts);
        r.value = -r.value;
        return r;
    }

    std::priority_queue<Segment, std::vector<Segment>, LargerError> queue;
    Segment first = kronrod_segment(f, a, b);
    double total_error = first.error;
    double total_reducible = first.reducible;
    queue.push(first);

    // Converged once within tolerance, or once what is left is roundoff that bisection cannot remove.
    auto done = [&] { return total_error <= opts.abs_tol || total_reducible <= 0.01 * opts.abs_tol; };

    std::size_t subdivisions = 0;
    bool stalled = false;
    while (!done() && subdivisions < opts.max_subdivisions) {
        Segment worst = queue.top();
        const double mid = 0.5 * (worst.a + worst.b);
        // Interval collapsed to adjacent doubles; nothing more to gain here.
        if (!(mid > worst.a && mid < worst.b)) {
            stalled = true;
            break;
        }
        queue.pop();
        Segment left = kronrod_segment(f, worst.a, mid);
        Segment right = kronrod_segment(f, mid, worst.b);
        total_error += left.error + right.error - worst.error;
        total_reducible += left.reducible + right.reducible - worst.reducible;
        queue.push(left);
        queue.push(right);
        ++subdivisions;
    }
    const bool converged = !stalled && done();

    // Re-sum from the leaves so the running updates do not accumulate cancellation.
    CompensatedSum value;
    CompensatedSum error;
    while (!queue.empty()) {
        value += queue.top().value;
        error += queue.top().error;
        queue.pop();
    }
    return {value.value(), error.value(), subdivisions, converged};
}

QuadResult integrate_or_throw(const Integrand& f, double a, double b, const QuadOptions& opts) {
    QuadResult r = integrate_adaptive(f, a, b, opts);
    if (!r.converged) {
        std::ostringstream msg;
        msg << "adaptive quadrature on [" << a << ", " << b << "] stopped at estimated error "
            << r.abs_error << " (tolerance " << opts.abs_tol << ") after " << r.subdivisions
            << " subdivisions";
        throw AccuracyError(msg.str(), r.value, r.abs_error);
    }
    return r;
}

QuadResult integrate_left_singular(const Integrand& g, double gamma, double a, double b,
                                   const QuadOptions& opts) {
    if (!(gamma > -1.0)) throw DomainError("integrate_left_singular: exponent must exceed -1");
    if (b < a) throw DomainError("integrate_left_singular: b < a");
    const double p = gamma + 1.0;
    const double inv_p = 1.0 / p;
    const double upper = std::pow(b - a, p);
    auto substituted = [&](double v) { return g(a + std::pow(v, inv_p)) * inv_p; };
    return integrate_adaptive(substituted, 0.0, upper, opts);
}

QuadResult integrate_right_singular(const Integrand& g, double gamma, double a, double b,
                                    const QuadOptions& opts) {
    if (!(gamma > -1.0)) throw DomainError("integrate_right_singular: exponent must exceed -1");
    if (b < a) throw DomainError("integrate_right_singular: b < a");
    const double p = gamma + 1.0;
    const double inv_p = 1.0 / p;
    const double upper = std::pow(b - a, p);
    auto substituted = [&](double v) { return g(b - std::pow(v, inv_p)) * inv_p; };
    return integrate_adaptive(substituted, 0.0, upper, opts);
}

}  // namespace fracweak
