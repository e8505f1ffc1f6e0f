#include "fracweak/rates_constants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "fracweak/errors.hpp"
#include "fracweak/quadrature.hpp"
#include "fracweak/summation.hpp"

namespace fracweak {

double RateFit::constant() const { return std::pow(10.0, intercept); }

RateFit fit_rate(const std::vector<LadderPoint>& ladder) {
    RateFit fit;
    std::set<int> seen;
    for (const auto& p : ladder) {
        const bool usable = p.n > 0 && p.error > 0.0 && std::isfinite(p.error) && p.est_abs_error <= 0.1 * p.error;
        if (!usable) {
            fit.excluded.push_back(p);
            continue;
        }
        if (!seen.insert(p.n).second) throw InsufficientDataError("rate fit ladder repeats n = " + std::to_string(p.n));
        fit.ladder.push_back(p);
    }
    if (fit.ladder.size() < 3) {
        std::ostringstream msg;
        msg << "rate fit needs at least 3 usable points, got " << fit.ladder.size();
        throw InsufficientDataError(msg.str());
    }
    const double m = static_cast<double>(fit.ladder.size());
    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : fit.ladder) {
        mx += std::log10(static_cast<double>(p.n));
        my += std::log10(p.error);
    }
    mx /= m;
    my /= m;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (const auto& p : fit.ladder) {
        const double dx = std::log10(static_cast<double>(p.n)) - mx;
        const double dy = std::log10(p.error) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (const auto& p : fit.ladder) {
        const double r = std::log10(p.error) - (fit.intercept + fit.slope * std::log10(static_cast<double>(p.n)));
        sse += r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    return fit;
}

namespace {

struct CellMoments {
    double second = 0.0;    // integral of r^{2H-1} over [i, i+1]
    double first = 0.0;     // integral of r^{H-1/2} over [i, i+1]
    double variance = 0.0;  // second - first^2
};

// For i >= 1 the variance comes from deviations about the midpoint value, each formed as
// c expm1(a log1p(x)), so nothing cancels when i is large.
CellMoments cell_moments(int i, const Hurst& hurst) {
    const double a = hurst.alpha();
    const double two_h = 2.0 * hurst.value();
    CellMoments m;
    if (i == 0) {
        m.second = 1.0 / two_h;
        m.first = 1.0 / hurst.beta();
        m.variance = a * a / (two_h * hurst.beta() * hurst.beta());
        return m;
    }
    m.second = kernel_sq_integral(hurst, i, i + 1.0);
    m.first = kernel_integral(hurst, i, i + 1.0);
    const double mid = i + 0.5;
    const double center = std::pow(mid, a);
    auto deviation = [&](double r) { return center * std::expm1(a * std::log1p((r - mid) / mid)); };
    const double d1 = gauss_legendre<20>(deviation, i, i + 1.0);
    const double d2 = gauss_legendre<20>([&](double r) { return deviation(r) * deviation(r); }, i, i + 1.0);
    m.variance = d2 - d1 * d1;
    return m;
}

// Sums term(i) for i >= kappa where term(i) ~ c i^p. The value includes the tail estimated
// by c times the integral of x^p over [N - 1/2, inf), with c fitted to the last term; the
// reported bound is twice the change in that estimate between N/2 and N terms.
template <class Term>
SeriesValue sum_series(Term term, int kappa, double p, double tol) {
    if (!(tol > 0.0)) throw ConfigError("series tolerance must be positive");
    if (kappa < 0) throw ConfigError("series start kappa must be non-negative");
    constexpr long long kMaxTerms = 1LL << 24;
    CompensatedSum partial;
    long long next = kappa;
    long long count = 64;
    double previous = std::numeric_limits<double>::quiet_NaN();
    for (;;) {
        const long long end = kappa + count;
        double last = 0.0;
        for (; next < end; ++next) {
            last = term(static_cast<int>(next));
            partial += last;
        }
        const double n = static_cast<double>(end);
        const double c = last / std::pow(n - 1.0, p);
        const double tail = c * std::pow(n - 0.5, p + 1.0) / (-p - 1.0);
        const double estimate = partial.value() + tail;
        if (std::isfinite(previous)) {
            const double bound =
                2.0 * std::abs(estimate - previous) + 8.0 * std::numeric_limits<double>::epsilon() * std::abs(estimate);
            if (bound <= tol || count >= kMaxTerms) return {estimate, count, bound};
        }
        previous = estimate;
        count *= 2;
    }
}

}  // namespace

double series_term_C(int i, const Hurst& hurst) {
    if (i < 0) throw DomainError("series term index must be non-negative");
    return cell_moments(i, hurst).variance;
}

double series_term_C_kappa_H(int k, const Hurst& hurst) {
    if (k < 0) throw DomainError("series term index must be non-negative");
    const CellMoments m = cell_moments(k, hurst);
    return m.variance / (std::sqrt(m.second) + m.first);
}

SeriesValue series_constant_C(int kappa, const Hurst& hurst, double tol) {
    return sum_series([&](int i) { return series_term_C(i, hurst); }, kappa, 2.0 * hurst.value() - 3.0, tol);
}

SeriesValue series_constant_C_kappa_H(int kappa, const Hurst& hurst, double tol) {
    return sum_series([&](int k) { return series_term_C_kappa_H(k, hurst); }, kappa, hurst.value() - 2.5, tol);
}

double leading_constant_hat_C(int kappa, const Hurst& hurst) {
    const double h = hurst.value();
    return series_constant_C_kappa_H(kappa, hurst).value / (2.0 * h * (3.0 * h + 1.5));
}

double crossover_n(double hat_C, double tilde_C, const Hurst& hurst) {
    if (!(hat_C > 0.0) || !(tilde_C > 0.0)) throw DomainError("crossover_n: constants must be positive");
    return std::pow(tilde_C / hat_C, 1.0 / (2.0 * hurst.value()));
}

}  // namespace fracweak
