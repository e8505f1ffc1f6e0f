#include "fracweak/oracle_moments.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "fracweak/errors.hpp"
#include "fracweak/parallel.hpp"
#include "fracweak/quadrature.hpp"
#include "fracweak/summation.hpp"

namespace fracweak {

std::string_view to_string(MomentMethod method) {
    switch (method) {
        case MomentMethod::ClosedForm: return "closed_form";
        case MomentMethod::Quadrature: return "quadrature";
        case MomentMethod::GridSum: return "grid_sum";
    }
    return "?";
}

double second_moment_continuous(const Hurst& hurst) {
    const double two_h = 2.0 * hurst.value();
    return 1.0 / (two_h * (two_h + 1.0));
}

double second_moment_discrete(const SchemeSpec& scheme) {
    const int n = scheme.grid().n();
    const auto table = cached_covariance_table(scheme.hurst(), scheme.hybrid(), n);
    CompensatedSum sum;
    for (int k = 1; k < n; ++k) sum += table->scaled(k, k);
    return std::pow(scheme.grid().h(), 2.0 * scheme.hurst().value() + 1.0) * sum.value();
}

namespace {

// Tracks whether any nested quadrature ran out of budget.
struct NestedBudget {
    QuadOptions opts;
    bool exhausted = false;

    double run(const Integrand& f, double a, double b) {
        const QuadResult r = integrate_adaptive(f, a, b, opts);
        exhausted = exhausted || !r.converged;
        return r.value;
    }
};

// C(s, s + gap): integral over r in [0, s] of (s + gap - r)^{H-1/2} (s - r)^{H-1/2},
// with u = s - r = v^{1/(H+1/2)}. The gap is passed exactly rather than as a difference.
double rl_covariance(const Hurst& hurst, double s, double gap, NestedBudget& budget) {
    if (s <= 0.0) return 0.0;
    const double two_h = 2.0 * hurst.value();
    if (gap <= 0.0) return std::pow(s, two_h) / two_h;
    const double alpha = hurst.alpha();
    const double inv_beta = 1.0 / hurst.beta();
    auto f = [=](double v) { return std::pow(gap + std::pow(v, inv_beta), alpha) * inv_beta; };
    const double upper = std::pow(s, hurst.beta());
    const double knee = std::pow(gap, hurst.beta());
    if (knee < upper) return budget.run(f, 0.0, knee) + budget.run(f, knee, upper);
    return budget.run(f, 0.0, upper);
}

struct Tolerances {
    double outer;
    double middle;
    double inner;
};

Tolerances split_tolerance(const QuadConfig& cfg) {
    if (!(cfg.abs_tol > 0.0)) throw ConfigError("quadrature tolerance must be positive");
    // The factor 6 in front of the integral, and inner levels an order of magnitude
    // tighter than the level that integrates them.
    const double total = cfg.abs_tol / 6.0;
    return {0.5 * total, 0.1 * total, 0.01 * total};
}

MomentReport finish_continuous(double integral, double outer_error, const Tolerances& tol, const Hurst& hurst,
                               bool exhausted) {
    MomentReport report;
    report.order = 3;
    report.method = MomentMethod::Quadrature;
    report.value = 6.0 * integral;
    // Inner errors are integrated against kernels whose total mass is at most 1/(H+1/2).
    report.est_abs_error = 6.0 * (outer_error + tol.middle + tol.inner / hurst.beta());
    if (exhausted) {
        throw AccuracyError("third moment quadrature did not reach its tolerance within the subdivision budget",
                            report.value, report.est_abs_error);
    }
    return report;
}

// Integral over x in [0, t] of x^{H-1/2} F(x), where F(x) = F0 + c x^{2H} + ... near x = 0.
// With x = t e^{-y} the integrand t^{H+1/2} e^{-(H+1/2) y} F(t e^{-y}) is a sum of decaying
// exponentials; the range y > 40/(H+1/2) contributes below 1e-17 |F| and is dropped.
double singular_weighted(const std::function<double(double)>& F, const Hurst& hurst, double t,
                         NestedBudget& budget) {
    const double beta = hurst.beta();
    const double scale = std::pow(t, beta);
    auto g = [&](double y) { return scale * std::exp(-beta * y) * F(t * std::exp(-y)); };
    return budget.run(g, 0.0, 40.0 / beta);
}

// The middle integral vanishes like t^{3H+1/2} at t = 0; integrate over t in [0, 1] after
// t = w^{1/(3H+3/2)} so the adaptive rule sees a smooth integrand.
QuadResult integrate_outer(const std::function<double(double)>& middle_at, const Hurst& hurst,
                           const QuadOptions& opts) {
    const double p = 3.0 * hurst.value() + 1.5;
    auto g = [&](double w) {
        if (w <= 0.0) return 0.0;
        const double t = std::pow(w, 1.0 / p);
        return middle_at(t) * t / (p * w);
    };
    return integrate_adaptive(g, 0.0, 1.0, opts);
}

MomentReport compute_third_moment(const Hurst& hurst, const QuadConfig& cfg) {
    const Tolerances tol = split_tolerance(cfg);
    NestedBudget inner{{tol.inner, cfg.max_subdivisions}};
    NestedBudget middle{{tol.middle, cfg.max_subdivisions}};

    // Middle: integral over s in [0, t] of (t - s)^{H-1/2} C(s, t).
    auto middle_at = [&](double t) {
        if (t <= 0.0) return 0.0;
        auto cov_at_lag = [&](double x) { return rl_covariance(hurst, std::max(0.0, t - x), x, inner); };
        return singular_weighted(cov_at_lag, hurst, t, middle);
    };
    const QuadResult outer = integrate_outer(middle_at, hurst, {tol.outer, cfg.max_subdivisions});
    return finish_continuous(outer.value, outer.abs_error, tol, hurst,
                             !outer.converged || inner.exhausted || middle.exhausted);
}

MomentReport compute_third_moment_swapped(const Hurst& hurst, const QuadConfig& cfg) {
    const Tolerances tol = split_tolerance(cfg);
    const double alpha = hurst.alpha();
    bool exhausted = false;
    auto track = [&](const QuadResult& r) {
        exhausted = exhausted || !r.converged;
        return r.value;
    };
    const QuadOptions inner_opts{tol.inner, cfg.max_subdivisions};
    const QuadOptions middle_opts{tol.middle, cfg.max_subdivisions};

    // Innermost: integral over s in [r, r + x] of (r + x - s)^a (s - r)^a, singular at both ends.
    auto inner_at = [&](double x) {
        if (x <= 0.0) return 0.0;
        const double mid = 0.5 * x;
        auto left = [&](double u) { return std::pow(x - u, alpha); };
        auto right = [&](double u) { return std::pow(u, alpha); };
        return track(integrate_left_singular(left, alpha, 0.0, mid, inner_opts)) +
               track(integrate_right_singular(right, alpha, mid, x, inner_opts));
    };
    // Middle: integral over r in [0, t] of (t - r)^a times the inner integral.
    NestedBudget middle{middle_opts};
    auto middle_at = [&](double t) {
        if (t <= 0.0) return 0.0;
        auto g = [&](double x) { return inner_at(x); };
        return singular_weighted(g, hurst, t, middle);
    };
    const QuadResult outer = integrate_outer(middle_at, hurst, {tol.outer, cfg.max_subdivisions});
    return finish_continuous(outer.value, outer.abs_error, tol, hurst,
                             exhausted || middle.exhausted || !outer.converged);
}

using CacheKey = std::tuple<double, double, std::size_t, bool>;
std::mutex g_third_mutex;
std::map<CacheKey, MomentReport> g_third_cache;

MomentReport cached_third(const Hurst& hurst, const QuadConfig& cfg, bool swapped) {
    const CacheKey key{hurst.value(), cfg.abs_tol, cfg.max_subdivisions, swapped};
    {
        std::lock_guard lock(g_third_mutex);
        if (auto it = g_third_cache.find(key); it != g_third_cache.end()) return it->second;
    }
    MomentReport report = swapped ? compute_third_moment_swapped(hurst, cfg) : compute_third_moment(hurst, cfg);
    std::lock_guard lock(g_third_mutex);
    g_third_cache.emplace(key, report);
    return report;
}

}  // namespace

MomentReport third_moment_continuous(const Hurst& hurst, const QuadConfig& cfg) {
    return cached_third(hurst, cfg, false);
}

MomentReport third_moment_continuous_swapped(const Hurst& hurst, const QuadConfig& cfg) {
    return cached_third(hurst, cfg, true);
}

MomentReport third_moment_discrete(const SchemeSpec& scheme) {
    const int n = scheme.grid().n();
    const Hurst& hurst = scheme.hurst();
    MomentReport report;
    report.scheme = scheme;
    report.order = 3;
    report.method = MomentMethod::GridSum;
    if (n < 2) return report;

    const auto table = cached_covariance_table(hurst, scheme.hybrid(), n);
    const SchemeKernel kernel(hurst, scheme.hybrid(), n);
    // Lag d = k - j >= 1 pairs the covariance c(j, j + d) with the kernel mass mu(d - 1)
    // of the cell just behind t_k; k runs up to n - 1.
    std::vector<double> per_lag(static_cast<std::size_t>(n - 1));
    std::vector<double> per_lag_abs(static_cast<std::size_t>(n - 1));
    parallel_for(per_lag.size(), [&](std::size_t i) {
        const int d = static_cast<int>(i) + 1;
        const std::vector<double>& row = table->lag_row(d);
        CompensatedSum acc;
        for (int j = 1; j <= n - 1 - d; ++j) acc += row[static_cast<std::size_t>(j)];
        const double mu = kernel.cell_first_moment(d - 1);
        per_lag[i] = mu * acc.value();
        per_lag_abs[i] = std::abs(per_lag[i]);
    });
    const double scale = 6.0 * std::pow(scheme.grid().h(), 3.0 * hurst.value() + 1.5);
    report.value = scale * pairwise_sum(per_lag);
    report.est_abs_error = scale * pairwise_sum(per_lag_abs) * 64.0 * std::numeric_limits<double>::epsilon();
    return report;
}

WeakErrorValue weak_error_oracle_report(OraclePhi phi, const SchemeSpec& scheme, const QuadConfig& cfg) {
    const Hurst& hurst = scheme.hurst();
    if (phi == OraclePhi::Quadratic) {
        const double cont = second_moment_continuous(hurst);
        const double disc = second_moment_discrete(scheme);
        return {cont - disc, 16.0 * std::numeric_limits<double>::epsilon() * (cont + disc)};
    }
    const MomentReport cont = third_moment_continuous(hurst, cfg);
    const MomentReport disc = third_moment_discrete(scheme);
    return {(cont.value - disc.value) / 6.0, (cont.est_abs_error + disc.est_abs_error) / 6.0};
}

double weak_error_oracle(OraclePhi phi, const SchemeSpec& scheme, const QuadConfig& cfg) {
    return weak_error_oracle_report(phi, scheme, cfg).value;
}

namespace {

// cell(m) = integral over y in [0,1], x in [m, m+1] of ((x + y)^a - w(x))^2 on the unit grid,
// where w is the scheme kernel at lag x.
double strong_cell(const SchemeKernel& kernel, int m) {
    const Hurst& hurst = kernel.hurst();
    const double alpha = hurst.alpha();
    const double beta = hurst.beta();
    const double two_h = 2.0 * hurst.value();
    if (kernel.is_power_cell(m)) {
        if (m == 0) {
            // Expand the square; the cross term (x + y)^a x^a becomes smooth after x = v^{1/beta}.
            QuadOptions opts;
            opts.abs_tol = 1e-15;
            auto cross = [=](double v) { return std::pow(1.0 + std::pow(v, 1.0 / beta), beta) - v; };
            const double cross_int = integrate_adaptive(cross, 0.0, 1.0, opts).value / (beta * beta);
            return (std::pow(2.0, two_h + 1.0) - 2.0) / (two_h * (two_h + 1.0)) + 1.0 / two_h - 2.0 * cross_int;
        }
        const double mm = m;
        auto inner = [=](double y) {
            auto f = [=](double x) {
                const double d = std::pow(x, alpha) * std::expm1(alpha * std::log1p(y / x));
                return d * d;
            };
            return m < 4 ? gauss_legendre<30>(f, mm, mm + 1.0) : gauss_legendre<15>(f, mm, mm + 1.0);
        };
        return m < 4 ? gauss_legendre<30>(inner, 0.0, 1.0) : gauss_legendre<15>(inner, 0.0, 1.0);
    }
    const double w = kernel.weight(m);
    const double mm = m;
    auto inner = [=](double y) {
        auto f = [=](double x) {
            const double d = std::pow(x + y, alpha) - w;
            return d * d;
        };
        return m < 4 ? gauss_legendre<30>(f, mm, mm + 1.0) : gauss_legendre<15>(f, mm, mm + 1.0);
    };
    return m < 4 ? gauss_legendre<30>(inner, 0.0, 1.0) : gauss_legendre<15>(inner, 0.0, 1.0);
}

}  // namespace

double strong_error_l2(const SchemeSpec& scheme) {
    const int n = scheme.grid().n();
    const Hurst& hurst = scheme.hurst();
    const double two_h = 2.0 * hurst.value();
    const SchemeKernel kernel(hurst, scheme.hybrid(), n);
    std::vector<double> terms(static_cast<std::size_t>(std::max(0, n - 1)));
    parallel_for(terms.size(), [&](std::size_t i) {
        const int m = static_cast<int>(i);
        terms[i] = static_cast<double>(n - 1 - m) * strong_cell(kernel, m);
    });
    CompensatedSum sum;
    sum += n / (two_h * (two_h + 1.0));
    for (double t : terms) sum += t;
    const double mse = std::pow(scheme.grid().h(), two_h + 1.0) * sum.value();
    return std::sqrt(std::max(0.0, mse));
}

}  // namespace fracweak
