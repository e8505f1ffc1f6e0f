#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fracweak/errors.hpp"
#include "fracweak/grid_kernel.hpp"
#include "fracweak/quadrature.hpp"

using namespace fracweak;

TEST(Hurst, RejectsOutsideOpenInterval) {
    EXPECT_THROW(Hurst(0.0), DomainError);
    EXPECT_THROW(Hurst(0.5), DomainError);
    EXPECT_THROW(Hurst(-0.1), DomainError);
    EXPECT_THROW(Hurst(std::nan("")), DomainError);
    EXPECT_NO_THROW(Hurst(0.25));
    EXPECT_TRUE(Hurst(0.0005).near_boundary());
    EXPECT_TRUE(Hurst(0.4995).near_boundary());
    EXPECT_FALSE(Hurst(0.1).near_boundary());
}

TEST(Grid, PointsAndStep) {
    Grid g(8);
    EXPECT_DOUBLE_EQ(g.h(), 0.125);
    EXPECT_EQ(g.point(0), 0.0);
    EXPECT_EQ(g.point(8), 1.0);
    for (int k = 0; k < 8; ++k) EXPECT_LT(g.point(k), g.point(k + 1));
    EXPECT_THROW(Grid(0), ConfigError);
    EXPECT_THROW(g.point(9), DomainError);
}

TEST(Eta, Examples) {
    EXPECT_DOUBLE_EQ(eta(Grid(10), 0.37), 0.3);
    EXPECT_DOUBLE_EQ(eta(Grid(10), 0.5), 0.5);
    EXPECT_DOUBLE_EQ(eta(Grid(4), 1.0), 1.0);
    EXPECT_THROW(eta(Grid(4), 1.5), DomainError);
    EXPECT_THROW(eta(Grid(4), -0.1), DomainError);
}

TEST(Eta, GridPointsAreFixed) {
    for (int n : {3, 7, 10, 49, 1000}) {
        Grid g(n);
        for (int k = 0; k <= n; ++k) EXPECT_EQ(eta(g, g.point(k)), static_cast<double>(k) / n) << n << " " << k;
    }
}

TEST(KernelEval, Examples) {
    EXPECT_NEAR(kernel_eval(Hurst(0.25), 1.0, 0.75), std::sqrt(2.0), 1e-12);
    EXPECT_EQ(kernel_eval(Hurst(0.1), 0.5, 0.5), 0.0);
    EXPECT_EQ(kernel_eval(Hurst(0.3), 0.2, 0.7), 0.0);
}

TEST(KernelIntegral, Examples) {
    EXPECT_EQ(kernel_integral(Hurst(0.3), 0.0, 0.0), 0.0);
    EXPECT_NEAR(kernel_integral(Hurst(0.25), 0.0, 1.0), 1.0 / 0.75, 1e-14);
    const double expected = (1.0 - std::pow(0.5, 0.6)) / 0.6;
    EXPECT_NEAR(kernel_integral(Hurst(0.1), 0.5, 1.0), expected, 1e-14);
    QuadOptions opts;
    auto f = [](double r) { return std::pow(r, -0.4); };
    EXPECT_NEAR(integrate_adaptive(f, 0.5, 1.0, opts).value, expected, 1e-12);
    EXPECT_THROW(kernel_integral(Hurst(0.1), -0.1, 1.0), DomainError);
    EXPECT_THROW(kernel_integral(Hurst(0.1), 0.5, 0.2), DomainError);
}

TEST(KernelSqIntegral, Examples) {
    EXPECT_NEAR(kernel_sq_integral(Hurst(0.1), 0.0, 1.0), 5.0, 1e-14);
    EXPECT_EQ(kernel_sq_integral(Hurst(0.1), 0.3, 0.3), 0.0);
    const double h = 0.01;
    const double expected = (std::sqrt(2.0) - 1.0) * std::sqrt(h) / 0.5;
    EXPECT_NEAR(kernel_sq_integral(Hurst(0.25), h, 2 * h), expected, 1e-14);
    EXPECT_NEAR(expected, 0.0828427, 1e-7);
    auto f = [](double r) { return 1.0 / std::sqrt(r); };
    EXPECT_NEAR(integrate_adaptive(f, h, 2 * h).value, expected, 1e-12);
}

TEST(KernelIntegrals, ClosedFormsMatchSingularQuadrature) {
    std::mt19937_64 gen(12345);
    std::uniform_real_distribution<double> uh(0.01, 0.49);
    std::uniform_real_distribution<double> ux(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        Hurst H(uh(gen));
        double a = ux(gen), b = ux(gen);
        if (a > b) std::swap(a, b);
        if (trial % 4 == 0) a = 0.0;
        // Substitute r = v^{1/p} with p = H+1/2 for the kernel and p = 2H for its square;
        // the substituted integrands are smooth, so plain adaptive quadrature applies.
        auto substituted = [&](double exponent, double p) {
            auto f = [=](double v) {
                const double r = std::pow(v, 1.0 / p);
                return std::pow(r, exponent) * std::pow(v, 1.0 / p - 1.0) / p;
            };
            if (b == a) return 0.0;
            return integrate_adaptive(f, std::pow(a, p), std::pow(b, p)).value;
        };
        const double first = substituted(H.alpha(), H.beta());
        const double second = substituted(2.0 * H.value() - 1.0, 2.0 * H.value());
        const double cf1 = kernel_integral(H, a, b);
        const double cf2 = kernel_sq_integral(H, a, b);
        EXPECT_NEAR(first, cf1, 1e-10 * std::max(cf1, 1e-300) + 1e-14) << H.value() << " " << a << " " << b;
        EXPECT_NEAR(second, cf2, 1e-10 * std::max(cf2, 1e-300) + 1e-14) << H.value() << " " << a << " " << b;

        // Independent check with a non-trivial smooth factor.
        auto g = [&](double r) { return std::pow(r, H.alpha()); };
        if (a > 0.05) {
            EXPECT_NEAR(integrate_adaptive(g, a, b).value, cf1, 1e-10 * cf1 + 1e-14);
        }
    }
}

TEST(HybridWeights, Examples) {
    Hurst H(0.25);
    Grid g(100);
    auto mm = hybrid_weights(H, g, {1, WeightRule::MomentMatch});
    EXPECT_NEAR(mm.weight(1), 2.87825, 1e-5);
    const double oracle = std::sqrt(integrate_adaptive([](double r) { return 1.0 / std::sqrt(r); }, 0.01, 0.02).value / 0.01);
    EXPECT_NEAR(mm.weight(1), oracle, 1e-12);
    auto left = hybrid_weights(H, g, {1, WeightRule::LeftPoint});
    EXPECT_NEAR(left.weight(1), std::pow(0.02, -0.25), 1e-12);
    EXPECT_NEAR(left.weight(1), 2.65915, 1e-5);
    auto mse = hybrid_weights(H, g, {1, WeightRule::MseOptimal});
    for (int ell = 1; ell < 100; ++ell) EXPECT_GE(mm.weight(ell), mse.weight(ell));
    EXPECT_THROW(hybrid_weights(H, Grid(4), {5, WeightRule::MomentMatch}), ConfigError);
    EXPECT_THROW(hybrid_weights(H, Grid(4), {0, WeightRule::MomentMatch}), ConfigError);
    EXPECT_THROW(mm.weight(0), DomainError);
    EXPECT_THROW(mm.weight(100), DomainError);
}

TEST(HybridWeights, PositiveAndStrictlyDecreasing) {
    for (double hv : {0.02, 0.1, 0.25, 0.45}) {
        for (auto rule : {WeightRule::LeftPoint, WeightRule::MidPoint, WeightRule::MseOptimal, WeightRule::MomentMatch}) {
            auto table = hybrid_weights(Hurst(hv), Grid(256), {2, rule});
            ASSERT_EQ(table.weights.size(), 254u);
            for (std::size_t i = 0; i < table.weights.size(); ++i) {
                EXPECT_GT(table.weights[i], 0.0);
                if (i > 0) EXPECT_LT(table.weights[i], table.weights[i - 1]);
            }
        }
    }
}

TEST(HybridWeights, MomentMatchCellIdentity) {
    for (double hv : {0.05, 0.2, 0.4}) {
        Hurst H(hv);
        Grid g(64);
        auto table = hybrid_weights(H, g, {3, WeightRule::MomentMatch});
        for (int ell = 3; ell < 64; ++ell) {
            const double lhs = g.h() * table.weight(ell) * table.weight(ell);
            const double rhs = kernel_sq_integral(H, ell * g.h(), (ell + 1) * g.h());
            EXPECT_NEAR(lhs, rhs, 1e-14 * rhs);
        }
    }
}

TEST(HybridWeights, MomentMatchReproducesVarianceAtGridPoints) {
    for (double hv : {0.02, 0.1, 0.3}) {
        for (int kappa : {1, 2, 4}) {
            Hurst H(hv);
            Grid g(128);
            auto table = hybrid_weights(H, g, {kappa, WeightRule::MomentMatch});
            for (int k = kappa; k <= 128; ++k) {
                double sum = kernel_sq_integral(H, 0.0, kappa * g.h());
                for (int ell = kappa; ell < k; ++ell) sum += g.h() * table.weight(ell) * table.weight(ell);
                const double exact = std::pow(g.point(k), 2 * hv) / (2 * hv);
                EXPECT_NEAR(sum, exact, 1e-12 * exact);
            }
        }
    }
}

TEST(HybridWeights, RuleNamesRoundTrip) {
    for (auto rule : {WeightRule::LeftPoint, WeightRule::MidPoint, WeightRule::MseOptimal, WeightRule::MomentMatch}) {
        EXPECT_EQ(parse_weight_rule(to_string(rule)), rule);
    }
    EXPECT_EQ(parse_weight_rule("MomentMatch"), WeightRule::MomentMatch);
    EXPECT_THROW(parse_weight_rule("trapezoid"), ConfigError);
}

TEST(DeltaKernel, FirstMomentExamples) {
    Hurst H(0.1);
    Grid g(10);
    EXPECT_EQ(delta_kernel_first_moment(H, g, 0.3), 0.0);
    const double expected = (std::pow(0.1, 0.6) - std::pow(0.15, 0.6)) / 0.6;
    EXPECT_NEAR(delta_kernel_first_moment(H, g, 0.15), expected, 1e-14);
    // Quadrature of K(eta(t), s) - K(t, s) over [0, t].
    auto first = integrate_left_singular([](double) { return 1.0; }, H.alpha(), 0.0, 0.1).value;
    auto second = integrate_left_singular([](double) { return 1.0; }, H.alpha(), 0.0, 0.15).value;
    EXPECT_NEAR(first - second, expected, 1e-11);
    for (double t = 0.0; t <= 1.0; t += 0.013) EXPECT_LE(delta_kernel_first_moment(H, g, t), 0.0);
}

TEST(DeltaKernel, SquaredFirstMomentUsesEtaToThe2H) {
    Hurst H(0.2);
    Grid g(10);
    const double t = 0.37;
    EXPECT_NEAR(delta_kernel_sq_first_moment(H, g, t), (std::pow(0.3, 0.4) - std::pow(t, 0.4)) / 0.4, 1e-14);
    EXPECT_EQ(delta_kernel_sq_first_moment(H, g, 0.5), 0.0);
}

namespace {

// Self-similarity: n^{2H} times the integral over [0, 1] of E[(W_t - W_eta(t))^2] equals the
// average over k < n of G(k), the same integral over t in [k, k+1] on the unit grid.
// G(k) = integral over u in [0, 1] of u^{2H}/(2H) + integral over x in [0, k] of (x^a - (x+u)^a)^2.
std::vector<double> unit_cell_sq_delta(const Hurst& H, int count) {
    const double a = H.alpha();
    const double two_h = 2 * H.value();
    // Inner tolerance well below the outer one, or inner noise stalls the outer bisection.
    QuadOptions inner_opts, outer_opts;
    inner_opts.abs_tol = 1e-12;
    outer_opts.abs_tol = 1e-8;
    std::vector<double> out;
    for (int k = 0; k < count; ++k) {
        auto per_u = [&](double u) {
            double inner = std::pow(u, two_h) / two_h;
            if (k > 0) {
                // x = v^{1/(2H)} absorbs the x^{2H-1} singularity.
                auto diff = [&](double v) {
                    const double x = std::pow(v, 1.0 / two_h);
                    const double d = 1.0 - std::pow(1.0 + u / x, a);
                    return d * d / two_h;
                };
                inner += integrate_adaptive(diff, 0.0, std::pow(double(k), two_h), inner_opts).value;
            }
            return inner;
        };
        // u = w^{1/(2H)} for the u^{2H} behaviour at the left end.
        auto outer = [&](double w) {
            const double u = std::pow(w, 1.0 / two_h);
            return w == 0.0 ? 0.0 : per_u(u) * u / (two_h * w);
        };
        out.push_back(integrate_adaptive(outer, 0.0, 1.0, outer_opts).value);
    }
    return out;
}

}  // namespace

TEST(DeltaKernel, ScalingBoundsAlongLadder) {
    for (double hv : {0.05, 0.1, 0.25, 0.4}) {
        Hurst H(hv);
        const auto cells = unit_cell_sq_delta(H, 64);
        double base_l2 = 0.0, base_sup1 = 0.0, base_sup2 = 0.0;
        for (int n = 16; n <= 1024; n *= 2) {
            Grid g(n);
            double sup1 = 0.0, sup2 = 0.0;
            for (int i = 0; i <= 4000; ++i) {
                const double t = i / 4000.0;
                sup1 = std::max(sup1, std::abs(delta_kernel_first_moment(H, g, t)));
                sup2 = std::max(sup2, std::abs(delta_kernel_sq_first_moment(H, g, t)));
            }
            sup1 *= std::pow(n, H.beta());
            sup2 *= std::pow(n, 2 * hv);
            if (n == 16) {
                base_sup1 = sup1;
                base_sup2 = sup2;
            }
            EXPECT_LE(sup1, 2 * base_sup1) << hv << " " << n;
            EXPECT_LE(sup2, 2 * base_sup2) << hv << " " << n;
            if (n <= 64) {
                double l2 = 0.0;
                for (int k = 0; k < n; ++k) l2 += cells[static_cast<std::size_t>(k)];
                l2 /= n;
                if (n == 16) base_l2 = l2;
                EXPECT_LE(l2, 2 * base_l2) << hv << " " << n;
                EXPECT_GT(l2, 0.0);
            }
        }
    }
}

TEST(HybridFirstMomentGap, Examples) {
    Hurst H(0.1);
    Grid g(32);
    EXPECT_EQ(hybrid_first_moment_gap(H, g, {32, WeightRule::MomentMatch}, 1.0), 0.0);
    for (int k = 2; k <= 32; ++k) EXPECT_GT(hybrid_first_moment_gap(H, g, {1, WeightRule::MomentMatch}, g.point(k)), 0.0);
    EXPECT_THROW(hybrid_first_moment_gap(H, g, {1, WeightRule::MomentMatch}, 0.3), DomainError);
}

TEST(HybridFirstMomentGap, MatchesCellwiseQuadrature) {
    Hurst H(0.15);
    Grid g(16);
    const HybridSpec spec{2, WeightRule::MomentMatch};
    auto table = hybrid_weights(H, g, spec);
    const double t = 1.0;
    double gap = 0.0;
    for (int ell = 2; ell < 16; ++ell) {
        auto k = [&](double r) { return std::pow(r, H.alpha()); };
        gap += g.h() * table.weight(ell) - integrate_adaptive(k, ell * g.h(), (ell + 1) * g.h()).value;
    }
    EXPECT_NEAR(hybrid_first_moment_gap(H, g, spec, t), gap, 1e-12);
}
