#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "fracweak/covariance.hpp"
#include "fracweak/errors.hpp"
#include "fracweak/quadrature.hpp"

using namespace fracweak;

namespace {

const WeightRule kRules[] = {WeightRule::LeftPoint, WeightRule::MidPoint, WeightRule::MseOptimal,
                             WeightRule::MomentMatch};

// Midpoint rule on [lo, hi] after u = v^{1/p}, which flattens a u^{p-1} endpoint singularity at lo.
template <class F>
double substituted_midpoint(F&& f, double lo, double hi, double p, int nodes) {
    const double vmax = std::pow(hi - lo, p);
    const double dv = vmax / nodes;
    double sum = 0.0;
    for (int i = 0; i < nodes; ++i) {
        const double v = (i + 0.5) * dv;
        const double u = std::pow(v, 1.0 / p);
        sum += f(lo + u) * std::pow(v, 1.0 / p - 1.0) / p;
    }
    return sum * dv;
}

}  // namespace

TEST(CovFbm, Examples) {
    EXPECT_NEAR(cov_fbm(Hurst(0.1), 1.0, 1.0), 5.0, 1e-13);
    EXPECT_EQ(cov_fbm(Hurst(0.3), 0.7, 0.0), 0.0);
    EXPECT_EQ(cov_fbm(Hurst(0.3), 0.0, 0.7), 0.0);
    EXPECT_THROW(cov_fbm(Hurst(0.3), 1.2, 0.5), DomainError);
    EXPECT_THROW(cov_fbm(Hurst(0.3), 0.2, -0.5), DomainError);
}

TEST(CovFbm, MatchesBruteForceRiemannSum) {
    Hurst H(0.25);
    // u = 0.5 - r; integrand (0.5 + u)^{-1/4} u^{-1/4}, singular at u = 0.
    auto g = [](double u) { return std::pow(0.5 + u, -0.25) * std::pow(u, -0.25); };
    const double brute = substituted_midpoint(g, 0.0, 0.5, H.beta(), 1'000'000);
    EXPECT_NEAR(cov_fbm(H, 1.0, 0.5), brute, 1e-8);
    EXPECT_EQ(cov_fbm(H, 1.0, 0.5), cov_fbm(H, 0.5, 1.0));
}

TEST(CovFbm, SymmetricAndBoundedByCauchySchwarz) {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        Hurst H(0.01 + 0.48 * u(gen));
        const double s = u(gen), t = u(gen);
        const double c = cov_fbm(H, s, t);
        EXPECT_EQ(c, cov_fbm(H, t, s));
        EXPECT_GT(c, 0.0);
        EXPECT_LE(c, std::sqrt(cov_fbm(H, s, s) * cov_fbm(H, t, t)) * (1 + 1e-12));
    }
}

TEST(CovFbm, IncrementAndDerivativeBounds) {
    // |C(t,t) - C(s,t)| <= c (t-s)^{2H} and |d/dt C(s,t)| <= c (t-s)^{2H-1}. The sup of each
    // ratio over a mesh of gaps 2^-2..2^-depth must settle: increments between refinement
    // levels shrink, and the extrapolated limit stays within 2x of the coarse fit.
    for (double hv : {0.05, 0.2, 0.4}) {
        Hurst H(hv);
        auto fit = [&](int depth) {
            double c_inc = 0.0, c_der = 0.0;
            for (double t : {0.25, 0.5, 0.75, 1.0}) {
                for (int j = 2; j <= depth; ++j) {
                    const double gap = std::ldexp(1.0, -j);
                    const double s = t - gap;
                    c_inc = std::max(c_inc, std::abs(cov_fbm(H, t, t) - cov_fbm(H, s, t)) / std::pow(gap, 2 * hv));
                    const double step = gap * 1e-2;
                    const double up = std::min(1.0, t + step);
                    const double der = (cov_fbm(H, s, up) - cov_fbm(H, s, t - step)) / (up - (t - step));
                    c_der = std::max(c_der, std::abs(der) / std::pow(gap, 2 * hv - 1));
                }
            }
            return std::array<double, 2>{c_inc, c_der};
        };
        const auto c8 = fit(8), c10 = fit(10), c12 = fit(12), c14 = fit(14);
        for (int i = 0; i < 2; ++i) {
            const double d1 = c10[i] - c8[i], d2 = c12[i] - c10[i], d3 = c14[i] - c12[i];
            EXPECT_GT(c8[i], 0.0);
            EXPECT_LE(std::abs(d3), std::abs(d2) + 1e-9 * c8[i]) << hv << " " << i;
            EXPECT_LE(std::abs(d2), std::abs(d1) + 1e-9 * c8[i]) << hv << " " << i;
            const double q = std::abs(d2) > 0 ? std::abs(d3) / std::abs(d2) : 0.0;
            const double limit = c14[i] + std::abs(d3) * q / (1.0 - q);
            EXPECT_LE(limit, 2.0 * c8[i]) << hv << " " << i;
        }
    }
}

TEST(CovFbmBm, Examples) {
    EXPECT_NEAR(cov_fbm_bm(Hurst(0.25), 1.0, 0.0, 1.0), 1.0 / 0.75, 1e-14);
    EXPECT_EQ(cov_fbm_bm(Hurst(0.25), 0.3, 0.3, 0.6), 0.0);
    EXPECT_EQ(cov_fbm_bm(Hurst(0.25), 0.2, 0.3, 0.6), 0.0);
    const double expected = std::pow(0.25, 0.6) / 0.6;
    EXPECT_NEAR(cov_fbm_bm(Hurst(0.1), 0.5, 0.25, 0.75), expected, 1e-14);
    auto k = [](double r) { return std::pow(0.5 - r, -0.4); };
    EXPECT_NEAR(substituted_midpoint([&](double u) { return k(0.5 - u); }, 0.0, 0.25, 0.6, 100000), expected, 1e-9);
    EXPECT_THROW(cov_fbm_bm(Hurst(0.1), 0.5, 0.6, 0.2), DomainError);
}

TEST(PowerCell, MatchesAdaptiveQuadrature) {
    for (double hv : {0.02, 0.1, 0.25, 0.45}) {
        Hurst H(hv);
        for (int m : {0, 1, 2, 3, 4, 7, 20, 31, 32, 100, 1000, 4000}) {
            for (int d : {0, 1, 2, 5, 64, 3000}) {
                const double a = H.alpha();
                auto f = [&](double u) { return std::pow(d + u, a) * std::pow(u, a); };
                QuadOptions opts;
                opts.abs_tol = 1e-15;
                if (m == 0 && d == 0) {
                    EXPECT_NEAR(power_cell_product(H, 0, 0), 0.5 / hv, 1e-14 / hv);
                    continue;
                }
                const double ref = m == 0 ? integrate_left_singular([&](double u) { return std::pow(d + u, a); }, a, 0.0, 1.0, opts).value
                                          : integrate_adaptive(f, m, m + 1.0, opts).value;
                EXPECT_NEAR(power_cell_product(H, m, d), ref, 4e-15 * std::abs(ref) + 1e-17)
                    << "H=" << hv << " m=" << m << " d=" << d;
            }
        }
    }
}

TEST(CovHybrid, Examples) {
    Hurst H(0.1);
    Grid g(16);
    const HybridSpec mm{1, WeightRule::MomentMatch};
    for (int k = 1; k <= 16; ++k) {
        const double exact = std::pow(g.point(k), 0.2) / 0.2;
        EXPECT_NEAR(cov_hybrid(H, g, mm, k, k), exact, 1e-12 * exact);
    }
    EXPECT_EQ(cov_hybrid(H, g, mm, 0, 5), 0.0);
    EXPECT_EQ(cov_hybrid(H, g, mm, 5, 0), 0.0);
    EXPECT_THROW(cov_hybrid(H, g, mm, 17, 2), DomainError);
    EXPECT_THROW(cov_hybrid(H, Grid(4), {5, WeightRule::MomentMatch}, 1, 2), ConfigError);
}

TEST(CovHybrid, MatchesBruteForceCellwiseSum) {
    // Piecewise kernel product integrated cell by cell with 10^5 midpoint nodes per cell.
    for (int kappa : {1, 2, 3}) {
        Hurst H(0.1);
        Grid g(16);
        const HybridSpec spec{kappa, WeightRule::MomentMatch};
        const auto table = hybrid_weights(H, g, spec);
        const double h = g.h();
        auto kern = [&](double x) {
            const int ell = static_cast<int>(std::floor(x / h + 1e-12));
            return ell < kappa ? std::pow(x, H.alpha()) : table.weight(ell);
        };
        const int j = 4, k = 8;
        double brute = 0.0;
        for (int m = 0; m < j; ++m) {
            // inner lag in [m h, (m+1) h); the r-cell is [t_j - (m+1)h, t_j - m h].
            auto f = [&](double u) { return kern((k - j) * h + u) * kern(u); };
            const double lo = m * h, hi = (m + 1) * h;
            if (m < kappa) {
                brute += substituted_midpoint(f, lo, hi, H.beta(), 100000);
            } else {
                double s = 0.0;
                for (int i = 0; i < 100000; ++i) s += f(lo + (i + 0.5) * (hi - lo) / 100000);
                brute += s * (hi - lo) / 100000;
            }
        }
        EXPECT_NEAR(cov_hybrid(H, g, spec, j, k), brute, 1e-8) << kappa;
        EXPECT_EQ(cov_hybrid(H, g, spec, j, k), cov_hybrid(H, g, spec, k, j));
    }
}

TEST(CovHybridBm, Examples) {
    Hurst H(0.1);
    Grid g(16);
    const HybridSpec mm{1, WeightRule::MomentMatch};
    EXPECT_EQ(cov_hybrid_bm(H, g, mm, 4, 4), 0.0);
    EXPECT_EQ(cov_hybrid_bm(H, g, mm, 4, 9), 0.0);
    EXPECT_NEAR(cov_hybrid_bm(H, g, mm, 8, 7), kernel_integral(H, 0.0, g.h()), 1e-15);
    const auto table = hybrid_weights(H, g, mm);
    EXPECT_NEAR(cov_hybrid_bm(H, g, mm, 8, 2), g.h() * table.weight(5), 1e-14);
    const HybridSpec wide{3, WeightRule::LeftPoint};
    EXPECT_NEAR(cov_hybrid_bm(H, g, wide, 8, 5), kernel_integral(H, 2 * g.h(), 3 * g.h()), 1e-15);
    EXPECT_THROW(cov_hybrid_bm(H, g, mm, 8, 16), DomainError);
}

TEST(Assemble, SingleStepExact) {
    Hurst H(0.3);
    auto b = assemble(SchemeSpec::exact(H, Grid(1)));
    ASSERT_EQ(b.full.rows(), 2);
    EXPECT_NEAR(b.full(0, 0), 1.0 / 0.6, 1e-14);
    EXPECT_EQ(b.full(1, 1), 1.0);
    EXPECT_NEAR(b.full(0, 1), 1.0 / 0.8, 1e-14);
    EXPECT_EQ(b.jitter_used, 0.0);
}

TEST(Assemble, ExactDiagonalAndEntries) {
    Hurst H(0.25);
    Grid g(64);
    auto b = assemble(SchemeSpec::exact(H, g));
    for (int k = 1; k <= 64; ++k) {
        const double expected = std::sqrt(g.point(k)) * 2.0;
        EXPECT_NEAR(b.full(k - 1, k - 1), expected, 1e-12 * expected);
    }
    std::mt19937 gen(3);
    std::uniform_int_distribution<int> idx(1, 64);
    for (int trial = 0; trial < 40; ++trial) {
        const int j = idx(gen), k = idx(gen);
        EXPECT_NEAR(b.full(j - 1, k - 1), cov_fbm(H, g.point(j), g.point(k)), 1e-12);
        const int inc = idx(gen) - 1;
        EXPECT_NEAR(b.full(k - 1, 64 + inc), cov_fbm_bm(H, g.point(k), g.point(inc), g.point(inc + 1)), 1e-14);
    }
}

TEST(Assemble, SymmetricPsdAllSchemes) {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> uh(0.02, 0.48);
    std::uniform_int_distribution<int> un(2, 128);
    for (int trial = 0; trial < 12; ++trial) {
        Hurst H(uh(gen));
        Grid g(un(gen));
        std::vector<SchemeSpec> schemes{SchemeSpec::exact(H, g)};
        for (auto rule : kRules) schemes.push_back(SchemeSpec::hybrid(H, g, {1 + trial % 3 % g.n(), rule}));
        for (const auto& s : schemes) {
            auto b = assemble(s);
            const int n = g.n();
            EXPECT_EQ((b.full - b.full.transpose()).cwiseAbs().maxCoeff(), 0.0);
            EXPECT_EQ(b.jitter_used, 0.0);
            const double resid = (b.lower * b.lower.transpose() - b.full).cwiseAbs().maxCoeff();
            EXPECT_LT(resid, 1e-12 * b.full.cwiseAbs().maxCoeff());
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) EXPECT_EQ(b.increment_block()(i, j), i == j ? g.h() : 0.0);
            }
        }
    }
}

TEST(Assemble, MomentMatchDiagonalEqualsExact) {
    for (double hv : {0.02, 0.1, 0.35}) {
        for (int kappa : {1, 2, 4}) {
            Hurst H(hv);
            Grid g(256);
            auto exact = assemble(SchemeSpec::exact(H, g));
            auto mm = assemble(SchemeSpec::hybrid(H, g, {kappa, WeightRule::MomentMatch}));
            for (int k = 0; k < 256; ++k) {
                EXPECT_NEAR(mm.full(k, k), exact.full(k, k), 1e-12 * exact.full(k, k));
            }
        }
    }
}

TEST(Assemble, HybridEntriesMatchPointOperations) {
    Hurst H(0.15);
    Grid g(24);
    const HybridSpec spec{2, WeightRule::MseOptimal};
    auto b = assemble(SchemeSpec::hybrid(H, g, spec));
    for (int j = 1; j <= 24; j += 5) {
        for (int k = 1; k <= 24; k += 3) {
            EXPECT_NEAR(b.full(j - 1, k - 1), cov_hybrid(H, g, spec, j, k), 1e-14);
        }
        for (int i = 0; i < 24; ++i) EXPECT_NEAR(b.full(j - 1, 24 + i), cov_hybrid_bm(H, g, spec, j, i), 1e-15);
    }
}

TEST(CovarianceTable, SelfSimilarPrefixServesSmallerGrids) {
    Hurst H(0.2);
    SchemeKernel kernel(H, std::nullopt, 200);
    CovarianceTable big(kernel, 200);
    CovarianceTable small(kernel, 50);
    for (int j = 0; j <= 50; ++j) {
        for (int k = 0; k <= 50; ++k) EXPECT_EQ(small.scaled(j, k), big.scaled(j, k));
    }
    EXPECT_THROW(small.scaled(51, 3), DomainError);
    auto cached_a = cached_covariance_table(H, std::nullopt, 100);
    auto cached_b = cached_covariance_table(H, std::nullopt, 40);
    EXPECT_EQ(cached_a.get(), cached_b.get());
}

TEST(Assemble, JitterLadderRecoversNearlySingularInput) {
    // A far-out lag with kappa = n leaves only power cells; the bundle is still PD.
    auto b = assemble(SchemeSpec::hybrid(Hurst(0.45), Grid(8), {8, WeightRule::LeftPoint}));
    EXPECT_EQ(b.jitter_used, 0.0);
}

TEST(Sample, DeterministicAndScheduleIndependent) {
    auto bundle = assemble(SchemeSpec::exact(Hurst(0.2), Grid(16)));
    auto a = sample(bundle, 42, 3, 100);
    auto b = sample(bundle, 42, 3, 100);
    EXPECT_EQ(a.values, b.values);
    auto c = sample(bundle, 42, 4, 100);
    EXPECT_NE(a.values, c.values);
    // Row keying: a shorter batch is a prefix of a longer one.
    auto d = sample(bundle, 42, 3, 30);
    EXPECT_EQ(d.values, a.values.leftCols(30));
    EXPECT_EQ(a.x(5, 0), 0.0);
    EXPECT_EQ(a.dw(5, 2), a.values(16 + 2, 5));
}

TEST(Sample, AntitheticMirrorsFirstHalf) {
    auto bundle = assemble(SchemeSpec::exact(Hurst(0.2), Grid(8)));
    auto s = sample(bundle, 1, 0, 10, true);
    EXPECT_EQ(s.values.rightCols(5), -s.values.leftCols(5));
}

TEST(Sample, EmpiricalCovarianceMatchesBundle) {
    const int n = 4;
    auto bundle = assemble(SchemeSpec::hybrid(Hurst(0.2), Grid(n), {1, WeightRule::MomentMatch}));
    const int paths = 1'000'000;
    const int batch = 50'000;
    const int dim = 2 * n;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (int s = 0; s < paths / batch; ++s) {
        auto p = sample(bundle, 2024, static_cast<std::uint64_t>(s), batch);
        sum += p.values * p.values.transpose();
        mean += p.values.rowwise().sum();
    }
    sum /= paths;
    mean /= paths;
    const auto& c = bundle.full;
    for (int i = 0; i < dim; ++i) {
        EXPECT_NEAR(mean(i), 0.0, 4.0 * std::sqrt(c(i, i) / paths));
        for (int j = 0; j < dim; ++j) {
            const double se = std::sqrt((c(i, i) * c(j, j) + c(i, j) * c(i, j)) / paths);
            EXPECT_NEAR(sum(i, j), c(i, j), 4.0 * se) << i << "," << j;
        }
    }
    EXPECT_NEAR(sum(n, n), 1.0 / n, 4.0 * std::sqrt(2.0 / paths) / n);
}

TEST(Dump, RoundTrip) {
    auto bundle = assemble(SchemeSpec::hybrid(Hurst(0.3), Grid(5), {2, WeightRule::MidPoint}));
    std::stringstream buf;
    write_bundle(buf, bundle);
    EXPECT_EQ(buf.str().size(), 26u + 2u * 100u * 8u + 8u);
    EXPECT_EQ(buf.str().substr(0, 4), "FWCV");
    auto dump = read_bundle(buf);
    EXPECT_EQ(dump.version, 1u);
    EXPECT_EQ(dump.n, 5u);
    EXPECT_EQ(dump.scheme_tag, 1);
    EXPECT_EQ(dump.hurst, 0.3);
    EXPECT_EQ(dump.kappa, 2u);
    EXPECT_EQ(dump.rule, static_cast<std::uint8_t>(WeightRule::MidPoint));
    EXPECT_EQ(dump.full, bundle.full);
    EXPECT_EQ(dump.lower, bundle.lower);
    std::stringstream bad("XXXX");
    EXPECT_THROW(read_bundle(bad), ConfigError);
}
