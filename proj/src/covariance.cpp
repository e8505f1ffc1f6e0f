#include "fracweak/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>

#include "fracweak/errors.hpp"
#include "fracweak/parallel.hpp"
#include "fracweak/quadrature.hpp"
#include "fracweak/rng.hpp"
#include "fracweak/summation.hpp"

namespace fracweak {

// ---------------------------------------------------------------------------
// SchemeSpec

SchemeSpec::SchemeSpec(Hurst hurst, Grid grid, std::optional<HybridSpec> hybrid)
    : hurst_(hurst), grid_(grid), hybrid_(hybrid) {
    if (hybrid_) {
        if (hybrid_->kappa < 1) throw ConfigError("hybrid scheme needs kappa >= 1");
        if (hybrid_->kappa > grid_.n()) {
            throw ConfigError("hybrid scheme needs kappa <= n (kappa = " + std::to_string(hybrid_->kappa) +
                              ", n = " + std::to_string(grid_.n()) + ")");
        }
    }
}

SchemeSpec SchemeSpec::exact(Hurst hurst, Grid grid) { return SchemeSpec(hurst, grid, std::nullopt); }

SchemeSpec SchemeSpec::hybrid(Hurst hurst, Grid grid, HybridSpec spec) { return SchemeSpec(hurst, grid, spec); }

SchemeSpec SchemeSpec::on_grid(Grid grid) const { return SchemeSpec(hurst_, grid, hybrid_); }

std::string SchemeSpec::family() const { return hybrid_ ? "hybrid" : "exact"; }

std::string SchemeSpec::rule_name() const { return hybrid_ ? std::string(to_string(hybrid_->rule)) : "-"; }

// ---------------------------------------------------------------------------
// Kernel cells

namespace {

// 4-point Gauss-Legendre on [-1, 1]; enough for cells far from the singularity.
constexpr double kGl4Nodes[2] = {0.3399810435848562648026658, 0.8611363115940525752239465};
constexpr double kGl4Weights[2] = {0.6521451548625461426269361, 0.3478548451374538573730639};

template <class F>
double gauss_legendre_4(F&& f, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (int i = 0; i < 2; ++i) {
        sum += kGl4Weights[i] * (f(mid + half * kGl4Nodes[i]) + f(mid - half * kGl4Nodes[i]));
    }
    return half * sum;
}

}  // namespace

double power_cell_product(const Hurst& hurst, int m, int d) {
    if (m < 0 || d < 0) throw DomainError("power_cell_product: negative index");
    const double alpha = hurst.alpha();
    if (d == 0) return kernel_sq_integral(hurst, m, m + 1.0);
    const double dd = d;
    if (m == 0) {
        // Relative tolerance near machine precision; the budget cap keeps an unattainable
        // tolerance from bisecting forever.
        QuadOptions opts;
        opts.abs_tol = 4.0 * std::numeric_limits<double>::epsilon() * std::pow(dd, alpha) / hurst.beta();
        opts.max_subdivisions = 256;
        auto outer = [&](double u) { return std::pow(dd + u, alpha); };
        return integrate_left_singular(outer, alpha, 0.0, 1.0, opts).value;
    }
    // Smooth on [m, m+1]; the nearest singularity sits at distance m, so the
    // Gauss-Legendre order needed for ~1e-16 relative accuracy drops with m.
    const double mm = m;
    auto f = [=](double u) { return std::exp(alpha * (std::log(dd + u) + std::log(u))); };
    if (m < 4) return gauss_legendre<15>(f, mm, mm + 1.0);
    if (m < 32) return gauss_legendre<7>(f, mm, mm + 1.0);
    return gauss_legendre_4(f, mm, mm + 1.0);
}

SchemeKernel::SchemeKernel(Hurst hurst, std::optional<HybridSpec> hybrid, int max_lag)
    : hurst_(hurst), hybrid_(hybrid), max_lag_(max_lag) {
    if (hybrid_) {
        if (hybrid_->kappa < 1) throw ConfigError("hybrid scheme needs kappa >= 1");
        const int count = std::max(0, max_lag_ - hybrid_->kappa + 1);
        weights_.reserve(static_cast<std::size_t>(count));
        for (int ell = hybrid_->kappa; ell <= max_lag_; ++ell) {
            weights_.push_back(scaled_weight(hurst_, hybrid_->rule, ell));
        }
    }
}

double SchemeKernel::weight(int ell) const {
    if (!hybrid_ || ell < hybrid_->kappa) throw DomainError("SchemeKernel::weight: not a constant cell");
    if (ell <= max_lag_) return weights_[static_cast<std::size_t>(ell - hybrid_->kappa)];
    return scaled_weight(hurst_, hybrid_->rule, ell);
}

double SchemeKernel::cell_first_moment(int ell) const {
    if (is_power_cell(ell)) return kernel_integral(hurst_, ell, ell + 1.0);
    return weight(ell);
}

double SchemeKernel::cell_second_moment(int ell) const {
    if (is_power_cell(ell)) return kernel_sq_integral(hurst_, ell, ell + 1.0);
    const double w = weight(ell);
    return w * w;
}

double SchemeKernel::cell_product(int m, int d) const {
    const int outer = m + d;
    if (is_power_cell(outer)) return power_cell_product(hurst_, m, d);
    if (is_power_cell(m)) return weight(outer) * kernel_integral(hurst_, m, m + 1.0);
    return weight(outer) * weight(m);
}

// ---------------------------------------------------------------------------
// CovarianceTable

CovarianceTable::CovarianceTable(const SchemeKernel& kernel, int size) : size_(size), rows_(static_cast<std::size_t>(size) + 1) {
    if (size < 0) throw DomainError("CovarianceTable: negative size");
    const bool exact_kernel = kernel.is_power_cell(size);
    const double two_h = 2.0 * kernel.hurst().value();
    parallel_for(rows_.size(), [&](std::size_t di) {
        const int d = static_cast<int>(di);
        std::vector<double>& row = rows_[di];
        row.resize(static_cast<std::size_t>(size - d) + 1);
        row[0] = 0.0;
        if (d == 0 && exact_kernel) {
            for (int j = 1; j <= size; ++j) row[static_cast<std::size_t>(j)] = std::pow(double(j), two_h) / two_h;
            return;
        }
        CompensatedSum acc;
        for (int j = 1; j <= size - d; ++j) {
            acc += kernel.cell_product(j - 1, d);
            row[static_cast<std::size_t>(j)] = acc.value();
        }
    });
}

double CovarianceTable::scaled(int j, int k) const {
    if (j < 0 || k < 0 || j > size_ || k > size_) throw DomainError("CovarianceTable: index out of range");
    const int lo = std::min(j, k);
    const int d = std::abs(k - j);
    return rows_[static_cast<std::size_t>(d)][static_cast<std::size_t>(lo)];
}

namespace {

struct CacheEntry {
    double hurst;
    bool exact;
    int kappa;
    WeightRule rule;
    std::shared_ptr<const CovarianceTable> table;
};

std::mutex g_cache_mutex;
std::vector<CacheEntry> g_cache;
constexpr std::size_t kCacheCapacity = 4;

}  // namespace

std::shared_ptr<const CovarianceTable> cached_covariance_table(const Hurst& hurst,
                                                               const std::optional<HybridSpec>& hybrid,
                                                               int size) {
    const bool exact = !hybrid.has_value();
    const int kappa = hybrid ? hybrid->kappa : 0;
    const WeightRule rule = hybrid ? hybrid->rule : WeightRule::MomentMatch;
    auto matches = [&](const CacheEntry& e) {
        return e.hurst == hurst.value() && e.exact == exact && (exact || (e.kappa == kappa && e.rule == rule));
    };
    {
        std::lock_guard lock(g_cache_mutex);
        for (auto it = g_cache.begin(); it != g_cache.end(); ++it) {
            if (matches(*it) && it->table->size() >= size) {
                CacheEntry hit = *it;
                g_cache.erase(it);
                g_cache.push_back(hit);
                return hit.table;
            }
        }
    }
    // Built outside the lock; a concurrent builder for the same key just wastes work.
    SchemeKernel kernel(hurst, hybrid, size);
    auto table = std::make_shared<const CovarianceTable>(kernel, size);
    std::lock_guard lock(g_cache_mutex);
    std::erase_if(g_cache, matches);
    g_cache.push_back({hurst.value(), exact, kappa, rule, table});
    if (g_cache.size() > kCacheCapacity) g_cache.erase(g_cache.begin());
    return table;
}

// ---------------------------------------------------------------------------
// Point covariances

double cov_fbm(const Hurst& hurst, double t, double s) {
    if (!(t >= 0.0 && t <= 1.0 && s >= 0.0 && s <= 1.0)) throw DomainError("cov_fbm: arguments must lie in [0, 1]");
    const double lo = std::min(s, t);
    const double hi = std::max(s, t);
    if (lo == 0.0) return 0.0;
    if (lo == hi) return std::pow(lo, 2.0 * hurst.value()) / (2.0 * hurst.value());

    // u = lo - r, then u = v^{1/(H+1/2)} absorbs the u^{H-1/2} endpoint singularity.
    const double alpha = hurst.alpha();
    const double beta = hurst.beta();
    const double gap = hi - lo;
    const double inv_beta = 1.0 / beta;
    auto f = [&](double v) { return std::pow(gap + std::pow(v, inv_beta), alpha) * inv_beta; };
    QuadOptions opts;
    opts.abs_tol = 1e-13;
    const double upper = std::pow(lo, beta);
    // (gap + u)^{H-1/2} varies on the scale u ~ gap; split there so the rule sees it.
    const double knee = std::pow(gap, beta);
    if (knee < upper) {
        opts.abs_tol *= 0.5;
        return integrate_adaptive(f, 0.0, knee, opts).value + integrate_adaptive(f, knee, upper, opts).value;
    }
    return integrate_adaptive(f, 0.0, upper, opts).value;
}

double cov_fbm_bm(const Hurst& hurst, double t, double a, double b) {
    if (!(t >= 0.0 && t <= 1.0 && a >= 0.0 && b <= 1.0)) throw DomainError("cov_fbm_bm: arguments must lie in [0, 1]");
    if (a > b) throw DomainError("cov_fbm_bm: need a <= b");
    const double upper = std::min(b, t);
    const double lower = std::min(a, t);
    if (upper <= lower) return 0.0;
    return kernel_integral(hurst, t - upper, t - lower);
}

double cov_hybrid(const Hurst& hurst, const Grid& grid, const HybridSpec& spec, int j, int k) {
    if (spec.kappa < 1 || spec.kappa > grid.n()) throw ConfigError("hybrid scheme needs 1 <= kappa <= n");
    if (j < 0 || k < 0 || j > grid.n() || k > grid.n()) throw DomainError("cov_hybrid: grid index out of range");
    const int lo = std::min(j, k);
    const int d = std::abs(k - j);
    const SchemeKernel kernel(hurst, spec, grid.n());
    CompensatedSum acc;
    for (int m = 0; m < lo; ++m) acc += kernel.cell_product(m, d);
    return std::pow(grid.h(), 2.0 * hurst.value()) * acc.value();
}

double cov_hybrid_bm(const Hurst& hurst, const Grid& grid, const HybridSpec& spec, int k, int j) {
    if (spec.kappa < 1 || spec.kappa > grid.n()) throw ConfigError("hybrid scheme needs 1 <= kappa <= n");
    if (k < 0 || k > grid.n() || j < 0 || j >= grid.n()) throw DomainError("cov_hybrid_bm: index out of range");
    if (j >= k) return 0.0;
    const SchemeKernel kernel(hurst, spec, grid.n());
    return std::pow(grid.h(), hurst.beta()) * kernel.cell_first_moment(k - j - 1);
}

// ---------------------------------------------------------------------------
// Assembly and factorization

namespace {

// Unblocked Cholesky used only to locate the failing leading minor.
std::size_t first_failing_minor(const Eigen::MatrixXd& m) {
    const Eigen::Index dim = m.rows();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
        double diag = m(j, j) - l.row(j).head(j).squaredNorm();
        if (!(diag > 0.0)) return static_cast<std::size_t>(j);
        l(j, j) = std::sqrt(diag);
        for (Eigen::Index i = j + 1; i < dim; ++i) {
            l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
        }
    }
    return static_cast<std::size_t>(dim);
}

}  // namespace

CovarianceBundle assemble(const SchemeSpec& scheme) {
    const int n = scheme.grid().n();
    const double h = scheme.grid().h();
    const Hurst& hurst = scheme.hurst();
    const auto table = cached_covariance_table(hurst, scheme.hybrid(), n);
    const SchemeKernel kernel(hurst, scheme.hybrid(), n);

    const Eigen::Index dim = 2 * n;
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(dim, dim);
    const double cov_scale = std::pow(h, 2.0 * hurst.value());
    const double cross_scale = std::pow(h, hurst.beta());
    for (int j = 1; j <= n; ++j) {
        for (int k = j; k <= n; ++k) {
            const double c = cov_scale * table->scaled(j, k);
            full(j - 1, k - 1) = c;
            full(k - 1, j - 1) = c;
        }
    }
    for (int k = 1; k <= n; ++k) {
        for (int j = 0; j < k; ++j) {
            const double c = cross_scale * kernel.cell_first_moment(k - j - 1);
            full(k - 1, n + j) = c;
            full(n + j, k - 1) = c;
        }
    }
    for (int j = 0; j < n; ++j) full(n + j, n + j) = h;

    std::ostringstream label;
    label << scheme.family() << " scheme (H = " << hurst.value() << ", n = " << n << ")";
    double jitter = 0.0;
    Eigen::MatrixXd lower = cholesky_with_jitter(full, label.str(), jitter);
    return {scheme, std::move(full), std::move(lower), jitter};
}

Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& full, const std::string& label, double& jitter_used) {
    const double max_diag = full.rows() > 0 ? full.diagonal().maxCoeff() : 0.0;
    double jitter = 0.0;
    for (int exponent = -14;; ++exponent) {
        Eigen::MatrixXd trial = full;
        trial.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(trial);
        if (llt.info() == Eigen::Success) {
            jitter_used = jitter;
            return llt.matrixL();
        }
        if (exponent > -8) {
            const std::size_t minor = first_failing_minor(trial);
            std::ostringstream msg;
            msg << "covariance factorization failed for " << label << " at leading minor " << minor
                << " even with jitter " << jitter;
            throw FactorizationError(msg.str(), minor);
        }
        jitter = std::pow(10.0, exponent) * max_diag;
    }
}

Eigen::MatrixXd gaussian_columns(const Eigen::MatrixXd& lower, std::uint64_t seed, std::uint64_t stream_id,
                                 int batch_size, int first, int count, bool antithetic) {
    if (batch_size < 0 || first < 0 || count < 0 || first + count > batch_size) {
        throw DomainError("gaussian_columns: column range outside the batch");
    }
    const Eigen::Index dim = lower.rows();
    const int half = antithetic ? batch_size / 2 : 0;
    Eigen::MatrixXd z(dim, count);
    for (int c = 0; c < count; ++c) {
        int p = first + c;
        double sign = 1.0;
        if (p >= half && p < 2 * half) {
            p -= half;
            sign = -1.0;
        }
        CounterRng rng(seed, stream_id, static_cast<std::uint64_t>(p));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index i = 0; i < dim; ++i) z(i, c) = sign * normal(rng);
    }
    return lower.triangularView<Eigen::Lower>() * z;
}

PathBatch sample(const CovarianceBundle& bundle, std::uint64_t seed, std::uint64_t stream_id, int batch_size,
                 bool antithetic) {
    if (batch_size < 0) throw DomainError("sample: negative batch size");
    PathBatch batch;
    batch.n = bundle.n();
    batch.batch_size = batch_size;
    batch.seed = seed;
    batch.stream_id = stream_id;
    batch.values = gaussian_columns(bundle.lower, seed, stream_id, batch_size, 0, batch_size, antithetic);
    return batch;
}

}  // namespace fracweak
