#include "fracweak/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>

#include "fracweak/errors.hpp"
#include "fracweak/parallel.hpp"
#include "fracweak/summation.hpp"

namespace fracweak {

IntegrandFn::IntegrandFn(Kind kind, double eta, std::function<double(double)> fn, std::string name)
    : kind_(kind), eta_(eta), fn_(std::move(fn)), name_(std::move(name)) {}

IntegrandFn IntegrandFn::identity() { return {Kind::Identity, 0.0, nullptr, "id"}; }

IntegrandFn IntegrandFn::exp_vol(double eta) {
    if (!std::isfinite(eta)) throw DomainError("exp_vol: eta must be finite");
    std::ostringstream name;
    name << "expvol:" << eta;
    return {Kind::ExpVol, eta, nullptr, name.str()};
}

IntegrandFn IntegrandFn::user(std::function<double(double)> fn, std::string name) {
    if (!fn) throw ConfigError("user integrand needs a callable");
    return {Kind::User, 0.0, std::move(fn), std::move(name)};
}

double IntegrandFn::operator()(double x) const {
    switch (kind_) {
        case Kind::Identity: return x;
        case Kind::ExpVol: return std::exp(eta_ * x);
        case Kind::User: return fn_(x);
    }
    return x;
}

TestFn::TestFn(Kind kind, std::vector<double> coeffs, std::function<double(double)> fn, std::string name)
    : kind_(kind), coeffs_(std::move(coeffs)), fn_(std::move(fn)), name_(std::move(name)) {}

TestFn TestFn::quadratic() { return {Kind::Quadratic, {0.0, 0.0, 1.0}, nullptr, "quadratic"}; }

TestFn TestFn::cubic_over_six() { return {Kind::CubicOverSix, {0.0, 0.0, 0.0, 1.0 / 6.0}, nullptr, "cubic6"}; }

TestFn TestFn::polynomial(std::vector<double> coeffs) {
    if (coeffs.empty()) throw ConfigError("polynomial test function needs at least one coefficient");
    if (coeffs.size() > 9) throw ConfigError("polynomial test function degree must be at most 8");
    for (double c : coeffs) {
        if (!std::isfinite(c)) throw ConfigError("polynomial coefficients must be finite");
    }
    std::ostringstream name;
    name << "poly:";
    for (std::size_t i = 0; i < coeffs.size(); ++i) name << (i ? "," : "") << coeffs[i];
    return {Kind::Polynomial, std::move(coeffs), nullptr, name.str()};
}

TestFn TestFn::user(std::function<double(double)> fn, std::string name) {
    if (!fn) throw ConfigError("user test function needs a callable");
    return {Kind::User, {}, std::move(fn), std::move(name)};
}

double TestFn::operator()(double x) const {
    switch (kind_) {
        case Kind::Quadratic: return x * x;
        case Kind::CubicOverSix: return x * x * x / 6.0;
        case Kind::Polynomial: {
            double acc = 0.0;
            for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
            return acc;
        }
        case Kind::User: return fn_(x);
    }
    return x;
}

void MCConfig::validate() const {
    if (paths_per_batch < 1) throw ConfigError("paths_per_batch must be at least 1");
    if (batches < 1) throw ConfigError("batches must be at least 1");
    if (threads < 0) throw ConfigError("threads must be non-negative");
}

namespace {

constexpr double kNonFiniteLimit = 1e-3;

void check_nonfinite(std::size_t bad, std::size_t total) {
    if (static_cast<double>(bad) > kNonFiniteLimit * static_cast<double>(total)) {
        std::ostringstream msg;
        msg << bad << " of " << total << " paths produced non-finite values (limit 0.1%)";
        throw NonFiniteError(msg.str(), bad, total);
    }
}

// Left-point sum for one path stored in column c of `values` (rows X_{t_1..t_n}, dW_0..dW_{n-1}).
double left_point_sum(const Eigen::MatrixXd& values, Eigen::Index c, int n, const IntegrandFn& f) {
    double acc = f(0.0) * values(n, c);
    for (int k = 1; k < n; ++k) acc += f(values(k - 1, c)) * values(n + k, c);
    return acc;
}

struct BatchStats {
    double mean = 0.0;
    std::size_t bad = 0;
};

// Draws cfg.batches batches of paths from `lower` and averages path_value over each batch.
// Batch b uses stream b; columns are generated in fixed-size chunks, so nothing depends on
// the worker count.
template <class PathValue>
MCEstimate run_batches(const Eigen::MatrixXd& lower, const MCConfig& cfg, PathValue path_value) {
    cfg.validate();
    const Eigen::Index dim = std::max<Eigen::Index>(1, lower.rows());
    const int chunk = static_cast<int>(std::max<Eigen::Index>(1, (Eigen::Index{1} << 21) / dim));
    std::vector<BatchStats> stats(static_cast<std::size_t>(cfg.batches));

    parallel_for(
        stats.size(),
        [&](std::size_t b) {
            CompensatedSum sum;
            std::size_t good = 0;
            std::size_t bad = 0;
            for (int first = 0; first < cfg.paths_per_batch; first += chunk) {
                const int count = std::min(chunk, cfg.paths_per_batch - first);
                const Eigen::MatrixXd values =
                    gaussian_columns(lower, cfg.seed, b, cfg.paths_per_batch, first, count, cfg.antithetic);
                for (Eigen::Index c = 0; c < count; ++c) {
                    const double v = path_value(values, c);
                    if (std::isfinite(v)) {
                        sum += v;
                        ++good;
                    } else {
                        ++bad;
                    }
                }
            }
            stats[b].bad = bad;
            stats[b].mean = good > 0 ? sum.value() / static_cast<double>(good) : std::nan("");
        },
        cfg.threads);

    MCEstimate est;
    est.config = cfg;
    est.total_paths = static_cast<std::size_t>(cfg.batches) * static_cast<std::size_t>(cfg.paths_per_batch);
    std::vector<double> means;
    means.reserve(stats.size());
    for (const auto& s : stats) {
        est.nonfinite_paths += s.bad;
        means.push_back(s.mean);
    }
    check_nonfinite(est.nonfinite_paths, est.total_paths);
    for (double m : means) {
        if (!std::isfinite(m)) throw NonFiniteError("a batch produced no finite paths", est.nonfinite_paths, est.total_paths);
    }
    const double batches = static_cast<double>(means.size());
    est.mean = pairwise_sum(means) / batches;
    if (means.size() >= 2) {
        std::vector<double> sq;
        sq.reserve(means.size());
        for (double m : means) sq.push_back((m - est.mean) * (m - est.mean));
        est.stderr = std::sqrt(pairwise_sum(sq) / (batches * (batches - 1.0)));
    }
    return est;
}

void require_compatible(const SchemeSpec& coarse, const SchemeSpec& fine) {
    if (!(coarse.hurst() == fine.hurst())) throw ConfigError("coupled schemes must share H");
    if (fine.grid().n() % coarse.grid().n() != 0) {
        throw ConfigError("coupled schemes need the fine n to be a multiple of the coarse n");
    }
    if (coarse.is_exact() != fine.is_exact()) throw ConfigError("coupled schemes must both be exact or both hybrid");
    if (!coarse.is_exact() && !(*coarse.hybrid() == *fine.hybrid())) {
        throw ConfigError("coupled hybrid schemes must share kappa and weight rule");
    }
}

// Kernel of a hybrid fBm value, in fine grid units, restricted to one fine cell: either the
// power kernel with apex at the value's time, or a constant.
struct CellKernel {
    bool power = false;
    double weight = 0.0;
};

// Hybrid fBm at fine index `apex` built on a grid `ratio` times coarser than the fine grid.
std::vector<CellKernel> hybrid_cells(const Hurst& hurst, const HybridSpec& spec, int apex, int ratio) {
    std::vector<CellKernel> cells(static_cast<std::size_t>(apex));
    const double scale = std::pow(static_cast<double>(ratio), hurst.alpha());
    for (int i = 0; i < apex; ++i) {
        const int lag = (apex - i - 1) / ratio;
        if (lag < spec.kappa) {
            cells[static_cast<std::size_t>(i)] = {true, 1.0};
        } else {
            cells[static_cast<std::size_t>(i)] = {false, scale * scaled_weight(hurst, spec.rule, lag)};
        }
    }
    return cells;
}

class CellProducts {
public:
    explicit CellProducts(Hurst hurst) : hurst_(hurst) {}

    // Integral over fine cell i of the two kernels, in fine grid units.
    double operator()(const CellKernel& a, int apex_a, const CellKernel& b, int apex_b, int i) {
        if (a.power && b.power) {
            const int m = std::min(apex_a, apex_b) - i - 1;
            const int d = std::abs(apex_a - apex_b);
            auto [it, inserted] = power_.try_emplace({m, d}, 0.0);
            if (inserted) it->second = power_cell_product(hurst_, m, d);
            return it->second;
        }
        if (a.power) return b.weight * power_integral(apex_a - i - 1);
        if (b.power) return a.weight * power_integral(apex_b - i - 1);
        return a.weight * b.weight;
    }

    double power_integral(int lag) const { return kernel_integral(hurst_, lag, lag + 1.0); }

private:
    Hurst hurst_;
    std::map<std::pair<int, int>, double> power_;
};

// Joint covariance of (fine X, fine dW, coarse X) for coupled hybrid schemes.
Eigen::MatrixXd coupled_hybrid_covariance(const CovarianceBundle& fine_bundle, const SchemeSpec& coarse) {
    const int nf = fine_bundle.n();
    const int nc = coarse.grid().n();
    const int ratio = nf / nc;
    const Hurst& hurst = coarse.hurst();
    const HybridSpec& spec = *coarse.hybrid();
    const double h = fine_bundle.scheme.grid().h();
    const double cov_scale = std::pow(h, 2.0 * hurst.value());
    const double cross_scale = std::pow(h, hurst.beta());

    std::vector<std::vector<CellKernel>> fine_cells;
    std::vector<std::vector<CellKernel>> coarse_cells;
    for (int j = 1; j <= nf; ++j) fine_cells.push_back(hybrid_cells(hurst, spec, j, 1));
    for (int k = 1; k <= nc; ++k) coarse_cells.push_back(hybrid_cells(hurst, spec, k * ratio, ratio));

    const Eigen::Index dim = 2 * nf + nc;
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(dim, dim);
    full.topLeftCorner(2 * nf, 2 * nf) = fine_bundle.full;
    CellProducts products(hurst);
    auto pair_cov = [&](const std::vector<CellKernel>& a, int apex_a, const std::vector<CellKernel>& b, int apex_b) {
        CompensatedSum acc;
        const int cells = std::min(apex_a, apex_b);
        for (int i = 0; i < cells; ++i) {
            acc += products(a[static_cast<std::size_t>(i)], apex_a, b[static_cast<std::size_t>(i)], apex_b, i);
        }
        return cov_scale * acc.value();
    };
    for (int k = 1; k <= nc; ++k) {
        const Eigen::Index row = 2 * nf + k - 1;
        const auto& ck = coarse_cells[static_cast<std::size_t>(k - 1)];
        const int apex = k * ratio;
        for (int j = 1; j <= nf; ++j) {
            const double c = pair_cov(ck, apex, fine_cells[static_cast<std::size_t>(j - 1)], j);
            full(row, j - 1) = c;
            full(j - 1, row) = c;
        }
        for (int i = 0; i < apex; ++i) {
            const auto& cell = ck[static_cast<std::size_t>(i)];
            const double c = cross_scale * (cell.power ? products.power_integral(apex - i - 1) : cell.weight);
            full(row, nf + i) = c;
            full(nf + i, row) = c;
        }
        for (int l = 1; l <= k; ++l) {
            const double c = pair_cov(ck, apex, coarse_cells[static_cast<std::size_t>(l - 1)], l * ratio);
            full(row, 2 * nf + l - 1) = c;
            full(2 * nf + l - 1, row) = c;
        }
    }
    return full;
}

}  // namespace

std::vector<double> discrete_integral(const PathBatch& paths, const IntegrandFn& f) {
    std::vector<double> out(static_cast<std::size_t>(paths.batch_size));
    std::size_t bad = 0;
    for (int p = 0; p < paths.batch_size; ++p) {
        const double v = left_point_sum(paths.values, p, paths.n, f);
        if (std::isfinite(v)) {
            out[static_cast<std::size_t>(p)] = v;
        } else {
            out[static_cast<std::size_t>(p)] = std::nan("");
            ++bad;
        }
    }
    check_nonfinite(bad, out.size());
    return out;
}

MCEstimate estimate(const TestFn& phi, const IntegrandFn& f, const SchemeSpec& scheme, const MCConfig& cfg) {
    cfg.validate();
    const CovarianceBundle bundle = assemble(scheme);
    const int n = bundle.n();
    MCEstimate est = run_batches(bundle.lower, cfg, [&](const Eigen::MatrixXd& values, Eigen::Index c) {
        return phi(left_point_sum(values, c, n, f));
    });
    est.jitter_used = bundle.jitter_used;
    return est;
}

MCEstimate estimate_weak_error_coupled(const TestFn& phi, const IntegrandFn& f, const SchemeSpec& coarse,
                                       const SchemeSpec& fine, const MCConfig& cfg) {
    cfg.validate();
    require_compatible(coarse, fine);
    const CovarianceBundle fine_bundle = assemble(fine);
    const int nf = fine_bundle.n();
    const int nc = coarse.grid().n();
    const int ratio = nf / nc;

    if (ratio == 1) {
        MCEstimate est = run_batches(fine_bundle.lower, cfg, [&](const Eigen::MatrixXd& values, Eigen::Index c) {
            const double v = phi(left_point_sum(values, c, nf, f));
            return v - v;
        });
        est.jitter_used = fine_bundle.jitter_used;
        return est;
    }

    // Rows holding coarse X_{T_1..T_nc}: fine rows for the exact scheme, extra rows for hybrid.
    Eigen::MatrixXd lower;
    double jitter = fine_bundle.jitter_used;
    std::vector<Eigen::Index> coarse_rows;
    if (fine.is_exact()) {
        lower = fine_bundle.lower;
        for (int k = 1; k <= nc; ++k) coarse_rows.push_back(k * ratio - 1);
    } else {
        const Eigen::MatrixXd joint = coupled_hybrid_covariance(fine_bundle, coarse);
        lower = cholesky_with_jitter(joint, "coupled hybrid schemes", jitter);
        for (int k = 1; k <= nc; ++k) coarse_rows.push_back(2 * nf + k - 1);
    }

    MCEstimate est = run_batches(lower, cfg, [&](const Eigen::MatrixXd& values, Eigen::Index c) {
        const double fine_sum = left_point_sum(values, c, nf, f);
        double coarse_sum = 0.0;
        for (int k = 0; k < nc; ++k) {
            double dw = 0.0;
            for (int j = k * ratio; j < (k + 1) * ratio; ++j) dw += values(nf + j, c);
            const double x = k == 0 ? 0.0 : values(coarse_rows[static_cast<std::size_t>(k - 1)], c);
            coarse_sum += f(x) * dw;
        }
        return phi(fine_sum) - phi(coarse_sum);
    });
    est.jitter_used = jitter;
    return est;
}

double black_scholes_call(double spot, double strike, double variance) {
    if (!(spot > 0.0) || !(strike > 0.0)) throw DomainError("black_scholes_call: spot and strike must be positive");
    if (!(variance > 0.0)) return std::max(spot - strike, 0.0);
    const double sd = std::sqrt(variance);
    const double d1 = (std::log(spot / strike) + 0.5 * variance) / sd;
    const double d2 = d1 - sd;
    auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    return spot * cdf(d1) - strike * cdf(d2);
}

MCEstimate price_call_romano_touzi(const IntegrandFn& f, const SchemeSpec& scheme, double rho, double spot,
                                   double strike, const MCConfig& cfg) {
    if (!(rho >= -1.0 && rho <= 1.0)) throw DomainError("rho must lie in [-1, 1]");
    if (!(spot > 0.0) || !(strike > 0.0)) throw DomainError("spot and strike must be positive");
    cfg.validate();
    const CovarianceBundle bundle = assemble(scheme);
    const int n = bundle.n();
    const double h = scheme.grid().h();
    MCEstimate est = run_batches(bundle.lower, cfg, [&](const Eigen::MatrixXd& values, Eigen::Index c) {
        double v = 0.0;
        double m = 0.0;
        for (int k = 0; k < n; ++k) {
            const double vol = f(k == 0 ? 0.0 : values(k - 1, c));
            v += vol * vol;
            m += vol * values(n + k, c);
        }
        v *= h;
        const double forward = spot * std::exp(rho * m - 0.5 * rho * rho * v);
        if (!std::isfinite(forward) || !std::isfinite(v)) return std::nan("");
        if (forward <= 0.0) return 0.0;
        return black_scholes_call(forward, strike, (1.0 - rho * rho) * v);
    });
    est.jitter_used = bundle.jitter_used;
    return est;
}

}  // namespace fracweak
