#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracweak/grid_kernel.hpp"

namespace fracweak {

/// Which discretization of the fBm feeds the left-point integral: the exact
/// (Cholesky) scheme, or the hybrid scheme with a given kappa and weight rule.
class SchemeSpec {
public:
    static SchemeSpec exact(Hurst hurst, Grid grid);
    static SchemeSpec hybrid(Hurst hurst, Grid grid, HybridSpec spec);

    const Hurst& hurst() const noexcept { return hurst_; }
    const Grid& grid() const noexcept { return grid_; }
    bool is_exact() const noexcept { return !hybrid_.has_value(); }
    const std::optional<HybridSpec>& hybrid() const noexcept { return hybrid_; }

    /// Same scheme family on another grid.
    SchemeSpec on_grid(Grid grid) const;

    /// "exact" or "hybrid".
    std::string family() const;
    /// Weight rule name for hybrid schemes, "-" for exact.
    std::string rule_name() const;
    int kappa() const noexcept { return hybrid_ ? hybrid_->kappa : 0; }

private:
    SchemeSpec(Hurst hurst, Grid grid, std::optional<HybridSpec> hybrid);

    Hurst hurst_;
    Grid grid_;
    std::optional<HybridSpec> hybrid_;
};

/// The scheme's kernel in grid units (h = 1): lag u >= 0 maps to u^{H-1/2} on
/// power cells and to a constant weight on hybrid constant cells. Every quantity
/// on a grid of size n is h^{...} times a value computed here.
class SchemeKernel {
public:
    SchemeKernel(Hurst hurst, std::optional<HybridSpec> hybrid, int max_lag);

    const Hurst& hurst() const noexcept { return hurst_; }
    int max_lag() const noexcept { return max_lag_; }
    bool is_power_cell(int ell) const noexcept { return !hybrid_ || ell < hybrid_->kappa; }
    /// Constant weight of cell ell (hybrid constant cells only).
    double weight(int ell) const;
    /// Integral of the scaled kernel over [ell, ell + 1].
    double cell_first_moment(int ell) const;
    /// Integral of the squared scaled kernel over [ell, ell + 1].
    double cell_second_moment(int ell) const;
    /// Integral over u in [m, m+1] of w(d + u) w(u).
    double cell_product(int m, int d) const;

private:
    Hurst hurst_;
    std::optional<HybridSpec> hybrid_;
    int max_lag_;
    std::vector<double> weights_;
};

/// Integral over u in [m, m+1] of (d + u)^{H-1/2} u^{H-1/2}: one cell of the
/// Riemann-Liouville covariance in grid units.
double power_cell_product(const Hurst& hurst, int m, int d);

/// Scaled covariance c(j, k) of the scheme's fBm at integer times j, k <= size,
/// stored as prefix sums over cells for each lag d = |k - j|. The physical
/// covariance on a grid with step h is h^{2H} c(j, k).
class CovarianceTable {
public:
    CovarianceTable(const SchemeKernel& kernel, int size);

    int size() const noexcept { return size_; }
    double scaled(int j, int k) const;
    /// Row for lag d: entries c(j, j + d) for j = 0 .. size - d.
    const std::vector<double>& lag_row(int d) const { return rows_.at(static_cast<std::size_t>(d)); }

private:
    int size_;
    std::vector<std::vector<double>> rows_;
};

/// Shared, process-wide cache of tables keyed by (H, scheme family, kappa, rule).
/// Tables are self-similar, so one of size N serves every grid with n <= N.
std::shared_ptr<const CovarianceTable> cached_covariance_table(const Hurst& hurst,
                                                               const std::optional<HybridSpec>& hybrid,
                                                               int size);

/// E[W_t W_s] for the Riemann-Liouville fBm.
double cov_fbm(const Hurst& hurst, double t, double s);

/// Cov(W_t, B_b - B_a) where B is the driving Brownian motion.
double cov_fbm_bm(const Hurst& hurst, double t, double a, double b);

/// Covariance of the hybrid-scheme fBm at grid indices j, k in [0, n].
double cov_hybrid(const Hurst& hurst, const Grid& grid, const HybridSpec& spec, int j, int k);

/// Cov(hybrid fBm at t_k, B_{t_{j+1}} - B_{t_j}).
double cov_hybrid_bm(const Hurst& hurst, const Grid& grid, const HybridSpec& spec, int k, int j);

/// Joint law of (X_{t_1}..X_{t_n}, dW_0..dW_{n-1}) for a scheme, with its lower Cholesky factor.
struct CovarianceBundle {
    SchemeSpec scheme;
    Eigen::MatrixXd full;
    Eigen::MatrixXd lower;
    double jitter_used = 0.0;

    int n() const noexcept { return scheme.grid().n(); }
    auto fbm_block() const { return full.topLeftCorner(n(), n()); }
    auto cross_block() const { return full.topRightCorner(n(), n()); }
    auto increment_block() const { return full.bottomRightCorner(n(), n()); }
};

CovarianceBundle assemble(const SchemeSpec& scheme);

/// Lower Cholesky factor of a covariance, adding jitter 10^k * max diagonal for k = -14..-8
/// until the factorization succeeds. Throws FactorizationError naming `label` otherwise.
Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& full, const std::string& label, double& jitter_used);

/// Columns [first, first + count) of lower * Z, where column p of Z is a standard normal
/// vector keyed by (seed, stream_id, p). With antithetic set, column p + batch_size/2
/// is the negation of column p for p < batch_size/2.
Eigen::MatrixXd gaussian_columns(const Eigen::MatrixXd& lower, std::uint64_t seed, std::uint64_t stream_id,
                                 int batch_size, int first, int count, bool antithetic);

/// batch_size paths drawn from a bundle. Column p of `values` holds path p:
/// rows 0..n-1 are X_{t_1}..X_{t_n}, rows n..2n-1 are dW_0..dW_{n-1}.
struct PathBatch {
    int n = 0;
    int batch_size = 0;
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
    Eigen::MatrixXd values;

    /// Scheme fBm at grid index k in [0, n]; X at t_0 is zero.
    double x(int path, int k) const { return k == 0 ? 0.0 : values(k - 1, path); }
    double dw(int path, int j) const { return values(n + j, path); }
};

/// Rows are keyed by (seed, stream_id, row). With antithetic set, the second half
/// of the batch reuses the first half's normals with the sign flipped.
PathBatch sample(const CovarianceBundle& bundle, std::uint64_t seed, std::uint64_t stream_id,
                 int batch_size, bool antithetic = false);

/// Binary dump: little-endian header {"FWCV", u32 version, u32 n, u8 scheme tag,
/// f64 H, u32 kappa, u8 rule}, then the 2n x 2n covariance and its lower factor
/// (row-major f64), then f64 jitter_used.
void write_bundle(std::ostream& out, const CovarianceBundle& bundle);

struct BundleDump {
    std::uint32_t version = 0;
    std::uint32_t n = 0;
    std::uint8_t scheme_tag = 0;
    double hurst = 0.0;
    std::uint32_t kappa = 0;
    std::uint8_t rule = 0;
    Eigen::MatrixXd full;
    Eigen::MatrixXd lower;
    double jitter_used = 0.0;
};

BundleDump read_bundle(std::istream& in);

}  // namespace fracweak
