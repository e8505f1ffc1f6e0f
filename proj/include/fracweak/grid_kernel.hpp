#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fracweak {

/// Hurst index of the Riemann-Liouville fBm, restricted to the open interval (0, 1/2).
class Hurst {
public:
    explicit Hurst(double value);

    double value() const noexcept { return value_; }
    /// H - 1/2, the exponent of the power kernel.
    double alpha() const noexcept { return value_ - 0.5; }
    /// H + 1/2, the exponent of the kernel's antiderivative.
    double beta() const noexcept { return value_ + 0.5; }
    /// Within 1e-3 of either endpoint; accepted, but reports flag it.
    bool near_boundary() const noexcept;

    friend bool operator==(const Hurst&, const Hurst&) = default;

private:
    double value_;
};

/// Uniform grid t_k = k/n on [0, 1].
class Grid {
public:
    explicit Grid(int n);

    int n() const noexcept { return n_; }
    double h() const noexcept { return 1.0 / n_; }
    double point(int k) const;

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int n_;
};

enum class WeightRule { LeftPoint, MidPoint, MseOptimal, MomentMatch };

std::string_view to_string(WeightRule rule);
/// Accepts the short CLI names (left, mid, mse, mm) and the enumerator names.
WeightRule parse_weight_rule(std::string_view text);

struct HybridSpec {
    int kappa = 1;
    WeightRule rule = WeightRule::MomentMatch;

    friend bool operator==(const HybridSpec&, const HybridSpec&) = default;
};

/// Hybrid-scheme weights k_l for l = kappa .. n-1, in physical units (h^{H-1/2}).
struct DiscreteKernelTable {
    Hurst hurst;
    Grid grid;
    HybridSpec spec;
    std::vector<double> weights;

    /// Weight for lag index l, kappa <= l <= n-1.
    double weight(int ell) const;
};

/// Left grid point floor(n t)/n.
double eta(const Grid& grid, double t);

/// (t - s)^{H-1/2} for s < t, else 0.
double kernel_eval(const Hurst& hurst, double t, double s);

/// Integral of r^{H-1/2} over [a, b].
double kernel_integral(const Hurst& hurst, double a, double b);

/// Integral of r^{2H-1} over [a, b].
double kernel_sq_integral(const Hurst& hurst, double a, double b);

DiscreteKernelTable hybrid_weights(const Hurst& hurst, const Grid& grid, const HybridSpec& spec);

/// Hybrid weight for lag l in units where h = 1. Every rule is self-similar, so the
/// physical weight is h^{H-1/2} times this value.
double scaled_weight(const Hurst& hurst, WeightRule rule, int ell);

/// Integral over [0, t] of K(eta(t), s) - K(t, s) for the exact scheme.
double delta_kernel_first_moment(const Hurst& hurst, const Grid& grid, double t);

/// Integral over [0, t] of K(eta(t), s)^2 - K(t, s)^2 for the exact scheme.
double delta_kernel_sq_first_moment(const Hurst& hurst, const Grid& grid, double t);

/// Integral over [0, t] of the hybrid kernel minus the exact kernel at a grid point t.
double hybrid_first_moment_gap(const Hurst& hurst, const Grid& grid, const HybridSpec& spec,
                               double t);

}  // namespace fracweak
