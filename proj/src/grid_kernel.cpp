#include "fracweak/grid_kernel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

#include "fracweak/errors.hpp"
#include "fracweak/summation.hpp"

namespace fracweak {

Hurst::Hurst(double value) : value_(value) {
    if (!(value > 0.0 && value < 0.5)) {
        std::ostringstream msg;
        msg << "Hurst index must lie in (0, 1/2), got " << value;
        throw DomainError(msg.str());
    }
}

bool Hurst::near_boundary() const noexcept { return value_ < 1e-3 || value_ > 0.5 - 1e-3; }

Grid::Grid(int n) : n_(n) {
    if (n < 1) throw ConfigError("grid needs at least one step, got n = " + std::to_string(n));
}

double Grid::point(int k) const {
    if (k < 0 || k > n_) throw DomainError("grid index out of range");
    if (k == n_) return 1.0;
    return static_cast<double>(k) / n_;
}

std::string_view to_string(WeightRule rule) {
    switch (rule) {
        case WeightRule::LeftPoint: return "left";
        case WeightRule::MidPoint: return "mid";
        case WeightRule::MseOptimal: return "mse";
        case WeightRule::MomentMatch: return "mm";
    }
    return "?";
}

WeightRule parse_weight_rule(std::string_view text) {
    std::string s(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "left" || s == "leftpoint") return WeightRule::LeftPoint;
    if (s == "mid" || s == "midpoint") return WeightRule::MidPoint;
    if (s == "mse" || s == "mseoptimal") return WeightRule::MseOptimal;
    if (s == "mm" || s == "momentmatch") return WeightRule::MomentMatch;
    throw ConfigError("unknown weight rule '" + std::string(text) + "' (expected left, mid, mse or mm)");
}

double DiscreteKernelTable::weight(int ell) const {
    if (ell < spec.kappa || ell >= grid.n()) throw DomainError("weight index outside [kappa, n-1]");
    return weights[static_cast<std::size_t>(ell - spec.kappa)];
}

double eta(const Grid& grid, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("eta: t must lie in [0, 1]");
    const double scaled = grid.n() * t;
    double k = std::floor(scaled);
    // k/n for integer k may round to just below an integer once rescaled.
    if (k + 1.0 - scaled <= 4.0 * std::numeric_limits<double>::epsilon() * scaled) k += 1.0;
    return k / grid.n();
}

double kernel_eval(const Hurst& hurst, double t, double s) {
    if (s >= t) return 0.0;
    return std::pow(t - s, hurst.alpha());
}

namespace {

// (b^p - a^p)/p without the cancellation of the naive difference when b - a << a.
double power_difference(double a, double b, double p) {
    if (a == 0.0) return std::pow(b, p) / p;
    return std::pow(a, p) * std::expm1(p * std::log1p((b - a) / a)) / p;
}

}  // namespace

double kernel_integral(const Hurst& hurst, double a, double b) {
    if (a < 0.0) throw DomainError("kernel_integral: a must be non-negative");
    if (b < a) throw DomainError("kernel_integral: b must be >= a");
    return power_difference(a, b, hurst.beta());
}

double kernel_sq_integral(const Hurst& hurst, double a, double b) {
    if (a < 0.0) throw DomainError("kernel_sq_integral: a must be non-negative");
    if (b < a) throw DomainError("kernel_sq_integral: b must be >= a");
    return power_difference(a, b, 2.0 * hurst.value());
}

double scaled_weight(const Hurst& hurst, WeightRule rule, int ell) {
    if (ell < 0) throw DomainError("scaled_weight: negative lag");
    const double l = ell;
    switch (rule) {
        case WeightRule::LeftPoint: return std::pow(l + 1.0, hurst.alpha());
        case WeightRule::MidPoint: return std::pow(l + 0.5, hurst.alpha());
        case WeightRule::MseOptimal: return kernel_integral(hurst, l, l + 1.0);
        case WeightRule::MomentMatch: return std::sqrt(kernel_sq_integral(hurst, l, l + 1.0));
    }
    return 0.0;
}

DiscreteKernelTable hybrid_weights(const Hurst& hurst, const Grid& grid, const HybridSpec& spec) {
    if (spec.kappa < 1) throw ConfigError("hybrid scheme needs kappa >= 1");
    if (spec.kappa > grid.n()) {
        throw ConfigError("hybrid scheme needs kappa <= n (kappa = " + std::to_string(spec.kappa) +
                          ", n = " + std::to_string(grid.n()) + ")");
    }
    const double h = grid.h();
    DiscreteKernelTable table{hurst, grid, spec, {}};
    table.weights.reserve(static_cast<std::size_t>(grid.n() - spec.kappa));
    for (int ell = spec.kappa; ell < grid.n(); ++ell) {
        const double a = ell * h;
        const double b = (ell + 1) * h;
        double w = 0.0;
        switch (spec.rule) {
            case WeightRule::LeftPoint: w = std::pow(b, hurst.alpha()); break;
            case WeightRule::MidPoint: w = std::pow((ell + 0.5) * h, hurst.alpha()); break;
            case WeightRule::MseOptimal: w = kernel_integral(hurst, a, b) / h; break;
            case WeightRule::MomentMatch: w = std::sqrt(kernel_sq_integral(hurst, a, b) / h); break;
        }
        table.weights.push_back(w);
    }
    return table;
}

double delta_kernel_first_moment(const Hurst& hurst, const Grid& grid, double t) {
    const double left = eta(grid, t);
    const double beta = hurst.beta();
    return (std::pow(left, beta) - std::pow(t, beta)) / beta;
}

double delta_kernel_sq_first_moment(const Hurst& hurst, const Grid& grid, double t) {
    const double left = eta(grid, t);
    const double two_h = 2.0 * hurst.value();
    return (std::pow(left, two_h) - std::pow(t, two_h)) / two_h;
}

double hybrid_first_moment_gap(const Hurst& hurst, const Grid& grid, const HybridSpec& spec,
                               double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("hybrid_first_moment_gap: t must lie in [0, 1]");
    const double scaled_t = t * grid.n();
    const double k = std::round(scaled_t);
    if (std::abs(scaled_t - k) > 1e-9 * std::max(1.0, scaled_t)) {
        throw DomainError("hybrid_first_moment_gap: t must be a grid point");
    }
    if (spec.kappa < 1 || spec.kappa > grid.n()) throw ConfigError("hybrid scheme needs 1 <= kappa <= n");

    // Cells within kappa steps are exact; cell l >= kappa contributes
    // h^{H+1/2} (w_l - integral of u^{H-1/2} over [l, l+1]).
    const int steps = static_cast<int>(k);
    CompensatedSum sum;
    for (int ell = spec.kappa; ell < steps; ++ell) {
        sum += scaled_weight(hurst, spec.rule, ell) - kernel_integral(hurst, ell, ell + 1.0);
    }
    return std::pow(grid.h(), hurst.beta()) * sum.value();
}

}  // namespace fracweak
