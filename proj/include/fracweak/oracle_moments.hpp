#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

#include "fracweak/covariance.hpp"

namespace fracweak {

struct QuadConfig {
    double abs_tol = 1e-10;
    std::size_t max_subdivisions = std::size_t{1} << 16;
};

enum class MomentMethod { ClosedForm, Quadrature, GridSum };

std::string_view to_string(MomentMethod method);

/// A deterministic moment E[I^p] (continuous integral, no scheme) or E[(I')^p] for a scheme.
struct MomentReport {
    std::optional<SchemeSpec> scheme;
    int order = 0;
    double value = 0.0;
    MomentMethod method = MomentMethod::ClosedForm;
    double est_abs_error = 0.0;

    bool continuous() const noexcept { return !scheme.has_value(); }
};

/// E[I^2] = 1/(2H(2H+1)) for I = integral of W_t dW_t.
double second_moment_continuous(const Hurst& hurst);

/// E[(I')^2] = h * sum of the scheme's variances at t_0..t_{n-1}.
double second_moment_discrete(const SchemeSpec& scheme);

/// E[I^3] as 6 times the integral over r < s < t of K(t,s) K(t,r) K(s,r), by iterated
/// adaptive quadrature (t outermost, r innermost). Results are cached per (H, config).
MomentReport third_moment_continuous(const Hurst& hurst, const QuadConfig& cfg = {});

/// The same triple integral with the two inner variables swapped (s innermost).
MomentReport third_moment_continuous_swapped(const Hurst& hurst, const QuadConfig& cfg = {});

/// E[(I')^3] = 6h sum over j < k of C_sch(t_j, t_k) M(k, j), M the cell first moment of the kernel.
MomentReport third_moment_discrete(const SchemeSpec& scheme);

enum class OraclePhi { Quadratic, CubicOverSix };

struct WeakErrorValue {
    double value = 0.0;
    double est_abs_error = 0.0;
};

/// E[Phi(I)] - E[Phi(I')] for f = identity.
double weak_error_oracle(OraclePhi phi, const SchemeSpec& scheme, const QuadConfig& cfg = {});
WeakErrorValue weak_error_oracle_report(OraclePhi phi, const SchemeSpec& scheme, const QuadConfig& cfg = {});

/// E[(I - I')^2]^{1/2} for f = identity.
double strong_error_l2(const SchemeSpec& scheme);

}  // namespace fracweak
