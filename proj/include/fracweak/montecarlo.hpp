#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fracweak/covariance.hpp"

namespace fracweak {

/// The integrand f in the left-point sum of f(X_{t_k}) dW_k.
class IntegrandFn {
public:
    enum class Kind { Identity, ExpVol, User };

    static IntegrandFn identity();
    /// f(x) = exp(eta x).
    static IntegrandFn exp_vol(double eta);
    static IntegrandFn user(std::function<double(double)> fn, std::string name = "user");

    Kind kind() const noexcept { return kind_; }
    double eta() const noexcept { return eta_; }
    const std::string& name() const noexcept { return name_; }

    double operator()(double x) const;

private:
    IntegrandFn(Kind kind, double eta, std::function<double(double)> fn, std::string name);

    Kind kind_;
    double eta_ = 0.0;
    std::function<double(double)> fn_;
    std::string name_;
};

/// The test function Phi whose expectation is estimated.
class TestFn {
public:
    enum class Kind { Quadratic, CubicOverSix, Polynomial, User };

    static TestFn quadratic();
    static TestFn cubic_over_six();
    /// sum_i coeffs[i] x^i, degree at most 8.
    static TestFn polynomial(std::vector<double> coeffs);
    static TestFn user(std::function<double(double)> fn, std::string name = "user");

    Kind kind() const noexcept { return kind_; }
    const std::vector<double>& coeffs() const noexcept { return coeffs_; }
    const std::string& name() const noexcept { return name_; }

    double operator()(double x) const;

private:
    TestFn(Kind kind, std::vector<double> coeffs, std::function<double(double)> fn, std::string name);

    Kind kind_;
    std::vector<double> coeffs_;
    std::function<double(double)> fn_;
    std::string name_;
};

struct MCConfig {
    int paths_per_batch = 4096;
    int batches = 64;
    std::uint64_t seed = 20240101;
    bool antithetic = false;
    /// 0 means default_thread_count(). Results do not depend on this.
    int threads = 0;

    void validate() const;
};

struct MCEstimate {
    double mean = 0.0;
    /// Standard deviation of the batch means over sqrt(batches); zero for a single batch.
    double stderr = 0.0;
    std::size_t total_paths = 0;
    std::size_t nonfinite_paths = 0;
    /// Bias of the coarse reconstruction in coupled runs. Both coupled constructions sample
    /// the coarse scheme's law exactly, so this is 0.
    double coupling_bias = 0.0;
    /// Diagonal jitter added when factorizing the sampled covariance.
    double jitter_used = 0.0;
    MCConfig config;
};

/// Per path, the sum over k < n of f(X_{t_k}) dW_k with X_{t_0} = 0. Non-finite paths come
/// back as NaN; more than 0.1% of them throws NonFiniteError.
std::vector<double> discrete_integral(const PathBatch& paths, const IntegrandFn& f);

/// Batch-means estimate of E[Phi(I')] for the scheme's left-point integral I'.
MCEstimate estimate(const TestFn& phi, const IntegrandFn& f, const SchemeSpec& scheme, const MCConfig& cfg);

/// Batch-means estimate of E[Phi(I'_fine) - Phi(I'_coarse)] with both integrals built from the
/// same Brownian path. The fine grid size must be a multiple of the coarse one, and the two
/// schemes must agree in H and family (and in kappa and rule when hybrid).
///
/// Exact scheme: the coarse fBm values are the fine ones at coarse grid points.
/// Hybrid scheme: the coarse fBm is drawn jointly with the fine path from their exact joint
/// Gaussian law, which differs from a function of the fine increments on the power cells.
MCEstimate estimate_weak_error_coupled(const TestFn& phi, const IntegrandFn& f, const SchemeSpec& coarse,
                                       const SchemeSpec& fine, const MCConfig& cfg);

/// Black-Scholes call with zero rate and total variance `variance`; intrinsic value when variance <= 0.
double black_scholes_call(double spot, double strike, double variance);

/// Romano-Touzi conditional price: per path V = h sum f(X_{t_k})^2 and M = sum f(X_{t_k}) dW_k,
/// then C_BS(spot exp(rho M - rho^2 V / 2), strike, (1 - rho^2) V).
MCEstimate price_call_romano_touzi(const IntegrandFn& f, const SchemeSpec& scheme, double rho, double spot,
                                   double strike, const MCConfig& cfg);

}  // namespace fracweak
