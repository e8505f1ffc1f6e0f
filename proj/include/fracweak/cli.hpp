#pragma once

#include <cstdint>
#include <exception>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fracweak/grid_kernel.hpp"
#include "fracweak/montecarlo.hpp"
#include "fracweak/rates_constants.hpp"

namespace fracweak {

/// Everything a run depends on. Output destinations (output, dump_cov) are not part of the
/// canonical text, so a run can be repeated into another file.
struct ExperimentConfig {
    std::string command = "weak-error";
    std::vector<double> hurst{0.1};
    std::vector<int> grid{16, 32, 64, 128, 256, 512, 1024};
    std::vector<std::string> schemes{"exact"};
    std::vector<WeightRule> rules{WeightRule::MomentMatch};
    std::vector<int> kappas{1};
    std::string phi = "cubic6";
    std::string f = "id";
    std::string method = "oracle";
    int paths = 4096;
    int batches = 64;
    bool antithetic = false;
    std::uint64_t seed = 1;
    double rho = -0.7;
    double spot = 1.0;
    double strike = 1.0;
    double tilde_c = 3.0;
    std::string figure;

    std::string output = "-";
    std::string dump_cov;

    /// Sets one field from its textual form; throws ConfigError on unknown keys or bad values.
    void set(std::string_view key, std::string_view value);
    /// One "key=value" line per field, fixed order, normalized values.
    std::string canonical() const;
    /// Reads "key = value" lines ('#' comments). Text containing "# config: " lines (a CSV written
    /// by this tool) is read from those lines only.
    static ExperimentConfig parse(std::string_view text);
    /// Applies config text on top of the current values.
    void apply_text(std::string_view text);
    void validate() const;

    MCConfig mc() const;
    TestFn test_fn() const;
    IntegrandFn integrand() const;
    /// Oracle support: f = id and phi in {quad, cubic6}.
    bool oracle_supported() const;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// "a:b:x2" (a, 2a, 4a, ... up to b), "a:b:xk", or a comma list; entries may be mixed.
std::vector<int> parse_grid_ladder(std::string_view text);

/// Shortest text that reads back to the same double.
std::string format_double(double x);

struct ResultRow {
    std::string scheme;
    std::string rule;
    int kappa = 0;
    double hurst = 0.0;
    int n = 0;
    std::string phi;
    std::string f;
    std::string method;
    std::optional<double> value;
    std::optional<double> error_vs_reference;
    std::optional<double> stderr;
    double jitter_used = 0.0;
    double runtime_ms = 0.0;
};

/// Rate-fit rows use method "fit": n is the number of points fitted, value the rate (minus the
/// slope), error_vs_reference the constant 10^intercept and stderr the R^2. Empty fields mean
/// too few usable points.
struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<ResultRow> fits;
    std::vector<std::string> notes;
};

struct ConstantsRow {
    int kappa = 0;
    double hurst = 0.0;
    SeriesValue c;
    SeriesValue c_kappa_h;
    double hat_c = 0.0;
    double tilde_c = 0.0;
    double crossover = 0.0;
    /// Rate fit of the exact-scheme cubic oracle ladder over the config's grid; empty when
    /// the ladder has too few usable points.
    std::optional<RateFit> exact_cubic_fit;
    double runtime_ms = 0.0;
};

ExperimentResult run_weak_error(const ExperimentConfig& cfg);
ExperimentResult run_strong_error(const ExperimentConfig& cfg);
ExperimentResult run_price(const ExperimentConfig& cfg);
std::vector<ConstantsRow> run_constants(const ExperimentConfig& cfg);

/// Canned weak-error configs for fig1, fig2, fig3; ConfigError for anything else.
ExperimentConfig figure_config(std::string_view which);
/// Log-log plot of |error_vs_reference| against n, one curve per series, fitted rates in the titles.
std::string gnuplot_script(const ExperimentConfig& cfg, const ExperimentResult& result, const std::string& csv_path);

void write_csv(std::ostream& out, const ExperimentConfig& cfg, const ExperimentResult& result);
void write_constants_csv(std::ostream& out, const ExperimentConfig& cfg, const std::vector<ConstantsRow>& rows);

/// Runs cfg.command. CSV goes to cfg.output, or to `out` when that is "-". The figures
/// command writes <output> and the plot script next to it.
void run_command(const ExperimentConfig& cfg, std::ostream& out);

/// 2 usage/config, 3 factorization/quadrature, 4 non-finite MC, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace fracweak
