#include "fracweak/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "fracweak/covariance.hpp"
#include "fracweak/errors.hpp"
#include "fracweak/oracle_moments.hpp"
#include "fracweak/parallel.hpp"

namespace fracweak {

namespace {

constexpr const char* kConfigPrefix = "# config: ";

const std::set<std::string> kCommands{"weak-error", "strong-error", "constants", "price", "figures"};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    for (;;) {
        const auto pos = s.find(sep);
        out.push_back(trim(s.substr(0, pos)));
        if (pos == std::string_view::npos) break;
        s.remove_prefix(pos + 1);
    }
    return out;
}

double parse_double(std::string_view key, std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(x)) {
        throw ConfigError(std::string(key) + ": not a finite number: '" + std::string(text) + "'");
    }
    return x;
}

template <class Int>
Int parse_integer(std::string_view key, std::string_view text) {
    text = trim(text);
    Int x{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError(std::string(key) + ": not an integer: '" + std::string(text) + "'");
    }
    return x;
}

bool parse_bool(std::string_view key, std::string_view text) {
    text = trim(text);
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(text) + "'");
}

template <class T, class F>
std::string join(const std::vector<T>& items, F format) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) out += ',';
        out += format(items[i]);
    }
    return out;
}

std::string normalize_phi(std::string_view text) {
    text = trim(text);
    if (text == "quad" || text == "quadratic" || text == "x2") return "quad";
    if (text == "cubic6" || text == "cubic" || text == "x3/6") return "cubic6";
    if (text.substr(0, 5) == "poly:") {
        std::vector<double> coeffs;
        for (auto c : split(text.substr(5), ',')) coeffs.push_back(parse_double("phi", c));
        if (coeffs.empty() || coeffs.size() > 9) throw ConfigError("phi: poly takes 1 to 9 coefficients");
        return "poly:" + join(coeffs, format_double);
    }
    throw ConfigError("phi: expected quad, cubic6 or poly:c0,c1,..., got '" + std::string(text) + "'");
}

std::string normalize_f(std::string_view text) {
    text = trim(text);
    if (text == "id" || text == "identity") return "id";
    if (text.substr(0, 7) == "expvol:") return "expvol:" + format_double(parse_double("f", text.substr(7)));
    if (text.substr(0, 6) == "const:") return "const:" + format_double(parse_double("f", text.substr(6)));
    throw ConfigError("f: expected id, expvol:eta or const:c, got '" + std::string(text) + "'");
}

std::string normalize_key(std::string_view key) {
    std::string k(trim(key));
    std::replace(k.begin(), k.end(), '-', '_');
    return k;
}

std::vector<std::pair<std::string, std::string>> config_lines(std::string_view text) {
    std::vector<std::string_view> lines = split(text, '\n');
    const bool embedded =
        std::any_of(lines.begin(), lines.end(), [](std::string_view l) { return l.substr(0, 9) == "# config:"; });
    std::vector<std::pair<std::string, std::string>> out;
    for (std::string_view line : lines) {
        if (embedded) {
            if (line.substr(0, 9) != "# config:") continue;
            line = trim(line.substr(9));
        } else {
            const auto hash = line.find('#');
            line = trim(line.substr(0, hash));
            if (line.empty()) continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError("config line without '=': '" + std::string(line) + "'");
        out.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    }
    return out;
}

struct Series {
    std::string scheme;
    std::string rule;
    int kappa = 0;
    double hurst = 0.0;
    std::vector<SchemeSpec> cells;
};

std::vector<Series> build_series(const ExperimentConfig& cfg) {
    std::vector<Series> out;
    auto add = [&](const std::string& scheme, std::optional<HybridSpec> spec) {
        for (double h : cfg.hurst) {
            const Hurst hurst(h);
            Series s{scheme, spec ? std::string(to_string(spec->rule)) : "-", spec ? spec->kappa : 0, h, {}};
            for (int n : cfg.grid) {
                s.cells.push_back(spec ? SchemeSpec::hybrid(hurst, Grid(n), *spec) : SchemeSpec::exact(hurst, Grid(n)));
            }
            out.push_back(std::move(s));
        }
    };
    for (const auto& scheme : cfg.schemes) {
        if (scheme == "exact") {
            add(scheme, std::nullopt);
        } else {
            for (WeightRule rule : cfg.rules) {
                for (int kappa : cfg.kappas) add(scheme, HybridSpec{kappa, rule});
            }
        }
    }
    return out;
}

std::string cell_label(const SchemeSpec& s) {
    std::string label = s.family();
    if (!s.is_exact()) label += "_" + s.rule_name() + "_k" + std::to_string(s.kappa());
    return label + "_H" + format_double(s.hurst().value()) + "_n" + std::to_string(s.grid().n());
}

void dump_bundle(const ExperimentConfig& cfg, const SchemeSpec& scheme) {
    if (cfg.dump_cov.empty()) return;
    std::filesystem::create_directories(cfg.dump_cov);
    const auto path = std::filesystem::path(cfg.dump_cov) / (cell_label(scheme) + ".fwcv");
    std::ofstream file(path, std::ios::binary);
    if (!file) throw ConfigError("cannot write covariance dump " + path.string());
    write_bundle(file, assemble(scheme));
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

ResultRow row_for(const Series& s, int n, const ExperimentConfig& cfg, const std::string& phi) {
    ResultRow r;
    r.scheme = s.scheme;
    r.rule = s.rule;
    r.kappa = s.kappa;
    r.hurst = s.hurst;
    r.n = n;
    r.phi = phi;
    r.f = cfg.f;
    r.method = cfg.method;
    return r;
}

// Runs cell(series, index) over every cell, in parallel when `parallel_cells`. Rows come back
// in series order, n ascending within a series.
template <class Cell>
ExperimentResult run_cells(const ExperimentConfig& cfg, const std::vector<Series>& series, bool parallel_cells,
                           Cell cell) {
    std::vector<std::pair<std::size_t, std::size_t>> index;
    for (std::size_t i = 0; i < series.size(); ++i) {
        for (std::size_t j = 0; j < series[i].cells.size(); ++j) index.emplace_back(i, j);
    }
    ExperimentResult result;
    result.rows.resize(index.size());
    parallel_for(
        index.size(),
        [&](std::size_t k) {
            const auto [i, j] = index[k];
            const auto start = std::chrono::steady_clock::now();
            dump_bundle(cfg, series[i].cells[j]);
            result.rows[k] = cell(series[i], j);
            result.rows[k].runtime_ms = elapsed_ms(start);
        },
        parallel_cells ? 0 : 1);
    return result;
}

void append_fits(ExperimentResult& result, const std::vector<Series>& series) {
    std::size_t k = 0;
    for (const auto& s : series) {
        std::vector<LadderPoint> ladder;
        const ResultRow* first = &result.rows[k];
        for (std::size_t j = 0; j < s.cells.size(); ++j, ++k) {
            const ResultRow& r = result.rows[k];
            ladder.push_back({r.n, std::abs(r.error_vs_reference.value_or(0.0)), r.stderr.value_or(0.0)});
        }
        ResultRow fit = *first;
        fit.method = "fit";
        fit.n = 0;
        fit.value.reset();
        fit.error_vs_reference.reset();
        fit.stderr.reset();
        fit.jitter_used = 0.0;
        fit.runtime_ms = 0.0;
        try {
            const RateFit rf = fit_rate(ladder);
            fit.n = static_cast<int>(rf.ladder.size());
            fit.value = rf.rate();
            fit.error_vs_reference = rf.constant();
            fit.stderr = rf.r_squared;
        } catch (const InsufficientDataError& e) {
            result.notes.push_back(fit.scheme + " " + fit.rule + " kappa=" + std::to_string(fit.kappa) +
                                   " H=" + format_double(fit.hurst) + ": no fit (" + e.what() + ")");
        }
        result.fits.push_back(std::move(fit));
    }
}

OraclePhi oracle_phi(const std::string& phi) {
    return phi == "quad" ? OraclePhi::Quadratic : OraclePhi::CubicOverSix;
}

double continuous_reference(const std::string& phi, const Hurst& hurst) {
    if (phi == "quad") return second_moment_continuous(hurst);
    return third_moment_continuous(hurst).value / 6.0;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + '"';
}

std::string opt(const std::optional<double>& x) { return x ? format_double(*x) : std::string(); }

std::string fixed_ms(double ms) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", ms);
    return buf;
}

void write_header(std::ostream& out, const ExperimentConfig& cfg) {
    out << "# fracweak " << FRACWEAK_VERSION << '\n';
    std::istringstream lines(cfg.canonical());
    for (std::string line; std::getline(lines, line);) out << kConfigPrefix << line << '\n';
    out << "# seed: " << cfg.seed << '\n';
}

std::ofstream open_output(const std::string& path) {
    std::ofstream file(path);
    if (!file) throw ConfigError("cannot open output file " + path);
    return file;
}

}  // namespace

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

std::vector<int> parse_grid_ladder(std::string_view text) {
    std::set<int> values;
    for (std::string_view item : split(text, ',')) {
        if (item.empty()) continue;
        if (item.find(':') == std::string_view::npos) {
            const int n = parse_integer<int>("grid", item);
            if (n < 1) throw ConfigError("grid: sizes must be positive");
            values.insert(n);
            continue;
        }
        const auto parts = split(item, ':');
        if (parts.size() != 3 || parts[2].empty() || parts[2].front() != 'x') {
            throw ConfigError("grid: expected a:b:xk, got '" + std::string(item) + "'");
        }
        const int a = parse_integer<int>("grid", parts[0]);
        const int b = parse_integer<int>("grid", parts[1]);
        const int k = parse_integer<int>("grid", parts[2].substr(1));
        if (a < 1 || b < a || k < 2) throw ConfigError("grid: need 1 <= a <= b and factor >= 2 in '" + std::string(item) + "'");
        for (long long n = a; n <= b; n *= k) values.insert(static_cast<int>(n));
    }
    if (values.empty()) throw ConfigError("grid: empty ladder");
    return {values.begin(), values.end()};
}

void ExperimentConfig::set(std::string_view key_text, std::string_view value_text) {
    const std::string key = normalize_key(key_text);
    const std::string_view value = trim(value_text);
    if (key == "command") {
        if (!kCommands.count(std::string(value))) throw ConfigError("unknown command '" + std::string(value) + "'");
        command = value;
    } else if (key == "hurst") {
        std::vector<double> hs;
        for (auto item : split(value, ',')) {
            if (!item.empty()) hs.push_back(parse_double(key, item));
        }
        if (hs.empty()) throw ConfigError("hurst: empty list");
        hurst = hs;
    } else if (key == "grid") {
        grid = parse_grid_ladder(value);
    } else if (key == "scheme") {
        std::vector<std::string> ss;
        for (auto item : split(value, ',')) {
            if (item == "exact" || item == "cholesky") ss.emplace_back("exact");
            else if (item == "hybrid") ss.emplace_back("hybrid");
            else throw ConfigError("scheme: expected exact or hybrid, got '" + std::string(item) + "'");
        }
        schemes = ss;
    } else if (key == "rule") {
        std::vector<WeightRule> rs;
        for (auto item : split(value, ',')) rs.push_back(parse_weight_rule(item));
        rules = rs;
    } else if (key == "kappa") {
        std::vector<int> ks;
        for (auto item : split(value, ',')) {
            const int k = parse_integer<int>(key, item);
            if (k < 1) throw ConfigError("kappa: must be at least 1");
            ks.push_back(k);
        }
        kappas = ks;
    } else if (key == "phi") {
        phi = normalize_phi(value);
    } else if (key == "f") {
        f = normalize_f(value);
    } else if (key == "method") {
        if (value != "oracle" && value != "mc" && value != "coupled") {
            throw ConfigError("method: expected oracle, mc or coupled, got '" + std::string(value) + "'");
        }
        method = value;
    } else if (key == "paths") {
        paths = parse_integer<int>(key, value);
    } else if (key == "batches") {
        batches = parse_integer<int>(key, value);
    } else if (key == "antithetic") {
        antithetic = parse_bool(key, value);
    } else if (key == "seed") {
        seed = parse_integer<std::uint64_t>(key, value);
    } else if (key == "rho") {
        rho = parse_double(key, value);
    } else if (key == "spot") {
        spot = parse_double(key, value);
    } else if (key == "strike") {
        strike = parse_double(key, value);
    } else if (key == "tilde_c") {
        tilde_c = parse_double(key, value);
    } else if (key == "figure") {
        figure = value;
    } else if (key == "output") {
        output = value;
    } else if (key == "dump_cov") {
        dump_cov = value;
    } else {
        throw ConfigError("unknown config key '" + std::string(key_text) + "'");
    }
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream out;
    out << "command=" << command << '\n'
        << "hurst=" << join(hurst, format_double) << '\n'
        << "grid=" << join(grid, [](int n) { return std::to_string(n); }) << '\n'
        << "scheme=" << join(schemes, [](const std::string& s) { return s; }) << '\n'
        << "rule=" << join(rules, [](WeightRule r) { return std::string(to_string(r)); }) << '\n'
        << "kappa=" << join(kappas, [](int k) { return std::to_string(k); }) << '\n'
        << "phi=" << phi << '\n'
        << "f=" << f << '\n'
        << "method=" << method << '\n'
        << "paths=" << paths << '\n'
        << "batches=" << batches << '\n'
        << "antithetic=" << (antithetic ? "true" : "false") << '\n'
        << "seed=" << seed << '\n'
        << "rho=" << format_double(rho) << '\n'
        << "spot=" << format_double(spot) << '\n'
        << "strike=" << format_double(strike) << '\n'
        << "tilde_c=" << format_double(tilde_c) << '\n'
        << "figure=" << figure << '\n';
    return out.str();
}

void ExperimentConfig::apply_text(std::string_view text) {
    for (const auto& [key, value] : config_lines(text)) set(key, value);
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
    ExperimentConfig cfg;
    cfg.apply_text(text);
    return cfg;
}

bool ExperimentConfig::oracle_supported() const { return f == "id" && (phi == "quad" || phi == "cubic6"); }

void ExperimentConfig::validate() const {
    if (!kCommands.count(command)) throw ConfigError("unknown command '" + command + "'");
    if (grid.empty()) throw ConfigError("grid: empty ladder");
    if (hurst.empty()) throw ConfigError("hurst: empty list");
    for (double h : hurst) static_cast<void>(Hurst(h));
    if (schemes.empty() || rules.empty() || kappas.empty()) throw ConfigError("scheme, rule and kappa lists must be non-empty");
    if (command == "weak-error" && method == "oracle" && !oracle_supported()) {
        throw ConfigError("the oracle covers only f = id with phi = quad or cubic6 (got f = " + f + ", phi = " + phi +
                          "); use --method mc");
    }
    if (command == "strong-error" && (f != "id" || method != "oracle")) {
        throw ConfigError("strong-error is computed by the oracle for f = id only");
    }
    if (command == "price" && !(rho >= -1.0 && rho <= 1.0)) throw ConfigError("rho must lie in [-1, 1]");
    if (command == "price" && !(spot > 0.0 && strike > 0.0)) throw ConfigError("spot and strike must be positive");
    if (command == "constants" && !(tilde_c > 0.0)) throw ConfigError("tilde_c must be positive");
    if (command == "figures") figure_config(figure);
    const bool uses_mc = command == "price" || (command == "weak-error" && method != "oracle");
    if (uses_mc) mc().validate();
}

MCConfig ExperimentConfig::mc() const {
    MCConfig m;
    m.paths_per_batch = paths;
    m.batches = batches;
    m.seed = seed;
    m.antithetic = antithetic;
    return m;
}

TestFn ExperimentConfig::test_fn() const {
    if (phi == "quad") return TestFn::quadratic();
    if (phi == "cubic6") return TestFn::cubic_over_six();
    std::vector<double> coeffs;
    for (auto c : split(std::string_view(phi).substr(5), ',')) coeffs.push_back(parse_double("phi", c));
    return TestFn::polynomial(coeffs);
}

IntegrandFn ExperimentConfig::integrand() const {
    if (f == "id") return IntegrandFn::identity();
    if (f.rfind("expvol:", 0) == 0) return IntegrandFn::exp_vol(parse_double("f", std::string_view(f).substr(7)));
    const double c = parse_double("f", std::string_view(f).substr(6));
    return IntegrandFn::user([c](double) { return c; }, f);
}

ExperimentResult run_weak_error(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto series = build_series(cfg);
    std::map<double, double> reference;
    if (cfg.oracle_supported()) {
        for (double h : cfg.hurst) reference[h] = continuous_reference(cfg.phi, Hurst(h));
    }
    const TestFn phi = cfg.test_fn();
    const IntegrandFn f = cfg.integrand();
    const MCConfig mc = cfg.mc();

    ExperimentResult result;
    if (cfg.method == "oracle") {
        result = run_cells(cfg, series, true, [&](const Series& s, std::size_t j) {
            const SchemeSpec& scheme = s.cells[j];
            ResultRow r = row_for(s, scheme.grid().n(), cfg, cfg.phi);
            const double disc = cfg.phi == "quad" ? second_moment_discrete(scheme)
                                                  : third_moment_discrete(scheme).value / 6.0;
            const WeakErrorValue err = weak_error_oracle_report(oracle_phi(cfg.phi), scheme);
            r.value = disc;
            r.error_vs_reference = err.value;
            r.stderr = err.est_abs_error;
            return r;
        });
    } else if (cfg.method == "mc") {
        result = run_cells(cfg, series, false, [&](const Series& s, std::size_t j) {
            const SchemeSpec& scheme = s.cells[j];
            ResultRow r = row_for(s, scheme.grid().n(), cfg, cfg.phi);
            const MCEstimate est = estimate(phi, f, scheme, mc);
            r.value = est.mean;
            r.stderr = est.stderr;
            r.jitter_used = est.jitter_used;
            return r;
        });
        std::size_t k = 0;
        for (const auto& s : series) {
            const auto it = reference.find(s.hurst);
            const double ref = it != reference.end() ? it->second : *result.rows[k + s.cells.size() - 1].value;
            for (std::size_t j = 0; j < s.cells.size(); ++j, ++k) result.rows[k].error_vs_reference = ref - *result.rows[k].value;
        }
        if (!cfg.oracle_supported()) result.notes.push_back("reference: largest n in each series");
    } else {
        result = run_cells(cfg, series, false, [&](const Series& s, std::size_t j) {
            const SchemeSpec& coarse = s.cells[j];
            ResultRow r = row_for(s, coarse.grid().n(), cfg, cfg.phi);
            const MCEstimate est = estimate_weak_error_coupled(phi, f, coarse, s.cells.back(), mc);
            r.value = est.mean;
            r.error_vs_reference = est.mean;
            r.stderr = est.stderr;
            r.jitter_used = est.jitter_used;
            return r;
        });
        result.notes.push_back("reference: coupled to the largest n in each series");
    }
    append_fits(result, series);
    return result;
}

ExperimentResult run_strong_error(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto series = build_series(cfg);
    ExperimentResult result = run_cells(cfg, series, true, [&](const Series& s, std::size_t j) {
        const SchemeSpec& scheme = s.cells[j];
        ResultRow r = row_for(s, scheme.grid().n(), cfg, "-");
        const double e = strong_error_l2(scheme);
        r.value = e;
        r.error_vs_reference = e;
        r.stderr = 0.0;
        return r;
    });
    append_fits(result, series);
    return result;
}

ExperimentResult run_price(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto series = build_series(cfg);
    const IntegrandFn f = cfg.integrand();
    const MCConfig mc = cfg.mc();
    ExperimentResult result = run_cells(cfg, series, false, [&](const Series& s, std::size_t j) {
        const SchemeSpec& scheme = s.cells[j];
        ResultRow r = row_for(s, scheme.grid().n(), cfg, "call");
        r.method = "mc";
        const MCEstimate est = price_call_romano_touzi(f, scheme, cfg.rho, cfg.spot, cfg.strike, mc);
        r.value = est.mean;
        r.stderr = est.stderr;
        r.jitter_used = est.jitter_used;
        return r;
    });
    std::optional<double> closed_form;
    if (cfg.f.rfind("const:", 0) == 0) {
        const double c = parse_double("f", std::string_view(cfg.f).substr(6));
        closed_form = black_scholes_call(cfg.spot, cfg.strike, c * c);
        result.notes.push_back("reference: Black-Scholes closed form");
    } else {
        result.notes.push_back("reference: largest n in each series");
    }
    std::size_t k = 0;
    for (const auto& s : series) {
        const double ref = closed_form ? *closed_form : *result.rows[k + s.cells.size() - 1].value;
        for (std::size_t j = 0; j < s.cells.size(); ++j, ++k) result.rows[k].error_vs_reference = ref - *result.rows[k].value;
    }
    append_fits(result, series);
    return result;
}

std::vector<ConstantsRow> run_constants(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<std::optional<RateFit>> fits(cfg.hurst.size());
    std::vector<double> fit_ms(cfg.hurst.size());
    parallel_for(cfg.hurst.size(), [&](std::size_t i) {
        const auto start = std::chrono::steady_clock::now();
        const Hurst hurst(cfg.hurst[i]);
        std::vector<LadderPoint> ladder;
        for (int n : cfg.grid) {
            const WeakErrorValue e = weak_error_oracle_report(OraclePhi::CubicOverSix, SchemeSpec::exact(hurst, Grid(n)));
            ladder.push_back({n, std::abs(e.value), e.est_abs_error});
        }
        try {
            fits[i] = fit_rate(ladder);
        } catch (const InsufficientDataError&) {
        }
        fit_ms[i] = elapsed_ms(start);
    });

    std::vector<ConstantsRow> rows(cfg.kappas.size() * cfg.hurst.size());
    parallel_for(rows.size(), [&](std::size_t k) {
        const auto start = std::chrono::steady_clock::now();
        const std::size_t i = k % cfg.hurst.size();
        const Hurst hurst(cfg.hurst[i]);
        ConstantsRow& r = rows[k];
        r.kappa = cfg.kappas[k / cfg.hurst.size()];
        r.hurst = hurst.value();
        r.c = series_constant_C(r.kappa, hurst);
        r.c_kappa_h = series_constant_C_kappa_H(r.kappa, hurst);
        r.hat_c = leading_constant_hat_C(r.kappa, hurst);
        r.tilde_c = cfg.tilde_c;
        r.crossover = crossover_n(r.hat_c, r.tilde_c, hurst);
        r.exact_cubic_fit = fits[i];
        r.runtime_ms = elapsed_ms(start) + fit_ms[i];
    });
    return rows;
}

ExperimentConfig figure_config(std::string_view which) {
    ExperimentConfig cfg;
    cfg.command = "weak-error";
    cfg.method = "oracle";
    cfg.f = "id";
    cfg.grid = parse_grid_ladder("16:4096:x2");
    cfg.rules = {WeightRule::LeftPoint, WeightRule::MidPoint, WeightRule::MseOptimal, WeightRule::MomentMatch};
    cfg.kappas = {1};
    if (which == "fig1") {
        cfg.phi = "cubic6";
        cfg.schemes = {"exact"};
        cfg.rules = {WeightRule::MomentMatch};
        cfg.hurst = {0.05, 0.1, 0.25, 0.4};
    } else if (which == "fig2") {
        cfg.phi = "quad";
        cfg.schemes = {"exact", "hybrid"};
        cfg.hurst = {0.02};
    } else if (which == "fig3") {
        cfg.phi = "cubic6";
        cfg.schemes = {"exact", "hybrid"};
        cfg.hurst = {0.15};
    } else {
        throw ConfigError("unknown figure '" + std::string(which) + "' (expected fig1, fig2 or fig3)");
    }
    return cfg;
}

std::string gnuplot_script(const ExperimentConfig& cfg, const ExperimentResult& result, const std::string& csv_path) {
    std::ostringstream out;
    const std::filesystem::path png = std::filesystem::path(csv_path).replace_extension(".png");
    out << "set datafile separator \",\"\n"
        << "set terminal pngcairo size 900,600\n"
        << "set output \"" << png.string() << "\"\n"
        << "set logscale xy\n"
        << "set format y \"10^{%L}\"\n"
        << "set xlabel \"n\"\n"
        << "set ylabel \"|E " << cfg.phi << "(I) - E " << cfg.phi << "(I')|\"\n"
        << "set key outside right\n"
        << "plot \\\n";
    for (std::size_t i = 0; i < result.fits.size(); ++i) {
        const ResultRow& fit = result.fits[i];
        std::string title = fit.scheme == "exact" ? "exact" : fit.scheme + " " + fit.rule + " kappa=" + std::to_string(fit.kappa);
        title += " H=" + format_double(fit.hurst);
        if (fit.value) {
            char rate[32];
            std::snprintf(rate, sizeof rate, "%.3f", *fit.value);
            title += std::string(" (rate ") + rate + ")";
        }
        out << "  \"" << csv_path << "\" using ((strcol(1) eq \"" << fit.scheme << "\" && strcol(2) eq \"" << fit.rule
            << "\" && strcol(3) eq \"" << fit.kappa << "\" && strcol(4) eq \"" << format_double(fit.hurst)
            << "\" && strcol(8) ne \"fit\") ? $5 : NaN):(abs($10)) with linespoints title \"" << title << "\"";
        out << (i + 1 < result.fits.size() ? ", \\\n" : "\n");
    }
    return out.str();
}

void write_csv(std::ostream& out, const ExperimentConfig& cfg, const ExperimentResult& result) {
    write_header(out, cfg);
    for (const auto& note : result.notes) out << "# note: " << note << '\n';
    out << "scheme,rule,kappa,H,n,phi,f,method,value,error_vs_reference,stderr,jitter_used,runtime_ms\n";
    auto emit = [&](const ResultRow& r) {
        out << r.scheme << ',' << r.rule << ',' << r.kappa << ',' << format_double(r.hurst) << ',' << r.n << ','
            << csv_field(r.phi) << ',' << csv_field(r.f) << ',' << r.method << ',' << opt(r.value) << ',' << opt(r.error_vs_reference)
            << ',' << opt(r.stderr) << ',' << format_double(r.jitter_used) << ',' << fixed_ms(r.runtime_ms) << '\n';
    };
    for (const auto& r : result.rows) emit(r);
    for (const auto& r : result.fits) emit(r);
}

void write_constants_csv(std::ostream& out, const ExperimentConfig& cfg, const std::vector<ConstantsRow>& rows) {
    write_header(out, cfg);
    out << "kappa,H,C,C_tail_bound,C_kappa_H,C_kappa_H_tail_bound,hat_C,tilde_C,crossover_n,"
           "exact_cubic_rate,exact_cubic_constant,runtime_ms\n";
    for (const auto& r : rows) {
        std::optional<double> rate;
        std::optional<double> constant;
        if (r.exact_cubic_fit) {
            rate = r.exact_cubic_fit->rate();
            constant = r.exact_cubic_fit->constant();
        }
        out << r.kappa << ',' << format_double(r.hurst) << ',' << format_double(r.c.value) << ','
            << format_double(r.c.tail_bound) << ',' << format_double(r.c_kappa_h.value) << ','
            << format_double(r.c_kappa_h.tail_bound) << ',' << format_double(r.hat_c) << ','
            << format_double(r.tilde_c) << ',' << format_double(r.crossover) << ',' << opt(rate) << ','
            << opt(constant) << ',' << fixed_ms(r.runtime_ms) << '\n';
    }
}

void run_command(const ExperimentConfig& cfg, std::ostream& out) {
    cfg.validate();
    if (cfg.command == "figures") {
        ExperimentConfig fig = figure_config(cfg.figure);
        fig.output = cfg.output == "-" ? cfg.figure + ".csv" : cfg.output;
        fig.dump_cov = cfg.dump_cov;
        const ExperimentResult result = run_weak_error(fig);
        std::ofstream csv = open_output(fig.output);
        write_csv(csv, fig, result);
        const std::string script_path = std::filesystem::path(fig.output).replace_extension(".gp").string();
        std::ofstream script = open_output(script_path);
        script << gnuplot_script(fig, result, fig.output);
        out << "wrote " << fig.output << " and " << script_path << '\n';
        return;
    }
    std::ofstream file;
    if (cfg.output != "-") file = open_output(cfg.output);
    std::ostream& sink = cfg.output == "-" ? out : file;
    if (cfg.command == "constants") {
        write_constants_csv(sink, cfg, run_constants(cfg));
    } else if (cfg.command == "strong-error") {
        write_csv(sink, cfg, run_strong_error(cfg));
    } else if (cfg.command == "price") {
        write_csv(sink, cfg, run_price(cfg));
    } else {
        write_csv(sink, cfg, run_weak_error(cfg));
    }
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
        dynamic_cast<const InsufficientDataError*>(&e)) {
        return 2;
    }
    if (dynamic_cast<const FactorizationError*>(&e) || dynamic_cast<const AccuracyError*>(&e)) return 3;
    if (dynamic_cast<const NonFiniteError*>(&e)) return 4;
    return 1;
}

}  // namespace fracweak
