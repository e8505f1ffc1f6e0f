#include "run_cli.hpp"

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "fracweak/cli.hpp"
#include "fracweak/errors.hpp"

namespace fracweak {

namespace {

struct Option {
    const char* flag;
    const char* key;
    const char* help;
};

const Option kOptions[] = {
    {"--hurst", "hurst", "Hurst indices, comma list in (0, 1/2)"},
    {"--grid", "grid", "grid ladder: a:b:x2 doubling, or a comma list"},
    {"--scheme", "scheme", "exact, hybrid, or both"},
    {"--rule", "rule", "hybrid weight rules: left, mid, mse, mm"},
    {"--kappa", "kappa", "hybrid power-cell counts, comma list"},
    {"--phi", "phi", "test function: quad, cubic6, poly:c0,c1,..."},
    {"--f", "f", "integrand: id, expvol:eta, const:c"},
    {"--method", "method", "oracle, mc or coupled"},
    {"--paths", "paths", "MC paths per batch"},
    {"--batches", "batches", "MC batches"},
    {"--seed", "seed", "MC seed"},
    {"--rho", "rho", "spot-vol correlation for price"},
    {"--spot", "spot", "spot for price"},
    {"--strike", "strike", "strike for price"},
    {"--tilde-c", "tilde_c", "constant of the exact-scheme error for the crossover"},
    {"--output,-o", "output", "output CSV path, - for stdout"},
    {"--dump-cov", "dump_cov", "directory for binary covariance dumps, one per cell"},
};

std::string read_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ConfigError("cannot read config file " + path);
    std::ostringstream text;
    text << file.rdbuf();
    return text.str();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Weak and strong discretization errors of rough-volatility integrals", "fracweak"};
    app.set_version_flag("--version", FRACWEAK_VERSION);
    app.require_subcommand(0, 1);
    app.fallthrough();

    std::vector<std::pair<std::string, std::string>> given;
    for (const Option& o : kOptions) {
        const std::string key = o.key;
        app.add_option_function<std::string>(
            o.flag, [&given, key](const std::string& v) { given.emplace_back(key, v); }, o.help);
    }
    app.add_flag_function(
        "--antithetic", [&given](std::int64_t) { given.emplace_back("antithetic", "true"); },
        "pair each MC draw with its negation");
    std::string config_path;
    app.add_option("--config", config_path, "config file (key = value lines, or a CSV written by fracweak); overrides flags");

    std::string figure;
    std::vector<CLI::App*> commands{
        app.add_subcommand("weak-error", "E Phi(I) - E Phi(I') ladders"),
        app.add_subcommand("strong-error", "L2 error ladders"),
        app.add_subcommand("constants", "series constants, leading constant and crossover n"),
        app.add_subcommand("price", "Romano-Touzi call price ladders"),
        app.add_subcommand("figures", "canned figure runs: CSV plus gnuplot script"),
    };
    commands.back()->add_option("which", figure, "fig1, fig2 or fig3")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg;
        std::string command;
        for (CLI::App* sub : commands) {
            if (sub->parsed()) command = sub->get_name();
        }
        if (command.empty() && config_path.empty()) {
            err << app.help();
            return 2;
        }
        if (!command.empty()) cfg.set("command", command);
        if (!figure.empty()) cfg.set("figure", figure);
        for (const auto& [key, value] : given) cfg.set(key, value);
        if (!config_path.empty()) cfg.apply_text(read_file(config_path));
        run_command(cfg, out);
        return 0;
    } catch (const std::exception& e) {
        err << "fracweak: error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

}  // namespace fracweak
