// qrouter — command-line front end for the router simulator and analytics.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qrouter/experiment.hpp"

namespace {

std::optional<int> parse_cutoff_token(const std::string& token) {
    if (token == "none") return std::nullopt;
    std::size_t used = 0;
    const int value = std::stoi(token, &used);
    if (used != token.size()) throw std::invalid_argument("bad cutoff token: " + token);
    return value;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"simulator and analytics for a multiplexed multipartite quantum router"};
    app.set_version_flag("--version", std::string(qrouter::kVersion));
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> overrides;
    std::vector<std::string> cutoff_tokens;
    qrouter::ExperimentSpec spec;

    app.add_option("--config", config_path, "configuration file of 'key = value' lines");
    app.add_option("--set", overrides, "override one configuration key as key=value (repeatable)");
    app.add_option("--out", spec.output_dir, "output directory for CSV/JSON artifacts")
        ->capture_default_str();
    app.add_flag("--force", spec.force, "override the analytic dimension guard");
    app.add_flag("--quick", spec.quick, "reduced verification grids (verify only)");
    app.add_option("--threads", spec.threads, "worker threads for Monte Carlo ensembles")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    CLI::App* analytic = app.add_subcommand(
        "analytic-rate", "exact occupation-distribution evolution and router rate");
    CLI::App* simulate =
        app.add_subcommand("simulate", "Monte Carlo ensemble of protocol rounds");
    CLI::App* key_rate = app.add_subcommand(
        "key-rate", "simulate and evaluate QBERs and conference key rates");
    CLI::App* compare = app.add_subcommand(
        "compare-strategies", "run all matching strategies on paired random streams");
    CLI::App* sweep =
        app.add_subcommand("sweep-cutoff", "key rate across memory cutoff values");
    sweep->add_option("--cutoffs", cutoff_tokens,
                      "cutoff values to sweep: integers or 'none'")
        ->delimiter(',');
    CLI::App* verify = app.add_subcommand(
        "verify", "internal cross-checks against independent oracles; exit 3 on failure");
    verify->add_flag("--inject-lambda-fault", spec.inject_lambda_fault,
                     "test fixture: corrupt a closed-form eigenvalue so verify must fail");
    CLI::App* debug = app.add_subcommand(
        "debug-instance", "print the matching hypergraph for explicit slot occupations");
    std::vector<std::string> debug_bits;
    int debug_window = 0;
    debug->add_option("--bits", debug_bits,
                      "per-party 0/1 slot occupation strings, central party first")
        ->required();
    debug->add_option("--window", debug_window, "connection length limit w")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e), qrouter::kExitOk;
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e), qrouter::kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return qrouter::kExitUsage;
    }

    try {
        if (!config_path.empty()) spec.params = qrouter::load_config(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("--set expects key=value (got '" + kv + "')");
            qrouter::apply_setting(spec.params, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (!cutoff_tokens.empty()) {
            spec.cutoffs.clear();
            for (const auto& token : cutoff_tokens)
                spec.cutoffs.push_back(parse_cutoff_token(token));
        }
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return qrouter::kExitValidation;
    }

    try {
        if (app.got_subcommand(analytic)) return qrouter::cmd_analytic_rate(spec, std::cout);
        if (app.got_subcommand(simulate)) return qrouter::cmd_simulate(spec, std::cout);
        if (app.got_subcommand(key_rate)) return qrouter::cmd_key_rate(spec, std::cout);
        if (app.got_subcommand(compare)) return qrouter::cmd_compare_strategies(spec, std::cout);
        if (app.got_subcommand(sweep)) return qrouter::cmd_sweep_cutoff(spec, std::cout);
        if (app.got_subcommand(verify)) return qrouter::cmd_verify(spec, std::cout);
        if (app.got_subcommand(debug))
            return qrouter::cmd_debug_instance(debug_bits, debug_window, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return qrouter::kExitValidation;
    }
    return qrouter::kExitUsage;
}
