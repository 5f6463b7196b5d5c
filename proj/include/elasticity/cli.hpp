#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "elasticity/harness.hpp"
#include "elasticity/plot.hpp"

namespace elasticity {

inline constexpr std::uint64_t kDefaultMasterSeed = 2013;
inline constexpr int kDefaultInstances = 10;

inline std::vector<double> default_samples_grid() {
    return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
}

inline std::vector<double> default_snr_grid() { return {-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5}; }

/// Training length for SNR sweeps when none is given: 250 slots for sparse
/// populations, 475 for dense ones (N = 500).
inline long default_snr_samples(long n_consumers, double active_fraction) {
    const double ratio = active_fraction <= 0.25 ? 0.5 : 0.95;
    return std::lround(ratio * static_cast<double>(n_consumers));
}

namespace detail {

inline std::vector<double> parse_real_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::logic_error&) {
            used = 0;
        }
        if (used != item.size()) throw InvalidArgument("not a number: '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw InvalidArgument("empty list '" + text + "'");
    return out;
}

inline std::vector<Method> parse_method_list(const std::string& text) {
    std::vector<Method> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(parse_method(item));
    if (out.empty()) throw InvalidArgument("no methods given");
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Reads `key = value` lines ('#' starts a comment) as `--key value` tokens.
inline std::vector<std::string> config_tokens(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("--config", "cannot read '" + path.string() + "'");
    std::vector<std::string> tokens;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--config", path.string() + ":" + std::to_string(line_no) +
                                                      ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        std::replace(key.begin(), key.end(), '_', '-');
        if (value == "true" || value == "false") {
            if (value == "true") tokens.push_back("--" + key);
        } else {
            tokens.push_back("--" + key);
            tokens.push_back(value);
        }
    }
    return tokens;
}

// Config-file tokens go right after the subcommand so that flags given on the
// command line, parsed later, take precedence.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        std::size_t erase = 0;
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            erase = 2;
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            erase = 1;
        } else {
            continue;
        }
        args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i + erase));
        auto tokens = config_tokens(path);
        const std::size_t at = args.empty() ? 0 : 1;
        args.insert(args.begin() + static_cast<long>(at), tokens.begin(), tokens.end());
        break;
    }
    return args;
}

struct CliOptions {
    long n = 500;
    double active_fraction = 0.1;
    std::string grid;
    double sigma_p = 1.0;
    std::optional<double> snr;
    std::optional<long> t;
    int instances = kDefaultInstances;
    std::uint64_t seed = kDefaultMasterSeed;
    std::string methods = "ridge,lasso,vg";
    std::string out;
    int jobs = 1;
    bool verbose = false;
    bool deterministic = false;
    bool standardize = false;
    std::string input;
};

inline std::filesystem::path sibling(const std::filesystem::path& csv, const std::string& suffix) {
    auto p = csv;
    p.replace_extension();
    p += suffix;
    return p;
}

inline int run_single(const CliOptions& o, std::ostream& out) {
    ScenarioConfig config;
    config.n_consumers = o.n;
    config.active_fraction = o.active_fraction;
    config.n_samples = o.t.value_or(std::lround(0.5 * static_cast<double>(o.n)));
    config.seed = o.seed;
    if (o.snr)
        config.noise = TargetSnr{*o.snr};
    else
        config.noise = SigmaP{o.sigma_p};
    const auto methods = parse_method_list(o.methods);
    const Scenario sc = generate_scenario(config);
    SolverSettings settings;
    settings.standardize = o.standardize;

    out << "scenario: N=" << config.n_consumers << " T=" << config.n_samples << " T_val=" << config.n_validation()
        << " active=" << config.n_active() << " sigma_p=" << format_double(sc.truth.sigma_p)
        << " signal_sd=" << format_double(sc.truth.signal_sd) << " seed=" << config.seed << '\n';
    out << "method,selected_hyperparameter,generalization_error,oracle_generalization_error,roc_auc,"
           "reconstruction_error,n_nonzero,converged\n";
    for (const Method m : methods) {
        const Selection sel = select(m, sc.train, sc.val, default_grid(m, sc.train), settings);
        const MetricReport r = evaluate(sel.best.alpha_hat, sc.val, sc.truth);
        out << to_string(m) << ',' << format_double(sel.best_hyper) << ',' << format_double(r.generalization_error)
            << ',' << format_double(r.oracle_generalization_error) << ',' << format_double(r.roc_auc) << ','
            << format_double(r.reconstruction_error) << ',' << sel.best.n_nonzero() << ','
            << (sel.best.converged ? 1 : 0) << '\n';
        if (o.verbose) {
            for (const auto& e : sel.table)
                out << "  " << to_string(m) << " hyper=" << format_double(e.hyperparameter)
                    << " validation_error=" << format_double(e.validation_error) << '\n';
            for (const auto& f : sel.failures) out << "  skipped: " << f << '\n';
        }
    }
    return 0;
}

inline int run_sweep_command(SweepKind kind, const CliOptions& o, std::ostream& out, std::ostream& err) {
    SweepSpec spec;
    spec.sweep_kind = kind;
    spec.n_consumers = o.n;
    spec.active_fraction = o.active_fraction;
    spec.grid = o.grid.empty() ? (kind == SweepKind::samples ? default_samples_grid() : default_snr_grid())
                               : parse_real_list(o.grid);
    spec.sigma_p = o.sigma_p;
    spec.fixed_T = o.t.value_or(default_snr_samples(o.n, o.active_fraction));
    spec.n_instances = o.instances;
    spec.master_seed = o.seed;
    spec.methods = parse_method_list(o.methods);
    spec.settings.standardize = o.standardize;
    spec.validate();

    const std::filesystem::path csv =
        o.out.empty() ? std::filesystem::path(kind == SweepKind::samples ? "sweep_samples.csv" : "sweep_snr.csv")
                      : std::filesystem::path(o.out);
    if (csv.has_parent_path()) std::filesystem::create_directories(csv.parent_path());

    const SweepOutput result = run_sweep(spec, {o.jobs, o.deterministic, o.verbose});
    write_csv(result.records, csv);
    const auto summaries = aggregate(result.records);
    const auto summary_path = sibling(csv, "_summary.csv");
    write_summary_csv(summaries, summary_path);
    write_metadata(spec, csv, o.deterministic);
    if (o.verbose) {
        write_selection_csv(result.selection, sibling(csv, "_selection.csv"));
        write_diagnostics_csv(result.diagnostics, sibling(csv, "_diagnostics.csv"));
    }

    int failed = 0;
    for (const auto& r : result.records) failed += r.failed ? 1 : 0;
    out << "wrote " << result.records.size() << " records to " << csv.string() << " (summary "
        << summary_path.string() << ")\n";
    if (failed) err << "warning: " << failed << " records failed; see the 'failed' column\n";
    return 0;
}

inline int run_plot(const CliOptions& o, std::ostream& out) {
    const auto records = read_csv(o.input);
    const auto dir = o.out.empty() ? std::filesystem::path("plots") : std::filesystem::path(o.out);
    for (const auto& p : render_plots(aggregate(records), dir)) out << "wrote " << p.string() << '\n';
    return 0;
}

} // namespace detail

/// Entry point of the `elasticity` tool. Returns 0 on success, 1 on a usage
/// error and 2 when the run itself fails.
inline int cli_main(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Learn per-consumer price elasticities from aggregate demand response", "elasticity"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    detail::CliOptions o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--n", o.n, "number of consumers")->capture_default_str();
        sub->add_option("--active-fraction", o.active_fraction, "fraction of responsive consumers")
            ->capture_default_str();
        sub->add_option("--seed", o.seed, "master seed")->capture_default_str();
        sub->add_option("--methods", o.methods, "comma-separated subset of ols,ridge,lasso,vg")
            ->capture_default_str();
        sub->add_flag("--verbose", o.verbose, "print or write selection tables");
        sub->add_flag("--standardize", o.standardize, "scale price columns to unit mean square before fitting");
        sub->add_option("--config", "key = value file; command-line flags take precedence");
    };
    auto sweep_options = [&](CLI::App* sub) {
        sub->add_option("--grid", o.grid, "comma-separated grid values");
        sub->add_option("--instances", o.instances, "random instances per grid value")->capture_default_str();
        sub->add_option("--out", o.out, "records CSV path");
        sub->add_option("--jobs", o.jobs, "concurrent cells")->capture_default_str()->check(CLI::PositiveNumber);
        sub->add_flag("--deterministic", o.deterministic, "zero timing fields for byte-identical output");
    };

    auto* single = app.add_subcommand("single", "fit one scenario and print the metric report");
    common(single);
    single->add_option("--t", o.t, "training samples (default N/2)");
    single->add_option("--sigma-p", o.sigma_p, "noise standard deviation")->capture_default_str();
    single->add_option("--snr", o.snr, "target SNR, log10 units (overrides --sigma-p)");

    auto* samples = app.add_subcommand("sweep-samples", "sweep the ratio T/N at fixed noise");
    common(samples);
    sweep_options(samples);
    samples->add_option("--sigma-p", o.sigma_p, "noise standard deviation")->capture_default_str();

    auto* snr = app.add_subcommand("sweep-snr", "sweep the SNR at fixed T");
    common(snr);
    sweep_options(snr);
    snr->add_option("--t", o.t, "training samples (default 250 for sparse, 475 for dense at N=500)");

    auto* plot = app.add_subcommand("plot", "render SVG figures from a records CSV");
    plot->add_option("input", o.input, "records CSV written by a sweep")->required();
    plot->add_option("--out", o.out, "output directory (default plots)");

    try {
        args = detail::expand_config(std::move(args));
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (single->parsed()) return detail::run_single(o, out);
        if (samples->parsed()) return detail::run_sweep_command(SweepKind::samples, o, out, err);
        if (snr->parsed()) return detail::run_sweep_command(SweepKind::snr, o, out, err);
        if (plot->parsed()) return detail::run_plot(o, out);
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

inline int cli_main(int argc, char** argv) {
    return cli_main(std::vector<std::string>(argv + 1, argv + argc));
}

} // namespace elasticity
