#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "elasticity/core.hpp"
#include "elasticity/metrics.hpp"
#include "elasticity/scenario.hpp"
#include "elasticity/selection.hpp"

namespace elasticity {

inline constexpr const char* kToolVersion = "1.0.0";

enum class SweepKind { samples, snr };

inline std::string_view to_string(SweepKind k) { return k == SweepKind::samples ? "samples" : "snr"; }

inline SweepKind parse_sweep_kind(std::string_view s) {
    if (s == "samples") return SweepKind::samples;
    if (s == "snr") return SweepKind::snr;
    throw InvalidArgument("unknown sweep kind '" + std::string(s) + "'");
}

struct SweepSpec {
    SweepKind sweep_kind = SweepKind::samples;
    long n_consumers = 500;
    double active_fraction = 0.1;
    /// T/N ratios for sample sweeps, log10 SNR values for SNR sweeps.
    std::vector<double> grid;
    long fixed_T = 250;
    double sigma_p = 1.0;
    int n_instances = 10;
    std::uint64_t master_seed = 0;
    std::vector<Method> methods{Method::ridge, Method::lasso, Method::vg};
    double elasticity_value = 1.0;
    SolverSettings settings{};

    long samples_for(double grid_value) const {
        return sweep_kind == SweepKind::samples
                   ? std::lround(grid_value * static_cast<double>(n_consumers))
                   : fixed_T;
    }

    void validate() const {
        if (n_consumers <= 0) throw InvalidArgument("sweep: n_consumers must be positive");
        if (!(active_fraction >= 0.0 && active_fraction <= 1.0))
            throw InvalidArgument("sweep: active_fraction must lie in [0, 1]");
        if (grid.empty()) throw InvalidArgument("sweep: grid is empty");
        for (std::size_t i = 1; i < grid.size(); ++i)
            if (!(grid[i] > grid[i - 1])) throw InvalidArgument("sweep: grid must be strictly increasing");
        if (n_instances <= 0) throw InvalidArgument("sweep: n_instances must be positive");
        if (methods.empty()) throw InvalidArgument("sweep: no methods requested");
        if (sweep_kind == SweepKind::samples) {
            if (!(sigma_p >= 0.0)) throw InvalidArgument("sweep: sigma_p must be non-negative");
            for (const double r : grid)
                if (samples_for(r) < 2)
                    throw InvalidArgument("sweep: ratio " + std::to_string(r) + " gives fewer than 2 samples");
        } else {
            if (fixed_T < 2) throw InvalidArgument("sweep: fixed_T must be at least 2");
            if (std::lround(active_fraction * static_cast<double>(n_consumers)) < 1)
                throw InvalidArgument("sweep: SNR sweep needs at least one active consumer");
        }
    }
};

struct SweepRecord {
    std::string method;
    std::string sweep_kind;
    long n_consumers = 0;
    double active_fraction = 0.0;
    double grid_value = 0.0;
    long T = 0;
    double sigma_p = 0.0;
    int instance_index = 0;
    std::uint64_t seed = 0;
    double selected_hyperparameter = kNaN;
    double generalization_error = kNaN;
    double oracle_generalization_error = kNaN;
    double roc_auc = kNaN;
    double reconstruction_error = kNaN;
    long n_nonzero = 0;
    double fit_milliseconds = 0.0;
    bool converged = false;
    bool failed = false;
};

/// One row per (method, grid value, instance, hyperparameter) when verbose.
struct SelectionRow {
    std::string method;
    double grid_value = 0.0;
    int instance_index = 0;
    double hyperparameter = 0.0;
    double validation_error = 0.0;
};

/// Per-record extras recorded in verbose mode.
struct DiagnosticRow {
    std::string method;
    double grid_value = 0.0;
    int instance_index = 0;
    double roc_auc_abs = kNaN;
    int iterations = 0;
    std::string failure;
};

struct SweepOptions {
    int jobs = 1;
    /// Zero the timing column so repeated runs are byte-identical.
    bool deterministic = false;
    bool verbose = false;
};

struct SweepOutput {
    std::vector<SweepRecord> records;
    std::vector<SelectionRow> selection;
    std::vector<DiagnosticRow> diagnostics;
};

/// Seed of one cell. Keyed on the grid value itself, so inserting grid points
/// leaves every existing cell's data unchanged.
inline std::uint64_t cell_seed(std::uint64_t master_seed, double grid_value, int instance_index) {
    const auto bits = std::bit_cast<std::uint64_t>(grid_value == 0.0 ? 0.0 : grid_value);
    return mix64(mix64(master_seed, bits), static_cast<std::uint64_t>(instance_index));
}

inline ScenarioConfig cell_config(const SweepSpec& spec, double grid_value, int instance_index) {
    ScenarioConfig c;
    c.n_consumers = spec.n_consumers;
    c.n_samples = spec.samples_for(grid_value);
    c.active_fraction = spec.active_fraction;
    c.elasticity_value = spec.elasticity_value;
    if (spec.sweep_kind == SweepKind::samples)
        c.noise = SigmaP{spec.sigma_p};
    else
        c.noise = TargetSnr{grid_value};
    c.seed = cell_seed(spec.master_seed, grid_value, instance_index);
    return c;
}

namespace detail {

struct CellOutput {
    std::vector<SweepRecord> records;
    std::vector<SelectionRow> selection;
    std::vector<DiagnosticRow> diagnostics;
};

inline CellOutput run_cell(const SweepSpec& spec, double grid_value, int instance, const SweepOptions& opt) {
    using clock = std::chrono::steady_clock;
    CellOutput out;
    const ScenarioConfig config = cell_config(spec, grid_value, instance);

    SweepRecord base;
    base.sweep_kind = std::string(to_string(spec.sweep_kind));
    base.n_consumers = spec.n_consumers;
    base.active_fraction = spec.active_fraction;
    base.grid_value = grid_value;
    base.T = config.n_samples;
    base.instance_index = instance;
    base.seed = config.seed;

    Scenario sc;
    std::string scenario_error;
    try {
        sc = generate_scenario(config);
        base.sigma_p = sc.truth.sigma_p;
    } catch (const Error& e) {
        scenario_error = e.what();
    }

    for (const Method m : spec.methods) {
        SweepRecord rec = base;
        rec.method = std::string(to_string(m));
        DiagnosticRow diag{rec.method, grid_value, instance, kNaN, 0, scenario_error};
        if (!scenario_error.empty()) {
            rec.failed = true;
        } else {
            try {
                const auto t0 = clock::now();
                const Selection sel = select(m, sc.train, sc.val, default_grid(m, sc.train), spec.settings);
                const auto t1 = clock::now();
                const MetricReport report = evaluate(sel.best.alpha_hat, sc.val, sc.truth);
                rec.selected_hyperparameter = sel.best_hyper;
                rec.generalization_error = report.generalization_error;
                rec.oracle_generalization_error = report.oracle_generalization_error;
                rec.roc_auc = report.roc_auc;
                rec.reconstruction_error = report.reconstruction_error;
                rec.n_nonzero = sel.best.n_nonzero();
                rec.converged = sel.best.converged;
                rec.fit_milliseconds =
                    opt.deterministic ? 0.0 : std::chrono::duration<double, std::milli>(t1 - t0).count();
                if (opt.verbose) {
                    for (const auto& e : sel.table)
                        out.selection.push_back({rec.method, grid_value, instance, e.hyperparameter,
                                                 e.validation_error});
                    if (std::isfinite(report.roc_auc))
                        diag.roc_auc_abs = roc_auc(sel.best.alpha_hat.cwiseAbs(), sc.truth.active_mask);
                    diag.iterations = sel.best.iterations;
                    for (const auto& f : sel.failures) diag.failure += (diag.failure.empty() ? "" : "; ") + f;
                }
            } catch (const Error& e) {
                rec.failed = true;
                diag.failure = e.what();
            }
        }
        out.records.push_back(std::move(rec));
        if (opt.verbose) out.diagnostics.push_back(std::move(diag));
    }
    return out;
}

} // namespace detail

/// Runs every (grid value, instance) cell on a pool of `jobs` workers.
/// Output order is grid-major, instance-minor, methods in the listed order,
/// independent of scheduling.
inline SweepOutput run_sweep(const SweepSpec& spec, const SweepOptions& opt = {}) {
    spec.validate();
    const std::size_t n_cells = spec.grid.size() * static_cast<std::size_t>(spec.n_instances);
    std::vector<detail::CellOutput> cells(n_cells);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t k = next++; k < n_cells; k = next++) {
            const std::size_t g = k / static_cast<std::size_t>(spec.n_instances);
            const int inst = static_cast<int>(k % static_cast<std::size_t>(spec.n_instances));
            cells[k] = detail::run_cell(spec, spec.grid[g], inst, opt);
        }
    };
    const int jobs = std::clamp(opt.jobs, 1, static_cast<int>(std::max<std::size_t>(n_cells, 1)));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }

    SweepOutput out;
    for (auto& c : cells) {
        std::move(c.records.begin(), c.records.end(), std::back_inserter(out.records));
        std::move(c.selection.begin(), c.selection.end(), std::back_inserter(out.selection));
        std::move(c.diagnostics.begin(), c.diagnostics.end(), std::back_inserter(out.diagnostics));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Aggregation

struct Quantiles {
    double median = kNaN;
    double p25 = kNaN;
    double p75 = kNaN;
};

/// Percentile by the nearest-rank rule: the ceil(p/100 * n)-th smallest value.
inline double nearest_rank(const std::vector<double>& sorted, double percent) {
    if (sorted.empty()) return kNaN;
    const auto n = static_cast<double>(sorted.size());
    const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(percent / 100.0 * n)));
    return sorted[std::min(rank, sorted.size()) - 1];
}

inline Quantiles quantiles(std::vector<double> values) {
    std::erase_if(values, [](double v) { return !std::isfinite(v); });
    Quantiles q;
    if (values.empty()) return q;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    q.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    q.p25 = nearest_rank(values, 25.0);
    q.p75 = nearest_rank(values, 75.0);
    return q;
}

struct CellSummary {
    std::string sweep_kind;
    long n_consumers = 0;
    double active_fraction = 0.0;
    std::string method;
    double grid_value = 0.0;
    long T = 0;
    int n_records = 0;
    int n_failed = 0;
    Quantiles generalization_error;
    Quantiles oracle_generalization_error;
    Quantiles roc_auc;
    Quantiles reconstruction_error;
    Quantiles n_nonzero;
    Quantiles selected_hyperparameter;
};

/// Median and quartiles per (sweep, method, grid value), in first-seen order.
inline std::vector<CellSummary> aggregate(const std::vector<SweepRecord>& records) {
    if (records.empty()) throw InvalidArgument("aggregate: no records");
    using Key = std::tuple<std::string, long, double, std::string, double>;
    std::map<Key, std::size_t> index;
    std::vector<std::vector<const SweepRecord*>> groups;
    for (const auto& r : records) {
        const Key key{r.sweep_kind, r.n_consumers, r.active_fraction, r.method, r.grid_value};
        auto [it, inserted] = index.try_emplace(key, groups.size());
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(&r);
    }

    std::vector<CellSummary> out;
    out.reserve(groups.size());
    for (const auto& g : groups) {
        CellSummary s;
        const SweepRecord& first = *g.front();
        s.sweep_kind = first.sweep_kind;
        s.n_consumers = first.n_consumers;
        s.active_fraction = first.active_fraction;
        s.method = first.method;
        s.grid_value = first.grid_value;
        s.T = first.T;
        s.n_records = static_cast<int>(g.size());
        auto column = [&](auto field) {
            std::vector<double> v;
            for (const auto* r : g)
                if (!r->failed) v.push_back(static_cast<double>(field(*r)));
            return quantiles(std::move(v));
        };
        for (const auto* r : g) s.n_failed += r->failed ? 1 : 0;
        s.generalization_error = column([](const SweepRecord& r) { return r.generalization_error; });
        s.oracle_generalization_error = column([](const SweepRecord& r) { return r.oracle_generalization_error; });
        s.roc_auc = column([](const SweepRecord& r) { return r.roc_auc; });
        s.reconstruction_error = column([](const SweepRecord& r) { return r.reconstruction_error; });
        s.n_nonzero = column([](const SweepRecord& r) { return r.n_nonzero; });
        s.selected_hyperparameter = column([](const SweepRecord& r) { return r.selected_hyperparameter; });
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline const std::vector<std::string>& record_columns() {
    static const std::vector<std::string> cols{
        "method", "sweep_kind", "n_consumers", "active_fraction", "grid_value", "T", "sigma_p",
        "instance_index", "seed", "selected_hyperparameter", "generalization_error",
        "oracle_generalization_error", "roc_auc", "reconstruction_error", "n_nonzero", "fit_milliseconds",
        "converged", "failed"};
    return cols;
}

namespace detail {

template <typename Row, typename Emit>
void write_rows(const std::filesystem::path& path, const std::vector<std::string>& header,
                const std::vector<Row>& rows, Emit&& emit) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& r : rows) {
        const std::vector<std::string> fields = emit(r);
        for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i];
        out << '\n';
    }
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

} // namespace detail

inline void write_csv(const std::vector<SweepRecord>& records, const std::filesystem::path& path) {
    detail::write_rows(path, record_columns(), records, [](const SweepRecord& r) {
        return std::vector<std::string>{r.method,
                                        r.sweep_kind,
                                        std::to_string(r.n_consumers),
                                        format_double(r.active_fraction),
                                        format_double(r.grid_value),
                                        std::to_string(r.T),
                                        format_double(r.sigma_p),
                                        std::to_string(r.instance_index),
                                        std::to_string(r.seed),
                                        format_double(r.selected_hyperparameter),
                                        format_double(r.generalization_error),
                                        format_double(r.oracle_generalization_error),
                                        format_double(r.roc_auc),
                                        format_double(r.reconstruction_error),
                                        std::to_string(r.n_nonzero),
                                        format_double(r.fit_milliseconds),
                                        r.converged ? "1" : "0",
                                        r.failed ? "1" : "0"};
    });
}

inline std::vector<SweepRecord> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || detail::split_csv_line(line) != record_columns())
        throw InvalidArgument("'" + path.string() + "' is not a sweep record CSV");

    std::vector<SweepRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != record_columns().size())
            throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": wrong field count");
        try {
            SweepRecord r;
            r.method = f[0];
            r.sweep_kind = f[1];
            r.n_consumers = std::stol(f[2]);
            r.active_fraction = std::stod(f[3]);
            r.grid_value = std::stod(f[4]);
            r.T = std::stol(f[5]);
            r.sigma_p = std::stod(f[6]);
            r.instance_index = std::stoi(f[7]);
            r.seed = std::stoull(f[8]);
            r.selected_hyperparameter = std::stod(f[9]);
            r.generalization_error = std::stod(f[10]);
            r.oracle_generalization_error = std::stod(f[11]);
            r.roc_auc = std::stod(f[12]);
            r.reconstruction_error = std::stod(f[13]);
            r.n_nonzero = std::stol(f[14]);
            r.fit_milliseconds = std::stod(f[15]);
            r.converged = f[16] == "1";
            r.failed = f[17] == "1";
            out.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": malformed field");
        }
    }
    return out;
}

inline void write_summary_csv(const std::vector<CellSummary>& summaries, const std::filesystem::path& path) {
    std::vector<std::string> header{"sweep_kind", "n_consumers", "active_fraction", "method",
                                    "grid_value", "T",           "n_records",       "n_failed"};
    for (const char* metric : {"generalization_error", "oracle_generalization_error", "roc_auc",
                               "reconstruction_error", "n_nonzero", "selected_hyperparameter"})
        for (const char* stat : {"median", "p25", "p75"}) header.push_back(std::string(metric) + "_" + stat);

    detail::write_rows(path, header, summaries, [](const CellSummary& s) {
        std::vector<std::string> f{s.sweep_kind,
                                   std::to_string(s.n_consumers),
                                   format_double(s.active_fraction),
                                   s.method,
                                   format_double(s.grid_value),
                                   std::to_string(s.T),
                                   std::to_string(s.n_records),
                                   std::to_string(s.n_failed)};
        for (const Quantiles* q : {&s.generalization_error, &s.oracle_generalization_error, &s.roc_auc,
                                   &s.reconstruction_error, &s.n_nonzero, &s.selected_hyperparameter}) {
            f.push_back(format_double(q->median));
            f.push_back(format_double(q->p25));
            f.push_back(format_double(q->p75));
        }
        return f;
    });
}

inline void write_selection_csv(const std::vector<SelectionRow>& rows, const std::filesystem::path& path) {
    detail::write_rows(path, {"method", "grid_value", "instance_index", "hyperparameter", "validation_error"}, rows,
                       [](const SelectionRow& r) {
                           return std::vector<std::string>{r.method, format_double(r.grid_value),
                                                           std::to_string(r.instance_index),
                                                           format_double(r.hyperparameter),
                                                           format_double(r.validation_error)};
                       });
}

inline void write_diagnostics_csv(const std::vector<DiagnosticRow>& rows, const std::filesystem::path& path) {
    detail::write_rows(path, {"method", "grid_value", "instance_index", "roc_auc_abs", "iterations", "failure"},
                       rows, [](const DiagnosticRow& r) {
                           std::string failure = r.failure;
                           std::replace(failure.begin(), failure.end(), ',', ';');
                           return std::vector<std::string>{r.method, format_double(r.grid_value),
                                                           std::to_string(r.instance_index),
                                                           format_double(r.roc_auc_abs),
                                                           std::to_string(r.iterations), failure};
                       });
}

inline nlohmann::json spec_to_json(const SweepSpec& spec) {
    nlohmann::json methods = nlohmann::json::array();
    for (const auto m : spec.methods) methods.push_back(std::string(to_string(m)));
    return {{"sweep_kind", std::string(to_string(spec.sweep_kind))},
            {"n_consumers", spec.n_consumers},
            {"active_fraction", spec.active_fraction},
            {"elasticity_value", spec.elasticity_value},
            {"grid", spec.grid},
            {"fixed_T", spec.fixed_T},
            {"sigma_p", spec.sigma_p},
            {"n_instances", spec.n_instances},
            {"master_seed", spec.master_seed},
            {"methods", methods},
            {"snr_log_base", 10},
            {"price_distribution", "iid standard normal"},
            {"validation_rows", "floor(T/2)"},
            {"solver",
             {{"max_iterations", spec.settings.max_iterations},
              {"tolerance", spec.settings.tolerance},
              {"m_clip", spec.settings.m_clip},
              {"standardize", spec.settings.standardize}}},
            {"grids",
             {{"ridge", "50 log-spaced lambda in [1e-4 lambda_max, lambda_max]"},
              {"lasso", "50 log-spaced lambda in [1e-4 lambda_max, lambda_max]"},
              {"vg", "25 linear gamma in [-20, 0]"}}}};
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Writes `<csv>.meta.json` next to a records file.
inline std::filesystem::path write_metadata(const SweepSpec& spec, const std::filesystem::path& csv_path,
                                            bool deterministic) {
    auto meta_path = csv_path;
    meta_path += ".meta.json";
    const nlohmann::json meta{{"tool", "elasticity"},
                              {"version", kToolVersion},
                              {"timestamp", deterministic ? std::string("1970-01-01T00:00:00Z") : utc_timestamp()},
                              {"deterministic", deterministic},
                              {"spec", spec_to_json(spec)}};
    std::ofstream out(meta_path, std::ios::binary);
    if (!out) throw Error("cannot open '" + meta_path.string() + "' for writing");
    out << meta.dump(2) << '\n';
    return meta_path;
}

} // namespace elasticity
