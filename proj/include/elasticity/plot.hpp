#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "elasticity/harness.hpp"

namespace elasticity {

namespace detail {

struct Series {
    std::string label;
    std::string color;
    bool dashed = false;
    std::vector<double> x, median, lo, hi;
};

inline std::string method_color(const std::string& method) {
    static const std::map<std::string, std::string> colors{
        {"ridge", "#1f77b4"}, {"lasso", "#2ca02c"}, {"vg", "#d62728"}, {"ols", "#9467bd"}, {"opt", "#000000"}};
    const auto it = colors.find(method);
    return it == colors.end() ? "#7f7f7f" : it->second;
}

inline std::string fmt(double v, int precision = 4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

// One panel: axes, ticks and each series as a quartile band plus a median polyline.
class Panel {
public:
    Panel(double left, double top, double width, double height, std::string title, bool log_y)
        : left_(left), top_(top), width_(width), height_(height), title_(std::move(title)), log_y_(log_y) {}

    void render(std::ostringstream& svg, const std::vector<Series>& series, double x_min, double x_max,
                const std::string& x_label) const {
        double y_min = INFINITY, y_max = -INFINITY;
        for (const auto& s : series)
            for (const auto* v : {&s.median, &s.lo, &s.hi})
                for (const double y : *v)
                    if (std::isfinite(y) && (!log_y_ || y > 0)) {
                        y_min = std::min(y_min, y);
                        y_max = std::max(y_max, y);
                    }
        if (!std::isfinite(y_min)) {
            y_min = log_y_ ? 1e-3 : 0.0;
            y_max = 1.0;
        }
        if (log_y_) {
            y_min = std::pow(10.0, std::floor(std::log10(y_min)));
            y_max = std::pow(10.0, std::ceil(std::log10(y_max)));
            if (y_max <= y_min) y_max = y_min * 10.0;
        } else if (y_max - y_min < 1e-12) {
            y_min -= 0.5;
            y_max += 0.5;
        }
        // Zeros and negatives on a log axis sit on the bottom edge.
        const double floor_value = y_min;
        auto px = [&](double x) { return left_ + (x - x_min) / (x_max - x_min) * width_; };
        auto py = [&](double y) {
            double u;
            if (log_y_) {
                y = std::max(y, floor_value);
                u = (std::log10(y) - std::log10(y_min)) / (std::log10(y_max) - std::log10(y_min));
            } else {
                u = (y - y_min) / (y_max - y_min);
            }
            return top_ + (1.0 - u) * height_;
        };

        svg << "<rect x=\"" << left_ << "\" y=\"" << top_ << "\" width=\"" << width_ << "\" height=\"" << height_
            << "\" fill=\"none\" stroke=\"#444\"/>\n";
        svg << "<text x=\"" << left_ + width_ / 2 << "\" y=\"" << top_ - 8
            << "\" text-anchor=\"middle\" font-size=\"13\">" << title_ << (log_y_ ? " (log scale)" : "")
            << "</text>\n";

        std::vector<double> y_ticks;
        if (log_y_) {
            for (double e = std::log10(y_min); e <= std::log10(y_max) + 1e-9; e += 1.0)
                y_ticks.push_back(std::pow(10.0, std::round(e)));
        } else {
            for (int k = 0; k <= 4; ++k) y_ticks.push_back(y_min + (y_max - y_min) * k / 4.0);
        }
        for (const double y : y_ticks) {
            svg << "<line x1=\"" << left_ << "\" x2=\"" << left_ + width_ << "\" y1=\"" << py(y) << "\" y2=\""
                << py(y) << "\" stroke=\"#ddd\"/>\n";
            svg << "<text x=\"" << left_ - 6 << "\" y=\"" << py(y) + 4
                << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(y, 3) << "</text>\n";
        }
        for (int k = 0; k <= 5; ++k) {
            const double x = x_min + (x_max - x_min) * k / 5.0;
            svg << "<text x=\"" << px(x) << "\" y=\"" << top_ + height_ + 14
                << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(x, 3) << "</text>\n";
        }
        svg << "<text x=\"" << left_ + width_ / 2 << "\" y=\"" << top_ + height_ + 30
            << "\" text-anchor=\"middle\" font-size=\"11\">" << x_label << "</text>\n";

        for (const auto& s : series) {
            std::ostringstream band;
            bool has_band = false;
            for (std::size_t i = 0; i < s.x.size(); ++i)
                if (std::isfinite(s.hi[i])) {
                    band << px(s.x[i]) << "," << py(s.hi[i]) << " ";
                    has_band = true;
                }
            for (std::size_t i = s.x.size(); i-- > 0;)
                if (std::isfinite(s.lo[i])) band << px(s.x[i]) << "," << py(s.lo[i]) << " ";
            if (has_band)
                svg << "<polygon points=\"" << band.str() << "\" fill=\"" << s.color
                    << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";

            std::ostringstream line;
            for (std::size_t i = 0; i < s.x.size(); ++i)
                if (std::isfinite(s.median[i])) line << px(s.x[i]) << "," << py(s.median[i]) << " ";
            svg << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << s.color
                << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
        }
    }

private:
    double left_, top_, width_, height_;
    std::string title_;
    bool log_y_;
};

} // namespace detail

/// Three stacked panels (generalization error, ROC AUC, reconstruction error)
/// against the sweep variable, for the summaries of a single sweep.
inline std::string render_sweep_svg(const std::vector<CellSummary>& sweep) {
    if (sweep.empty()) throw InvalidArgument("render_sweep_svg: nothing to plot");
    const auto& head = sweep.front();
    const bool samples = head.sweep_kind == "samples";

    std::vector<std::string> methods;
    for (const auto& s : sweep)
        if (std::find(methods.begin(), methods.end(), s.method) == methods.end()) methods.push_back(s.method);

    auto build = [&](auto pick, bool with_opt) {
        std::vector<detail::Series> out;
        for (const auto& m : methods) {
            detail::Series ser{m, detail::method_color(m), false, {}, {}, {}, {}};
            for (const auto& s : sweep)
                if (s.method == m) {
                    const Quantiles& q = pick(s);
                    ser.x.push_back(s.grid_value);
                    ser.median.push_back(q.median);
                    ser.lo.push_back(q.p25);
                    ser.hi.push_back(q.p75);
                }
            out.push_back(std::move(ser));
        }
        if (with_opt) {
            detail::Series opt{"opt", detail::method_color("opt"), true, {}, {}, {}, {}};
            for (const auto& s : sweep)
                if (s.method == methods.front()) {
                    opt.x.push_back(s.grid_value);
                    opt.median.push_back(s.oracle_generalization_error.median);
                    opt.lo.push_back(s.oracle_generalization_error.p25);
                    opt.hi.push_back(s.oracle_generalization_error.p75);
                }
            out.push_back(std::move(opt));
        }
        return out;
    };

    double x_min = INFINITY, x_max = -INFINITY;
    for (const auto& s : sweep) {
        x_min = std::min(x_min, s.grid_value);
        x_max = std::max(x_max, s.grid_value);
    }
    if (x_max <= x_min) {
        x_min -= 0.5;
        x_max += 0.5;
    }

    const double width = 640, panel_h = 200, left = 80, panel_w = 520;
    const double height = 60 + 3 * (panel_h + 70) + 30;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
        << detail::fmt(100.0 * head.active_fraction, 3) << "% active, N = " << head.n_consumers
        << (samples ? ", vs T/N" : ", T = " + std::to_string(head.T) + ", vs SNR") << "</text>\n";

    const std::string x_label = samples ? "T / N" : "SNR (log10)";
    const double top0 = 60;
    detail::Panel(left, top0, panel_w, panel_h, "Generalization error", true)
        .render(svg, build([](const CellSummary& s) -> const Quantiles& { return s.generalization_error; }, true),
                x_min, x_max, x_label);
    detail::Panel(left, top0 + panel_h + 70, panel_w, panel_h, "Area under ROC curve", false)
        .render(svg, build([](const CellSummary& s) -> const Quantiles& { return s.roc_auc; }, false), x_min, x_max,
                x_label);
    detail::Panel(left, top0 + 2 * (panel_h + 70), panel_w, panel_h, "Reconstruction error", true)
        .render(svg, build([](const CellSummary& s) -> const Quantiles& { return s.reconstruction_error; }, false),
                x_min, x_max, x_label);

    double ly = top0 + 10;
    auto legend = [&](const std::string& label, const std::string& color, bool dashed) {
        svg << "<line x1=\"" << left + panel_w + 8 << "\" x2=\"" << left + panel_w + 28 << "\" y1=\"" << ly
            << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\""
            << (dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
        svg << "<text x=\"" << left + panel_w + 32 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << label
            << "</text>\n";
        ly += 16;
    };
    for (const auto& m : methods) legend(m, detail::method_color(m), false);
    legend("opt", detail::method_color("opt"), true);
    svg << "</svg>\n";
    return svg.str();
}

/// One SVG per sweep found in the summaries; returns the written paths.
inline std::vector<std::filesystem::path> render_plots(const std::vector<CellSummary>& summaries,
                                                       const std::filesystem::path& out_dir) {
    if (summaries.empty()) throw InvalidArgument("render_plots: no summaries");
    std::filesystem::create_directories(out_dir);

    std::vector<std::string> order;
    std::map<std::string, std::vector<CellSummary>> sweeps;
    for (const auto& s : summaries) {
        const std::string name = s.sweep_kind + "_n" + std::to_string(s.n_consumers) + "_f" +
                                 detail::fmt(s.active_fraction, 6) +
                                 (s.sweep_kind == "snr" ? "_t" + std::to_string(s.T) : "");
        if (!sweeps.count(name)) order.push_back(name);
        sweeps[name].push_back(s);
    }

    std::vector<std::filesystem::path> written;
    for (const auto& name : order) {
        auto& cells = sweeps[name];
        std::stable_sort(cells.begin(), cells.end(),
                         [](const CellSummary& a, const CellSummary& b) { return a.grid_value < b.grid_value; });
        const auto path = out_dir / (name + ".svg");
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot open '" + path.string() + "' for writing");
        out << render_sweep_svg(cells);
        written.push_back(path);
    }
    return written;
}

} // namespace elasticity
