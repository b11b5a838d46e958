#include "odecast/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "odecast/errors.hpp"

namespace odecast {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

// full precision so saved traces re-render bit-identically
std::string fmt_exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string join(const std::vector<double>& values, char sep) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += sep;
        out += fmt_exact(values[i]);
    }
    return out;
}

} // namespace

void MetricsTable::set(const std::string& dataset, const std::string& task,
                       const std::string& method, std::size_t horizon, double value) {
    rows_[{dataset, task, method, horizon}] = value;
}

double MetricsTable::get(const std::string& dataset, const std::string& task,
                         const std::string& method, std::size_t horizon) const {
    auto it = rows_.find({dataset, task, method, horizon});
    if (it == rows_.end()) throw ContractError("metrics table: no such row");
    return it->second;
}

void MetricsTable::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write metrics table: " + path);
    out << "dataset,task,method,horizon,cumulative_mse\n";
    for (const auto& [key, value] : rows_)
        out << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
            << std::get<3>(key) << ',' << fmt(value) << '\n';
}

double cumulative_mse(const StreamReport& report) {
    if (report.steps.empty()) throw ContractError("cumulative_mse: empty report");
    double acc = 0.0;
    std::size_t n = 0;
    for (const StreamStep& s : report.steps)
        if (s.scored) {
            acc += s.mse;
            ++n;
        }
    if (n == 0) throw ContractError("cumulative_mse: no scored steps");
    return acc / static_cast<double>(n);
}

std::vector<double> rolling_mse_trace(const StreamReport& report, std::size_t window) {
    if (window < 1) throw ContractError("rolling_mse_trace: window must be >= 1");
    std::vector<double> trace;
    trace.reserve(report.steps.size());
    std::vector<double> recent;
    double acc = 0.0;
    for (const StreamStep& s : report.steps) {
        if (s.scored) {
            recent.push_back(s.mse);
            acc += s.mse;
            if (recent.size() > window) {
                acc -= recent[recent.size() - window - 1];
            }
        }
        const std::size_t n = std::min(recent.size(), window);
        trace.push_back(n ? acc / static_cast<double>(n) : 0.0);
    }
    return trace;
}

void write_svg_lines(const std::string& path, const std::vector<std::vector<double>>& series,
                     const std::vector<std::string>& labels,
                     const std::vector<std::size_t>& vertical_marks, const std::string& title) {
    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    const double width = 960.0, height = 320.0, pad = 40.0;

    std::size_t n = 0;
    double lo = 0.0, hi = 1.0;
    bool first = true;
    for (const auto& s : series) {
        n = std::max(n, s.size());
        for (double v : s) {
            if (first) {
                lo = hi = v;
                first = false;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;

    auto x_at = [&](std::size_t i) {
        return n <= 1 ? pad
                      : pad + (width - 2 * pad) * static_cast<double>(i) /
                                  static_cast<double>(n - 1);
    };
    auto y_at = [&](double v) { return height - pad - (height - 2 * pad) * (v - lo) / (hi - lo); };

    std::ofstream out(path);
    if (!out) throw DataError("cannot write svg: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << pad << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << height - pad << "\" x2=\"" << width - pad
        << "\" y2=\"" << height - pad << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\""
        << height - pad << "\" stroke=\"black\"/>\n";
    out << "<text x=\"4\" y=\"" << fmt(y_at(hi)) << "\" font-size=\"10\">" << fmt(hi)
        << "</text>\n";
    out << "<text x=\"4\" y=\"" << fmt(y_at(lo)) << "\" font-size=\"10\">" << fmt(lo)
        << "</text>\n";

    for (std::size_t mark : vertical_marks) {
        if (mark >= n) continue;
        out << "<line x1=\"" << fmt(x_at(mark)) << "\" y1=\"" << pad << "\" x2=\""
            << fmt(x_at(mark)) << "\" y2=\"" << height - pad
            << "\" stroke=\"red\" stroke-dasharray=\"3,3\"/>\n";
    }

    for (std::size_t s = 0; s < series.size(); ++s) {
        if (series[s].empty()) continue;
        out << "<polyline fill=\"none\" stroke=\"" << kColors[s % 4]
            << "\" stroke-width=\"1\" points=\"";
        // cap the emitted points so huge runs stay readable and small on disk
        const std::size_t stride = std::max<std::size_t>(1, series[s].size() / 4000);
        for (std::size_t i = 0; i < series[s].size(); i += stride)
            out << fmt(x_at(i)) << ',' << fmt(y_at(series[s][i])) << ' ';
        out << "\"/>\n";
        if (s < labels.size())
            out << "<text x=\"" << pad + 10 + 150 * static_cast<double>(s)
                << "\" y=\"34\" font-size=\"11\" fill=\"" << kColors[s % 4] << "\">" << labels[s]
                << "</text>\n";
    }
    out << "</svg>\n";
}

void emit_outputs(const StreamReport& report, const std::string& run_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(run_dir);

    // summary.json: deterministic numeric fields only
    {
        nlohmann::ordered_json j;
        j["cumulative_mse"] = cumulative_mse(report);
        j["scored_steps"] = report.scored_steps;
        j["total_steps"] = report.steps.size();
        j["skipped_windows"] = report.skipped_windows;
        std::size_t drifts = 0, updates = 0;
        for (const StreamStep& s : report.steps) {
            drifts += s.drift_flag ? 1 : 0;
            updates += s.updated ? 1 : 0;
        }
        j["drift_count"] = drifts;
        j["update_count"] = updates;
        j["observed_fraction"] =
            report.steps.empty()
                ? 1.0
                : static_cast<double>(report.scored_steps) / static_cast<double>(report.steps.size());
        if (!report.config_echo.empty())
            j["config"] = nlohmann::json::parse(report.config_echo);
        std::ofstream out(run_dir + "/summary.json");
        if (!out) throw DataError("cannot write summary: " + run_dir);
        out << j.dump(2) << '\n';
    }

    // trace.csv
    {
        std::ofstream out(run_dir + "/trace.csv");
        if (!out) throw DataError("cannot write trace: " + run_dir);
        out << "j,y_hat,y,mse,kl,l1,drift_flag,wall_ms\n";
        for (const StreamStep& s : report.steps)
            out << s.index << ',' << join(s.prediction, ';') << ',' << join(s.truth, ';') << ','
                << fmt_exact(s.mse) << ',' << fmt_exact(s.loss.kl) << ',' << fmt_exact(s.loss.l1)
                << ',' << (s.drift_flag ? 1 : 0) << ',' << fmt_exact(s.wall_seconds * 1000.0)
                << '\n';
    }

    // predictions.svg: first target entry of prediction vs truth
    {
        std::vector<double> pred, truth;
        std::vector<std::size_t> marks;
        for (std::size_t i = 0; i < report.steps.size(); ++i) {
            const StreamStep& s = report.steps[i];
            pred.push_back(s.prediction.empty() ? 0.0 : s.prediction.front());
            truth.push_back(s.truth.empty() ? 0.0 : s.truth.front());
            if (s.drift_flag) marks.push_back(i);
        }
        write_svg_lines(run_dir + "/predictions.svg", {truth, pred}, {"truth", "prediction"},
                        marks, "prediction vs truth");
    }

    // loss.svg: rolling mse
    write_svg_lines(run_dir + "/loss.svg", {rolling_mse_trace(report)}, {"rolling mse"}, {},
                    "rolling mse (window 500)");

    // resources.json (timing varies run to run; kept out of summary.json)
    {
        nlohmann::ordered_json j;
        j["total_runtime_seconds"] = report.total_runtime_seconds;
        j["peak_memory_mb"] = report.peak_memory_mb;
        double step_total = 0.0;
        for (const StreamStep& s : report.steps) step_total += s.wall_seconds;
        j["mean_step_ms"] =
            report.steps.empty() ? 0.0 : step_total * 1000.0 / static_cast<double>(report.steps.size());
        std::ofstream out(run_dir + "/resources.json");
        if (!out) throw DataError("cannot write resources: " + run_dir);
        out << j.dump(2) << '\n';
    }
}

ResourceTrace measure_resources(const std::function<void()>& fn) {
    ResourceTrace trace;
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    trace.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.per_step_seconds = {trace.total_seconds};
    trace.peak_memory_mb = resident_memory_mb();
    return trace;
}

ResourceTrace resource_trace(const StreamReport& report) {
    ResourceTrace trace;
    trace.per_step_seconds.reserve(report.steps.size());
    for (const StreamStep& s : report.steps) trace.per_step_seconds.push_back(s.wall_seconds);
    trace.total_seconds = report.total_runtime_seconds;
    trace.peak_memory_mb = report.peak_memory_mb;
    return trace;
}

} // namespace odecast
