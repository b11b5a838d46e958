#pragma once

#include <functional>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "odecast/stream.hpp"

namespace odecast {

// Rows keyed by (dataset, task, method, horizon) -> cumulative MSE.
class MetricsTable {
public:
    using Key = std::tuple<std::string, std::string, std::string, std::size_t>;

    void set(const std::string& dataset, const std::string& task, const std::string& method,
             std::size_t horizon, double cumulative_mse);
    double get(const std::string& dataset, const std::string& task, const std::string& method,
               std::size_t horizon) const;
    std::size_t size() const { return rows_.size(); }
    const std::map<Key, double>& rows() const { return rows_; }

    void write_csv(const std::string& path) const;

private:
    std::map<Key, double> rows_;
};

struct ResourceTrace {
    std::vector<double> per_step_seconds;
    double total_seconds = 0.0;
    double peak_memory_mb = 0.0;
};

// Mean over scored steps of the per-step squared error (already averaged over
// target dims and horizon offsets).
double cumulative_mse(const StreamReport& report);

// Trailing-window mean of the scored per-step MSE; one value per step.
std::vector<double> rolling_mse_trace(const StreamReport& report, std::size_t window = 500);

// Writes runs/<id>/{summary.json, trace.csv, predictions.svg, loss.svg,
// resources.json}. Everything except resources.json is byte-deterministic
// for a given report.
void emit_outputs(const StreamReport& report, const std::string& run_dir);

// Times a runnable with the monotonic clock and samples the resident
// high-water mark. Memory is allocator/process level and approximate.
ResourceTrace measure_resources(const std::function<void()>& fn);

ResourceTrace resource_trace(const StreamReport& report);

// Minimal deterministic polyline plot; exposed for reuse by the CLI.
void write_svg_lines(const std::string& path, const std::vector<std::vector<double>>& series,
                     const std::vector<std::string>& labels,
                     const std::vector<std::size_t>& vertical_marks, const std::string& title);

} // namespace odecast
