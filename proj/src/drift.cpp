#include "odecast/drift.hpp"

#include <cmath>

#include "odecast/errors.hpp"

namespace odecast {

AdwinDetector::AdwinDetector(double delta, std::size_t max_window)
    : delta_(delta), max_window_(max_window) {
    if (delta <= 0.0 || delta >= 1.0) throw ContractError("adwin: delta must be in (0, 1)");
    if (max_window < 2) throw ContractError("adwin: max_window must be >= 2");
}

double AdwinDetector::window_mean() const {
    return window_.empty() ? 0.0 : sum_ / static_cast<double>(window_.size());
}

bool AdwinDetector::update(double value) {
    if (!std::isfinite(value)) throw NumericError("adwin: non-finite input");
    window_.push_back(value);
    sum_ += value;
    if (window_.size() > max_window_) {
        sum_ -= window_.front();
        window_.pop_front();
    }
    bool drift = false;
    while (scan_and_cut()) drift = true;
    return drift;
}

bool AdwinDetector::scan_and_cut() {
    const std::size_t n = window_.size();
    if (n < 2) return false;
    const double delta_prime = delta_ / static_cast<double>(n);
    const double log_term = std::log(4.0 / delta_prime);

    double left_sum = 0.0;
    for (std::size_t n0 = 1; n0 < n; ++n0) {
        left_sum += window_[n0 - 1];
        const std::size_t n1 = n - n0;
        const double mean0 = left_sum / static_cast<double>(n0);
        const double mean1 = (sum_ - left_sum) / static_cast<double>(n1);
        const double harmonic = 2.0 / (1.0 / static_cast<double>(n0) +
                                       1.0 / static_cast<double>(n1));
        const double eps_cut = std::sqrt(log_term / (2.0 * harmonic));
        if (std::abs(mean0 - mean1) >= eps_cut) {
            // drop the older sub-window
            for (std::size_t i = 0; i < n0; ++i) {
                sum_ -= window_.front();
                window_.pop_front();
            }
            return true;
        }
    }
    return false;
}

void annotate_report(StreamReport& report, double delta, std::size_t max_window) {
    AdwinDetector detector(delta, max_window);
    for (StreamStep& step : report.steps) {
        // detector watches the revealed target values (first truth entry)
        const double value = step.truth.empty() ? 0.0 : step.truth.front();
        step.drift_flag = detector.update(value);
    }
}

std::vector<std::size_t> adwin_bruteforce_flags(const std::vector<double>& values, double delta,
                                                std::size_t max_window) {
    std::vector<std::size_t> flags;
    std::vector<double> window;
    for (std::size_t idx = 0; idx < values.size(); ++idx) {
        window.push_back(values[idx]);
        if (window.size() > max_window) window.erase(window.begin());
        bool drift = false;
        bool cut = true;
        while (cut) {
            cut = false;
            const std::size_t n = window.size();
            if (n < 2) break;
            const double delta_prime = delta / static_cast<double>(n);
            for (std::size_t n0 = 1; n0 < n && !cut; ++n0) {
                double s0 = 0.0, s1 = 0.0;
                for (std::size_t i = 0; i < n0; ++i) s0 += window[i];
                for (std::size_t i = n0; i < n; ++i) s1 += window[i];
                const double mean0 = s0 / static_cast<double>(n0);
                const double mean1 = s1 / static_cast<double>(n - n0);
                const double harmonic = 2.0 / (1.0 / static_cast<double>(n0) +
                                               1.0 / static_cast<double>(n - n0));
                const double eps_cut = std::sqrt(std::log(4.0 / delta_prime) / (2.0 * harmonic));
                if (std::abs(mean0 - mean1) >= eps_cut) {
                    window.erase(window.begin(), window.begin() + static_cast<long>(n0));
                    drift = true;
                    cut = true;
                }
            }
        }
        if (drift) flags.push_back(idx);
    }
    return flags;
}

} // namespace odecast
