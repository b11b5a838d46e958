#pragma once

#include <cstddef>
#include <deque>
#include <vector>

#include "odecast/stream.hpp"

namespace odecast {

// Adaptive-windowing drift detector over a scalar stream. Keeps a capped
// window of recent values; after each append it scans every split W0|W1 and
// cuts when |mean(W0) - mean(W1)| >= eps_cut with
//   eps_cut = sqrt(ln(4/delta') / (2 m)),  delta' = delta / |W|,
//   m = harmonic mean of |W0| and |W1|.
// On a cut the older sub-window W0 is dropped (repeatedly, until no split
// triggers) and the update reports drift.
class AdwinDetector {
public:
    explicit AdwinDetector(double delta = 0.002, std::size_t max_window = 5000);

    // Appends a value; returns true when a drift was detected (and the
    // window was cut).
    bool update(double value);

    std::size_t window_size() const { return window_.size(); }
    double window_mean() const;
    double delta() const { return delta_; }

private:
    double delta_;
    std::size_t max_window_;
    std::deque<double> window_;
    double sum_ = 0.0;

    bool scan_and_cut();
};

// Runs the detector over the truth sequence of a completed report and fills
// the drift flags in place. Diagnostic only: never feeds back into learning.
void annotate_report(StreamReport& report, double delta = 0.002,
                     std::size_t max_window = 5000);

// Reference implementation: identical cut rule evaluated by direct
// re-summation over every split. Used to pin the fast detector's behaviour.
std::vector<std::size_t> adwin_bruteforce_flags(const std::vector<double>& values, double delta,
                                                std::size_t max_window = 5000);

} // namespace odecast
