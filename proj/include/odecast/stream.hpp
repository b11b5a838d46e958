#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odecast/adam.hpp"
#include "odecast/data.hpp"
#include "odecast/losses.hpp"
#include "odecast/model.hpp"

namespace odecast {

// One prequential step: the prediction is logged (and hashed) strictly before
// its truth enters any gradient computation; the sequence counters prove the
// ordering.
struct StreamStep {
    std::size_t index = 0; // window end row within the stream series
    std::vector<double> prediction;
    std::vector<double> truth;
    LossBreakdown loss;   // composite loss of the update pass
    double mse = 0.0;     // squared error of the logged prediction
    bool scored = true;   // false when no truth entry was observed (cutout)
    bool updated = true;
    bool drift_flag = false;
    double wall_seconds = 0.0;
    std::uint64_t prediction_hash = 0;
    std::uint64_t prediction_seq = 0;
    std::uint64_t truth_use_seq = 0;
};

struct StreamReport {
    std::vector<StreamStep> steps;
    double cumulative_mse = 0.0;       // mean over scored steps
    std::size_t scored_steps = 0;
    std::size_t skipped_windows = 0;   // irregular windows below min observations
    double total_runtime_seconds = 0.0;
    double peak_memory_mb = 0.0;       // resident high-water mark, approximate
    std::string config_echo;

    // instrumentation for the one-pass / buffer-freedom invariants
    std::vector<std::uint32_t> prediction_visits; // per step, must be all 1
    std::vector<std::uint32_t> update_visits;     // per step, must be all 1 (0 if frozen)
    std::size_t retained_state_low = 0;  // min retained doubles observed
    std::size_t retained_state_high = 0; // max retained doubles observed

    std::vector<double> per_step_mse() const;
};

struct StreamOptions {
    bool update_enabled = true; // false -> frozen warm-started model
    bool kl_enabled = true;
    bool l1_enabled = true;
    double lr = 0.001;
};

// Algorithm: for each window (one per stream position), first apply the
// pending parameter update whose truth has fully arrived (a horizon-deep
// delay), then predict the next `horizon` values. Every sample is consumed
// exactly once; the learner's retained state is parameters + Adam moments +
// the isolation-layer state.
StreamReport run_stream(OdeForecaster& model, const RawSeries& stream, const StreamOptions& opts,
                        std::uint64_t seed);

// Irregular variant: windows hold only observed rows on their true time
// grid; unobserved target entries never enter a loss and are not scored.
StreamReport run_stream_irregular(OdeForecaster& model, const MaskedSeries& stream,
                                  const StreamOptions& opts, std::uint64_t seed);

// Persistence forecast y_hat(t+h) = y(t), scored identically to the main loop.
StreamReport run_naive_baseline(const RawSeries& stream, std::size_t lag, std::size_t horizon,
                                const std::vector<std::size_t>& target_dims);

// Target column indices for a task: {target_index} for the univariate-target
// tasks, all columns for multivariate-predict-multivariate.
std::vector<std::size_t> target_dims_for(const RawSeries& series, bool multivariate_target);

// Peak (or, where the kernel hides the high-water mark, current) resident
// memory in megabytes. Approximate by construction.
double resident_memory_mb();

} // namespace odecast
