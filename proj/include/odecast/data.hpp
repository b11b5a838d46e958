#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "odecast/odesolver.hpp"
#include "odecast/tensor.hpp"

namespace odecast {

// Which CSV columns hold the timestamp, the features, and the forecast
// target. Feature names empty means "every column except the timestamp".
struct CsvSchema {
    std::string timestamp_column = "date";
    std::vector<std::string> feature_columns; // empty -> all non-timestamp
    std::string target_column;                // must be one of the features
};

// Chronologically ordered multivariate series. Timestamps are seconds since
// an arbitrary origin; only their spacing matters.
struct RawSeries {
    std::vector<double> timestamps;
    std::vector<std::vector<double>> values; // values[t][d]
    std::vector<std::string> feature_names;
    std::size_t target_index = 0;

    std::size_t length() const { return values.size(); }
    std::size_t dims() const { return values.empty() ? 0 : values[0].size(); }
};

// Per-feature mean/stddev fitted on the training prefix only (population
// standard deviation).
struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

// RawSeries plus an observation mask; mask[t][d] == false means the point was
// removed by the irregular cutout.
struct MaskedSeries {
    RawSeries series;
    std::vector<std::vector<bool>> mask;

    std::size_t observed_count(std::size_t dim) const;
};

// One sliding window: lag input rows plus the horizon of target rows,
// with the window's normalised time grid. Masked windows keep only observed
// rows; input_mask/target_mask are 0/1 weight tensors aligned with
// inputs/targets (undefined for fully observed windows).
struct Window {
    Tensor inputs;       // [rows x input_dim]; rows == lag when fully observed
    Tensor targets;      // [horizon x target_dim]
    TimeGrid grid;       // normalised to [0, 1] over the window span
    std::size_t end_row = 0; // index of the last input row in the source series
    Tensor input_mask;
    Tensor target_mask;

    bool masked() const { return input_mask.defined(); }
};

RawSeries load_csv(const std::string& path, const CsvSchema& schema);

// First floor(train_fraction * T) rows -> train, remainder -> stream.
std::pair<RawSeries, RawSeries> split_chronological(const RawSeries& series,
                                                    double train_fraction = 0.25);

NormalizationStats fit_scaler(const RawSeries& train);
RawSeries apply_scaler(const NormalizationStats& stats, const RawSeries& series);

// Stride-1 sliding windows (x_{j-lag+1..j}, y_{j+1..j+horizon}). target_dims
// selects which columns form the target rows.
std::vector<Window> make_windows(const RawSeries& series, std::size_t lag, std::size_t horizon,
                                 const std::vector<std::size_t>& target_dims);

// Removes floor(fraction*T) points per attribute, independently at random.
MaskedSeries cutout_irregular(const RawSeries& series, double fraction, std::uint64_t seed);

// Windows over a masked series. A time step is kept when any attribute is
// observed there; removed entries in kept rows are zero-filled (the training
// mean in normalised units) and carry weight 0 in input_mask, so they never
// enter a loss. Windows with fewer than min_observed kept rows are dropped.
std::vector<Window> make_masked_windows(const MaskedSeries& masked, std::size_t lag,
                                        std::size_t horizon,
                                        const std::vector<std::size_t>& target_dims,
                                        std::size_t min_observed = 2);

enum class SyntheticKind { Sine, Constant, Step, RandomWalk, MeanShift };

struct SyntheticParams {
    double amplitude = 1.0;
    double period = 50.0;
    double constant = 0.0;
    double noise_std = 0.0;
    double shift_to = 1.0;        // Step / MeanShift level after the change point
    std::size_t shift_at = 0;     // 0 -> midpoint
    double walk_std = 1.0;
};

RawSeries synthesize(SyntheticKind kind, std::size_t length, const SyntheticParams& params,
                     std::uint64_t seed);

// Concatenates the last `rows` rows of head onto the front of tail; used to
// seed the first stream windows with the training tail.
RawSeries prepend_tail(const RawSeries& head, const RawSeries& tail, std::size_t rows);

// Normalised-series cache in the same binary container style as model
// checkpoints (magic, version, payload, trailing checksum). Lets a stream run
// reuse the warm-up's preprocessing byte-for-byte.
void save_series_cache(const RawSeries& series, const NormalizationStats& stats,
                       const std::string& path);
std::pair<RawSeries, NormalizationStats> load_series_cache(const std::string& path);

} // namespace odecast
