#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "odecast/data.hpp"
#include "odecast/drift.hpp"
#include "odecast/model.hpp"
#include "odecast/report.hpp"
#include "odecast/stream.hpp"
#include "odecast/warmup.hpp"

namespace odecast {

// Everything one experiment needs; filled by the CLI (flags over an optional
// key-value config file) and echoed verbatim into summary.json.
struct RunConfig {
    // data source: a CSV or a named synthetic generator
    std::string data_path;
    std::string synthetic;                 // sine|constant|step|random_walk|mean_shift
    std::size_t synthetic_length = 10000;
    CsvSchema schema;
    std::string dataset_name;              // label for tables; derived if empty

    std::string task = "multi-uni";        // uni | multi-uni | multi-multi
    std::size_t lag = 24;
    std::size_t horizon = 1;
    std::size_t hidden_dim = 64;
    std::size_t latent_dim = 64;
    std::uint64_t seed = 1;
    double train_fraction = 0.25;
    double lr = 0.001;

    WarmupConfig warmup;

    bool til_enabled = true;
    bool kl_enabled = true;
    bool l1_enabled = true;

    double cutout = 0.0;                   // fraction removed per attribute
    double adwin_delta = 0.002;
    std::size_t adwin_max_window = 5000;

    std::string out_dir;
    std::string checkpoint;
    std::string baseline_mode = "persistence"; // persistence | frozen

    std::string default_out(const std::string& command) const;
    std::string echo_json() const;
};

// Normalised, split, windowable data for one run. The stream split carries
// the last lag rows of the training prefix so the first stream points are
// predicted rather than discarded.
struct PreparedData {
    RawSeries train;
    RawSeries stream;
    std::optional<MaskedSeries> train_masked;
    std::optional<MaskedSeries> stream_masked;
    NormalizationStats stats;
    std::size_t input_dim = 0;
    std::size_t target_dim = 0;
    std::string dataset_name;

    bool irregular() const { return train_masked.has_value(); }
};

PreparedData prepare_data(const RunConfig& config);

ModelConfig model_config_for(const RunConfig& config, const PreparedData& data);

// Subcommand bodies. They throw typed errors; the CLI maps them to exit codes.
void cmd_warmup(const RunConfig& config);
void cmd_stream(const RunConfig& config);
void cmd_baseline(const RunConfig& config);
void cmd_ablate(const RunConfig& config);
void cmd_cutout(const RunConfig& config);
void cmd_rerender(const RunConfig& config);

// Shared by cmd_stream / cmd_ablate: warm model assumed loaded/trained.
StreamReport run_configured_stream(OdeForecaster& model, const RunConfig& config,
                                   const PreparedData& data, const StreamOptions& opts);

} // namespace odecast
