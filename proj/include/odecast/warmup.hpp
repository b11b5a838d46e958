#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odecast/data.hpp"
#include "odecast/losses.hpp"
#include "odecast/model.hpp"

namespace odecast {

struct WarmupConfig {
    std::size_t batch_size = 64;
    std::size_t max_epochs = 200;
    std::size_t patience = 10;     // epochs without validation improvement
    double lr = 0.001;
    double validation_fraction = 0.10; // chronological tail of the prefix
};

struct WarmupEpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double mse = 0.0;
    double kl = 0.0;
    double l1 = 0.0;
};

struct WarmupResult {
    std::vector<WarmupEpochLog> log;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
};

// VAE-style warm-up on the (already normalised) training prefix: each window
// is encoded, sampled, integrated, and reconstructed; the loss is
// reconstruction MSE + KL + L1 on the sampled latent. Early-stops on the
// validation tail and leaves the best-validation parameters in the model.
WarmupResult warmup_train(OdeForecaster& model, const RawSeries& train, const WarmupConfig& cfg,
                          std::uint64_t seed);

// Same objective over pre-built (possibly masked/irregular) windows.
WarmupResult warmup_train_windows(OdeForecaster& model, const std::vector<Window>& windows,
                                  const WarmupConfig& cfg, std::uint64_t seed);

void write_training_log_csv(const WarmupResult& result, const std::string& path);

} // namespace odecast
