#include "odecast/warmup.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "odecast/adam.hpp"
#include "odecast/errors.hpp"
#include "odecast/rng.hpp"

namespace odecast {

namespace {

struct BatchLoss {
    double mse = 0.0;
    double kl = 0.0;
    double l1 = 0.0;
    double total() const { return mse + kl + l1; }
};

bool grids_identical(const std::vector<Window>& windows) {
    for (std::size_t i = 1; i < windows.size(); ++i)
        if (windows[i].grid.points() != windows[0].grid.points()) return false;
    return true;
}

// Stacks one relative time step across the batch into a [b x input_dim] row
// matrix.
std::vector<Tensor> stack_steps(const std::vector<Window>& windows,
                                const std::vector<std::size_t>& batch) {
    const std::size_t rows = windows[batch[0]].inputs.rows();
    const std::size_t d = windows[batch[0]].inputs.cols();
    std::vector<Tensor> steps;
    steps.reserve(rows);
    for (std::size_t t = 0; t < rows; ++t) {
        Tensor m = Tensor::zeros({batch.size(), d});
        for (std::size_t b = 0; b < batch.size(); ++b)
            for (std::size_t j = 0; j < d; ++j)
                m.at(b, j) = windows[batch[b]].inputs.at(t, j);
        steps.push_back(std::move(m));
    }
    return steps;
}

// Reconstruction MSE for the batched path: predictions at grid point t are a
// [b x input_dim] matrix matching the stacked inputs.
Tensor batched_recon_loss(Tape& tape, const std::vector<Tensor>& recon,
                          const std::vector<Tensor>& truth) {
    Tensor acc;
    for (std::size_t t = 0; t < recon.size(); ++t) {
        Tensor term = mean(tape, square(tape, sub(tape, recon[t], truth[t])));
        acc = acc.defined() ? add(tape, acc, term) : term;
    }
    return scale(tape, acc, 1.0 / static_cast<double>(recon.size()));
}

// Per-window reconstruction loss with an optional 0/1 mask weighting.
Tensor window_recon_loss(Tape& tape, const OdeForecaster::Decoded& decoded, const Window& w) {
    Tensor acc;
    double weight_total = 0.0;
    for (std::size_t t = 0; t < decoded.reconstruction.size(); ++t) {
        Tensor truth_row = take_row_const(w.inputs, t);
        Tensor diff2 = square(tape, sub(tape, decoded.reconstruction[t], truth_row));
        if (w.masked()) {
            Tensor mask_row = take_row_const(w.input_mask, t);
            diff2 = mul(tape, diff2, mask_row);
            for (std::size_t j = 0; j < mask_row.size(); ++j) weight_total += mask_row.at(j);
        } else {
            weight_total += static_cast<double>(diff2.size());
        }
        Tensor term = sum(tape, diff2);
        acc = acc.defined() ? add(tape, acc, term) : term;
    }
    if (weight_total <= 0.0) return Tensor::scalar(0.0);
    return scale(tape, acc, 1.0 / weight_total);
}

} // namespace

WarmupResult warmup_train(OdeForecaster& model, const RawSeries& train, const WarmupConfig& cfg,
                          std::uint64_t seed) {
    const ModelConfig& mc = model.config();
    if (train.length() < mc.lag + 1)
        throw DataError("training prefix shorter than lag + 1");
    std::vector<Window> windows = make_windows(train, mc.lag, 0, {train.target_index});
    return warmup_train_windows(model, windows, cfg, seed);
}

WarmupResult warmup_train_windows(OdeForecaster& model, const std::vector<Window>& windows,
                                  const WarmupConfig& cfg, std::uint64_t seed) {
    if (windows.empty()) throw DataError("no warm-up windows");

    // chronological validation tail
    std::size_t val_count = static_cast<std::size_t>(
        std::floor(cfg.validation_fraction * static_cast<double>(windows.size())));
    val_count = std::max<std::size_t>(val_count, 1);
    if (val_count >= windows.size()) val_count = windows.size() / 2;
    const std::size_t train_count = windows.size() - val_count;
    if (train_count == 0) throw DataError("warm-up split left no training windows");

    const bool batchable = grids_identical(windows);

    Rng rng(seed);
    Rng shuffle_rng = rng.fork(2);

    AdamState adam(model.params(), {.lr = cfg.lr});

    auto evaluate_validation = [&]() {
        // deterministic: z0 = mu
        BatchLoss total;
        Tape tape(false);
        for (std::size_t i = train_count; i < windows.size(); ++i) {
            const Window& w = windows[i];
            LatentDistribution dist = model.encode(tape, w.inputs);
            Tensor z0 = dist.mu;
            OdeForecaster::Decoded decoded = model.decode_window(tape, z0, w.grid);
            total.mse += window_recon_loss(tape, decoded, w).item();
            total.kl += kl_loss(tape, dist).item();
            total.l1 += l1_loss(tape, z0).item();
        }
        total.mse /= static_cast<double>(val_count);
        total.kl /= static_cast<double>(val_count);
        total.l1 /= static_cast<double>(val_count);
        return total;
    };

    WarmupResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_params;

    auto snapshot = [&]() {
        best_params.clear();
        for (const NamedParam& p : model.params()) best_params.push_back(p.tensor.values());
    };
    auto restore = [&]() {
        for (std::size_t i = 0; i < best_params.size(); ++i)
            model.params()[i].tensor.values() = best_params[i];
    };

    std::vector<std::size_t> order(train_count);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        // seeded shuffle keeps reruns bit-identical
        for (std::size_t i = train_count; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(shuffle_rng.below(i));
            std::swap(order[i - 1], order[j]);
        }

        BatchLoss epoch_loss;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < train_count; start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, train_count - start);
            std::vector<std::size_t> batch(order.begin() + start, order.begin() + start + len);

            zero_grads(model.params());
            BatchLoss batch_loss;
            if (batchable) {
                Tape tape;
                std::vector<Tensor> steps = stack_steps(windows, batch);
                LatentDistribution dist = model.encode_steps(tape, steps);
                // the reconstruction path trains on the posterior mean; unit
                // sampling noise at init swamps the gradient signal otherwise
                Tensor z0 = dist.mu;
                OdeForecaster::Decoded decoded =
                    model.decode_window(tape, z0, windows[batch[0]].grid);
                Tensor mse_t = batched_recon_loss(tape, decoded.reconstruction, steps);
                Tensor kl_t = kl_loss(tape, dist);
                Tensor l1_t = l1_loss(tape, z0);
                Tensor total = add(tape, add(tape, mse_t, kl_t), l1_t);
                batch_loss = {mse_t.item(), kl_t.item(), l1_t.item()};
                if (!std::isfinite(batch_loss.total()))
                    throw NumericError("warm-up: non-finite loss");
                backward(total, tape);
            } else {
                const double inv = 1.0 / static_cast<double>(len);
                for (std::size_t b : batch) {
                    const Window& w = windows[b];
                    Tape tape;
                    LatentDistribution dist = model.encode(tape, w.inputs);
                    Tensor z0 = dist.mu;
                    OdeForecaster::Decoded decoded = model.decode_window(tape, z0, w.grid);
                    Tensor mse_t = window_recon_loss(tape, decoded, w);
                    Tensor kl_t = kl_loss(tape, dist);
                    Tensor l1_t = l1_loss(tape, z0);
                    Tensor total =
                        scale(tape, add(tape, add(tape, mse_t, kl_t), l1_t), inv);
                    batch_loss.mse += mse_t.item() * inv;
                    batch_loss.kl += kl_t.item() * inv;
                    batch_loss.l1 += l1_t.item() * inv;
                    if (!std::isfinite(batch_loss.total()))
                        throw NumericError("warm-up: non-finite loss");
                    backward(total, tape);
                }
            }
            adam.step(model.params());
            epoch_loss.mse += batch_loss.mse;
            epoch_loss.kl += batch_loss.kl;
            epoch_loss.l1 += batch_loss.l1;
            ++batches;
        }
        epoch_loss.mse /= static_cast<double>(batches);
        epoch_loss.kl /= static_cast<double>(batches);
        epoch_loss.l1 /= static_cast<double>(batches);

        const BatchLoss val = evaluate_validation();
        result.log.push_back({epoch, epoch_loss.total(), val.total(), epoch_loss.mse,
                              epoch_loss.kl, epoch_loss.l1});

        if (val.total() < result.best_val_loss) {
            result.best_val_loss = val.total();
            result.best_epoch = epoch;
            snapshot();
        } else if (epoch >= result.best_epoch + cfg.patience) {
            break;
        }
    }

    if (!best_params.empty()) restore();
    return result;
}

void write_training_log_csv(const WarmupResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write training log: " + path);
    out << "epoch,train_loss,val_loss,mse,kl,l1\n";
    out.precision(17);
    for (const WarmupEpochLog& row : result.log)
        out << row.epoch << ',' << row.train_loss << ',' << row.val_loss << ',' << row.mse << ','
            << row.kl << ',' << row.l1 << '\n';
}

} // namespace odecast
