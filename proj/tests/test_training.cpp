#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "odecast/adam.hpp"
#include "odecast/losses.hpp"
#include "odecast/rng.hpp"
#include "odecast/warmup.hpp"

using namespace odecast;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.input_dim = 1;
    c.hidden_dim = 8;
    c.latent_dim = 6;
    c.lag = 8;
    c.horizon = 1;
    c.target_dim = 1;
    c.seed = 3;
    return c;
}

} // namespace

TEST_CASE("mse unit values") {
    Tape tape;
    CHECK(mse_loss(tape, Tensor::from_vector({1, 2}), Tensor::from_vector({1, 2})).item() == 0.0);
    CHECK(mse_loss(tape, Tensor::from_vector({0, 0}), Tensor::from_vector({1, 1})).item() ==
          doctest::Approx(1.0));
    CHECK(mse_loss(tape, Tensor::from_vector({1, 2}), Tensor::from_vector({0, 4})).item() ==
          doctest::Approx(2.5));
    CHECK_THROWS_AS(mse_loss(tape, Tensor::from_vector({1}), Tensor::from_vector({1, 2})),
                    DimensionError);
}

TEST_CASE("kl unit values pinned to 1e-12") {
    Tape tape;
    LatentDistribution std_normal{Tensor::from_vector({0.0}), Tensor::from_vector({0.0})};
    CHECK(std::abs(kl_loss(tape, std_normal).item()) <= 1e-12);

    LatentDistribution shifted{Tensor::from_vector({1.0}), Tensor::from_vector({0.0})};
    CHECK(std::abs(kl_loss(tape, shifted).item() - 0.5) <= 1e-12);

    LatentDistribution wide{Tensor::from_vector({0.0}), Tensor::from_vector({std::log(4.0)})};
    const double expected = -0.5 * (1.0 + std::log(4.0) - 4.0);
    CHECK(std::abs(kl_loss(tape, wide).item() - expected) <= 1e-12);
    CHECK(kl_loss(tape, wide).item() == doctest::Approx(0.8069).epsilon(1e-4));
}

TEST_CASE("kl is non-negative and zero only at the prior") {
    Rng rng(5);
    Tape tape;
    for (int trial = 0; trial < 200; ++trial) {
        Tensor mu = Tensor::zeros({6});
        Tensor logvar = Tensor::zeros({6});
        for (double& v : mu.values()) v = rng.uniform(-3, 3);
        for (double& v : logvar.values()) v = rng.uniform(-3, 3);
        const double kl = kl_loss(tape, {mu, logvar}).item();
        CHECK(kl >= -1e-12);
        bool at_prior = true;
        for (double v : mu.values()) at_prior = at_prior && v == 0.0;
        for (double v : logvar.values()) at_prior = at_prior && v == 0.0;
        if (!at_prior) CHECK(kl > 0.0);
    }
}

TEST_CASE("l1 unit values and homogeneity") {
    Tape tape;
    CHECK(l1_loss(tape, Tensor::zeros({4})).item() == 0.0);
    CHECK(std::abs(l1_loss(tape, Tensor::from_vector({1, -2, 3})).item() - 0.06) <= 1e-12);
    Tensor z = Tensor::from_vector({0.3, -0.7, 1.1});
    Tensor z2 = Tensor::from_vector({0.6, -1.4, 2.2});
    CHECK(l1_loss(tape, z2).item() == doctest::Approx(2.0 * l1_loss(tape, z).item()));
}

TEST_CASE("warm-up on a sine wave reconstructs it") {
    RawSeries sine = synthesize(SyntheticKind::Sine, 1000, {.period = 50.0}, 7);
    NormalizationStats stats = fit_scaler(sine);
    RawSeries norm = apply_scaler(stats, sine);

    ModelConfig cfg = tiny_config();
    cfg.hidden_dim = 16;
    cfg.latent_dim = 12;
    cfg.lag = 12;
    OdeForecaster model(cfg);
    WarmupConfig wcfg;
    wcfg.max_epochs = 60;
    WarmupResult result = warmup_train(model, norm, wcfg, 7);

    // final reconstruction error below 0.1 in normalised units
    std::vector<Window> windows = make_windows(norm, cfg.lag, 0, {0});
    Tape tape(false);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < windows.size(); i += 37) {
        const Window& w = windows[i];
        LatentDistribution dist = model.encode(tape, w.inputs);
        auto decoded = model.decode_window(tape, dist.mu, w.grid);
        for (std::size_t t = 0; t < decoded.reconstruction.size(); ++t) {
            const double diff = decoded.reconstruction[t].at(0) - w.inputs.at(t, 0);
            total += diff * diff;
            ++count;
        }
    }
    CHECK(total / static_cast<double>(count) < 0.1);
}

TEST_CASE("early stopping bounds the epoch count and best-so-far is monotone") {
    RawSeries sine = synthesize(SyntheticKind::Sine, 400, {.period = 40.0}, 9);
    RawSeries norm = apply_scaler(fit_scaler(sine), sine);

    ModelConfig cfg = tiny_config();
    OdeForecaster model(cfg);
    WarmupConfig wcfg;
    wcfg.max_epochs = 100;
    wcfg.patience = 5;
    WarmupResult result = warmup_train(model, norm, wcfg, 11);

    CHECK(result.log.size() <= result.best_epoch + wcfg.patience);
    double best = std::numeric_limits<double>::infinity();
    for (const WarmupEpochLog& row : result.log) {
        best = std::min(best, row.val_loss);
        CHECK(best <= row.val_loss + 1e-15);
    }
    CHECK(best == doctest::Approx(result.best_val_loss));
}

TEST_CASE("warm-up is deterministic under a fixed seed") {
    RawSeries sine = synthesize(SyntheticKind::Sine, 300, {.period = 30.0}, 13);
    RawSeries norm = apply_scaler(fit_scaler(sine), sine);
    WarmupConfig wcfg;
    wcfg.max_epochs = 5;

    auto run = [&]() {
        OdeForecaster model(tiny_config());
        warmup_train(model, norm, wcfg, 42);
        std::vector<double> flat;
        for (const NamedParam& p : model.params())
            flat.insert(flat.end(), p.tensor.values().begin(), p.tensor.values().end());
        return flat;
    };
    CHECK(run() == run());
}

TEST_CASE("one adam step on the warm-up loss usually descends") {
    RawSeries sine = synthesize(SyntheticKind::Sine, 120, {.period = 25.0}, 17);
    RawSeries norm = apply_scaler(fit_scaler(sine), sine);
    std::vector<Window> windows = make_windows(norm, 8, 0, {0});

    int descended = 0;
    for (int init = 0; init < 20; ++init) {
        ModelConfig cfg = tiny_config();
        cfg.seed = 100 + static_cast<std::uint64_t>(init);
        OdeForecaster model(cfg);
        AdamState adam(model.params(), {.lr = 1e-3});

        auto batch_loss = [&](Tape& tape) {
            Tensor acc;
            for (std::size_t i = 0; i < 4; ++i) {
                const Window& w = windows[i * 7];
                LatentDistribution dist = model.encode(tape, w.inputs);
                Tensor z0 = dist.mu;
                auto decoded = model.decode_window(tape, z0, w.grid);
                Tensor mse;
                for (std::size_t t = 0; t < decoded.reconstruction.size(); ++t) {
                    Tensor truth = take_row_const(w.inputs, t);
                    Tensor term = mean(tape, square(tape, sub(tape, decoded.reconstruction[t], truth)));
                    mse = mse.defined() ? add(tape, mse, term) : term;
                }
                Tensor term = add(tape, add(tape, mse, kl_loss(tape, dist)), l1_loss(tape, z0));
                acc = acc.defined() ? add(tape, acc, term) : term;
            }
            return acc;
        };

        Tape tape;
        Tensor before = batch_loss(tape);
        const double loss_before = before.item();
        zero_grads(model.params());
        backward(before, tape);
        adam.step(model.params());

        Tape tape2(false);
        const double loss_after = batch_loss(tape2).item();
        if (loss_after < loss_before) ++descended;
    }
    CHECK(descended >= 18);
}

TEST_CASE("warm-up rejects a too-short prefix") {
    RawSeries tiny = synthesize(SyntheticKind::Sine, 6, {}, 1);
    OdeForecaster model(tiny_config());
    WarmupConfig wcfg;
    CHECK_THROWS_AS(warmup_train(model, tiny, wcfg, 1), DataError);
}

TEST_CASE("warm-up over masked windows converges on a cutout sine") {
    RawSeries sine = synthesize(SyntheticKind::Sine, 500, {.period = 40.0}, 23);
    RawSeries norm = apply_scaler(fit_scaler(sine), sine);
    MaskedSeries masked = cutout_irregular(norm, 0.3, 5);

    ModelConfig cfg = tiny_config();
    cfg.lag = 10;
    OdeForecaster model(cfg);
    std::vector<Window> windows = make_masked_windows(masked, cfg.lag, 0, {0});
    REQUIRE(!windows.empty());
    WarmupConfig wcfg;
    wcfg.max_epochs = 25;
    WarmupResult result = warmup_train_windows(model, windows, wcfg, 23);
    // loss must actually come down on the uneven grids
    CHECK(result.best_val_loss < result.log.front().val_loss);
    CHECK(result.best_val_loss < 0.6);
}
