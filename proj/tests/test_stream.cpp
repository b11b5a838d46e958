#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support/temp_path.hpp"

#include "odecast/stream.hpp"
#include "odecast/warmup.hpp"

using namespace odecast;

namespace {

ModelConfig stream_config(std::size_t input_dim = 1, std::size_t lag = 8,
                          std::size_t horizon = 1) {
    ModelConfig c;
    c.input_dim = input_dim;
    c.hidden_dim = 12;
    c.latent_dim = 8;
    c.lag = lag;
    c.horizon = horizon;
    c.target_dim = 1;
    c.seed = 5;
    return c;
}

OdeForecaster warmed_model(const RawSeries& train, const ModelConfig& cfg,
                           std::size_t epochs = 20) {
    OdeForecaster model(cfg);
    WarmupConfig wcfg;
    wcfg.max_epochs = epochs;
    warmup_train(model, train, wcfg, cfg.seed);
    return model;
}

} // namespace

TEST_CASE("step count follows the window arithmetic") {
    RawSeries s = synthesize(SyntheticKind::Sine, 60, {.period = 20.0}, 1);
    ModelConfig cfg = stream_config(1, 8, 1);
    OdeForecaster model(cfg);
    StreamReport report = run_stream(model, s, {}, 1);
    CHECK(report.steps.size() == 60 - 8 - 1 + 1);

    ModelConfig cfg3 = stream_config(1, 8, 3);
    OdeForecaster model3(cfg3);
    StreamReport report3 = run_stream(model3, s, {}, 1);
    CHECK(report3.steps.size() == 60 - 8 - 3 + 1);

    RawSeries tiny = synthesize(SyntheticKind::Sine, 8, {}, 1);
    CHECK_THROWS_AS(run_stream(model, tiny, {}, 1), DataError);
}

TEST_CASE("constant stream: per-step error small after burn-in") {
    // constant series is fed as already-normalised units
    RawSeries constant = synthesize(SyntheticKind::Constant, 700, {.constant = 0.5}, 2);
    ModelConfig cfg = stream_config();
    OdeForecaster model = warmed_model(constant, cfg, 10);
    StreamReport report = run_stream(model, constant, {}, 3);
    for (std::size_t k = 200; k < report.steps.size(); ++k) {
        INFO("step ", k);
        CHECK(report.steps[k].mse < 0.01);
    }
}

TEST_CASE("prequential ordering and one-pass visits") {
    RawSeries sine = synthesize(SyntheticKind::Sine, 300, {.period = 40.0}, 3);
    RawSeries norm = apply_scaler(fit_scaler(sine), sine);
    ModelConfig cfg = stream_config();
    OdeForecaster model = warmed_model(norm, cfg, 5);
    StreamReport report = run_stream(model, norm, {}, 9);

    for (const StreamStep& s : report.steps) {
        CHECK(s.prediction_seq > 0);
        if (s.updated) CHECK(s.prediction_seq < s.truth_use_seq);
    }
    for (std::uint32_t v : report.prediction_visits) CHECK(v == 1);
    for (std::uint32_t v : report.update_visits) CHECK(v == 1);
}

TEST_CASE("retained learner state is constant across the run") {
    RawSeries sine = synthesize(SyntheticKind::Sine, 400, {.period = 25.0}, 4);
    RawSeries norm = apply_scaler(fit_scaler(sine), sine);
    ModelConfig cfg = stream_config();
    OdeForecaster model = warmed_model(norm, cfg, 5);
    StreamReport report = run_stream(model, norm, {}, 2);
    CHECK(report.retained_state_low == report.retained_state_high);
}

TEST_CASE("horizon > 1 delays updates but scores every step") {
    RawSeries sine = synthesize(SyntheticKind::Sine, 200, {.period = 30.0}, 5);
    RawSeries norm = apply_scaler(fit_scaler(sine), sine);
    ModelConfig cfg = stream_config(1, 8, 4);
    OdeForecaster model = warmed_model(norm, cfg, 5);
    StreamReport report = run_stream(model, norm, {}, 2);
    CHECK(report.scored_steps == report.steps.size());
    for (const StreamStep& s : report.steps) {
        CHECK(s.prediction.size() == 4);
        CHECK(s.truth.size() == 4);
        if (s.updated) CHECK(s.truth_use_seq - s.prediction_seq >= 4);
    }
}

TEST_CASE("frozen model never updates and keeps its checksum") {
    RawSeries sine = synthesize(SyntheticKind::Sine, 300, {.period = 40.0}, 6);
    RawSeries norm = apply_scaler(fit_scaler(sine), sine);
    ModelConfig cfg = stream_config();
    OdeForecaster model = warmed_model(norm, cfg, 5);
    const std::uint64_t before = model.checkpoint_checksum();
    StreamOptions opts;
    opts.update_enabled = false;
    StreamReport report = run_stream(model, norm, opts, 2);
    CHECK(model.checkpoint_checksum() == before);
    for (std::uint32_t v : report.update_visits) CHECK(v == 0);
    CHECK(report.scored_steps == report.steps.size());
}

TEST_CASE("online learning beats the frozen model after a mean shift") {
    SyntheticParams p;
    p.noise_std = 0.1;
    p.shift_to = 1.0;
    RawSeries raw = synthesize(SyntheticKind::MeanShift, 1200, p, 11);
    auto [train, stream] = split_chronological(raw, 0.25);
    NormalizationStats stats = fit_scaler(train);
    RawSeries train_n = apply_scaler(stats, train);
    RawSeries stream_n = apply_scaler(stats, prepend_tail(train, stream, 8));

    ModelConfig cfg = stream_config();
    OdeForecaster online = warmed_model(train_n, cfg, 10);
    OdeForecaster frozen(cfg);
    frozen.params() = online.params(); // shared trained start? no: copy values
    for (std::size_t i = 0; i < online.params().size(); ++i)
        frozen.params()[i].tensor.values() = online.params()[i].tensor.values();

    StreamReport online_report = run_stream(online, stream_n, {}, 21);
    StreamOptions frozen_opts;
    frozen_opts.update_enabled = false;
    StreamReport frozen_report = run_stream(frozen, stream_n, frozen_opts, 21);

    // compare mean error over the post-shift half
    auto post_shift_mse = [](const StreamReport& r) {
        double acc = 0.0;
        std::size_t n = 0;
        for (std::size_t k = r.steps.size() / 2; k < r.steps.size(); ++k) {
            acc += r.steps[k].mse;
            ++n;
        }
        return acc / static_cast<double>(n);
    };
    CHECK(post_shift_mse(online_report) < post_shift_mse(frozen_report));
}

TEST_CASE("ablation switches gate the loss terms") {
    RawSeries sine = synthesize(SyntheticKind::Sine, 150, {.period = 30.0}, 8);
    RawSeries norm = apply_scaler(fit_scaler(sine), sine);
    ModelConfig cfg = stream_config();
    OdeForecaster model = warmed_model(norm, cfg, 3);

    StreamOptions opts;
    opts.kl_enabled = false;
    opts.l1_enabled = false;
    StreamReport report = run_stream(model, norm, opts, 2);
    for (const StreamStep& s : report.steps) {
        CHECK(s.loss.kl == 0.0);
        CHECK(s.loss.l1 == 0.0);
        if (s.updated) CHECK(s.loss.total == s.loss.mse);
    }
}

TEST_CASE("irregular run with an all-observed mask matches the regular run") {
    RawSeries sine = synthesize(SyntheticKind::Sine, 250, {.period = 40.0}, 9);
    RawSeries norm = apply_scaler(fit_scaler(sine), sine);
    ModelConfig cfg = stream_config();

    OdeForecaster m1 = warmed_model(norm, cfg, 5);
    OdeForecaster m2 = warmed_model(norm, cfg, 5);
    StreamReport regular = run_stream(m1, norm, {}, 33);
    MaskedSeries degenerate = cutout_irregular(norm, 0.0, 1);
    StreamReport irregular = run_stream_irregular(m2, degenerate, {}, 33);

    REQUIRE(regular.steps.size() == irregular.steps.size());
    CHECK(regular.cumulative_mse == irregular.cumulative_mse);
    for (std::size_t k = 0; k < regular.steps.size(); ++k)
        CHECK(regular.steps[k].prediction_hash == irregular.steps[k].prediction_hash);
}

TEST_CASE("irregular run skips unscorable steps and never fabricates truth") {
    RawSeries sine = synthesize(SyntheticKind::Sine, 300, {.period = 40.0}, 10);
    RawSeries norm = apply_scaler(fit_scaler(sine), sine);
    MaskedSeries masked = cutout_irregular(norm, 0.3, 12);
    ModelConfig cfg = stream_config();
    OdeForecaster model = warmed_model(norm, cfg, 5);
    StreamReport report = run_stream_irregular(model, masked, {}, 13);

    std::size_t unscored = 0;
    for (const StreamStep& s : report.steps) {
        if (!s.scored) {
            ++unscored;
            CHECK_FALSE(s.updated); // no truth, no gradient step
        }
    }
    // 30% of target points are masked, so a matching share of steps is unscored
    const double frac = static_cast<double>(unscored) / static_cast<double>(report.steps.size());
    CHECK(frac > 0.15);
    CHECK(frac < 0.45);
    CHECK(report.scored_steps + unscored == report.steps.size());
}

TEST_CASE("persistence baseline oracles") {
    // constant signal: zero error
    RawSeries constant = synthesize(SyntheticKind::Constant, 100, {.constant = 2.0}, 1);
    StreamReport r1 = run_naive_baseline(constant, 8, 1, {0});
    CHECK(r1.cumulative_mse == 0.0);

    // unit step at the midpoint: exactly one step has error 1 (horizon 1)
    SyntheticParams sp;
    sp.shift_to = 1.0;
    RawSeries step_series = synthesize(SyntheticKind::Step, 100, sp, 1);
    StreamReport r2 = run_naive_baseline(step_series, 8, 1, {0});
    std::size_t nonzero = 0;
    for (const StreamStep& s : r2.steps)
        if (s.mse > 0) {
            CHECK(s.mse == doctest::Approx(1.0));
            ++nonzero;
        }
    CHECK(nonzero == 1);

    // horizon 3: the boundary crosses three windows with partial errors
    StreamReport r3 = run_naive_baseline(step_series, 8, 3, {0});
    std::vector<double> nonzero_mses;
    for (const StreamStep& s : r3.steps)
        if (s.mse > 0) nonzero_mses.push_back(s.mse);
    REQUIRE(nonzero_mses.size() == 3);
    CHECK(nonzero_mses[0] == doctest::Approx(1.0 / 3.0));
    CHECK(nonzero_mses[1] == doctest::Approx(2.0 / 3.0));
    CHECK(nonzero_mses[2] == doctest::Approx(1.0));

    // random walk: persistence MSE approaches the innovation variance
    RawSeries walk = synthesize(SyntheticKind::RandomWalk, 5000, {.walk_std = 0.3}, 17);
    StreamReport r4 = run_naive_baseline(walk, 8, 1, {0});
    CHECK(r4.cumulative_mse == doctest::Approx(0.09).epsilon(0.15));
}

TEST_CASE("stream run is deterministic under a fixed seed") {
    RawSeries sine = synthesize(SyntheticKind::Sine, 200, {.period = 30.0}, 19);
    RawSeries norm = apply_scaler(fit_scaler(sine), sine);
    ModelConfig cfg = stream_config();
    auto run = [&]() {
        OdeForecaster model = warmed_model(norm, cfg, 3);
        StreamReport r = run_stream(model, norm, {}, 77);
        return std::make_pair(r.cumulative_mse, model.checkpoint_checksum());
    };
    auto a = run();
    auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("checkpoint handoff matches the in-process warm start") {
    RawSeries sine = synthesize(SyntheticKind::Sine, 260, {.period = 30.0}, 29);
    RawSeries norm = apply_scaler(fit_scaler(sine), sine);
    ModelConfig cfg = stream_config();
    OdeForecaster warmed = warmed_model(norm, cfg, 4);

    const std::string path = odecast::testing::temp_path(".ckpt");
    warmed.checkpoint_save(path);
    OdeForecaster loaded = OdeForecaster::checkpoint_load(path);
    std::remove(path.c_str());

    StreamReport direct = run_stream(warmed, norm, {}, 55);
    StreamReport via_file = run_stream(loaded, norm, {}, 55);
    CHECK(direct.steps.front().prediction == via_file.steps.front().prediction);
    CHECK(direct.steps.front().prediction_hash == via_file.steps.front().prediction_hash);
    CHECK(direct.cumulative_mse == via_file.cumulative_mse);
}
