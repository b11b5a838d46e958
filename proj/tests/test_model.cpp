#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "odecast/losses.hpp"
#include "odecast/model.hpp"
#include "odecast/rng.hpp"
#include "support/finite_diff.hpp"
#include "support/temp_path.hpp"

using namespace odecast;
using odecast::testing::check_gradients;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.input_dim = 2;
    c.hidden_dim = 6;
    c.latent_dim = 4;
    c.lag = 4;
    c.horizon = 1;
    c.target_dim = 1;
    c.seed = 21;
    return c;
}

Tensor random_window(std::size_t rows, std::size_t cols, Rng& rng) {
    Tensor w = Tensor::zeros({rows, cols});
    for (double& v : w.values()) v = rng.uniform(-1, 1);
    return w;
}

} // namespace

TEST_CASE("encode output shapes and zero-window propagation") {
    ModelConfig cfg;
    cfg.input_dim = 3;
    cfg.seed = 5;
    OdeForecaster model(cfg);
    Tape tape(false);
    Tensor window = Tensor::zeros({24, 3});
    LatentDistribution dist = model.encode(tape, window);
    CHECK(dist.mu.shape() == std::vector<std::size_t>{64});
    CHECK(dist.logvar.shape() == std::vector<std::size_t>{64});

    // zero window through zeroed weights leaves exactly the projection bias
    OdeForecaster zero_model(cfg);
    for (NamedParam& p : zero_model.params()) {
        for (double& v : p.tensor.values()) v = 0.0;
        if (p.name == "latent_proj.bias")
            for (std::size_t i = 0; i < p.tensor.size(); ++i)
                p.tensor.at(i) = 0.01 * static_cast<double>(i);
    }
    LatentDistribution zdist = zero_model.encode(tape, window);
    for (std::size_t i = 0; i < 64; ++i) {
        CHECK(zdist.mu.at(i) == doctest::Approx(0.01 * static_cast<double>(i)));
        CHECK(zdist.logvar.at(i) == doctest::Approx(0.01 * static_cast<double>(64 + i)));
    }
}

TEST_CASE("encode rejects a malformed window") {
    OdeForecaster model(small_config());
    Tape tape;
    CHECK_THROWS_AS(model.encode(tape, Tensor::zeros({4, 3})), ContractError);
}

TEST_CASE("reparameterize: eps 0 gives mu; unit logvar adds eps; ln 4 doubles it") {
    OdeForecaster model(small_config());
    Tape tape;
    LatentDistribution dist{Tensor::from_vector({1.0, 2.0, 3.0, 4.0}),
                            Tensor::from_vector({0.0, 0.0, 0.0, 0.0})};
    Tensor z = model.reparameterize(tape, dist, Tensor::zeros({4}));
    CHECK(z.values() == dist.mu.values());

    Tensor eps = Tensor::from_vector({0.5, -0.5, 1.0, 2.0});
    Tensor z2 = model.reparameterize(tape, dist, eps);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(z2.at(i) == doctest::Approx(dist.mu.at(i) + eps.at(i)));

    LatentDistribution wide{Tensor::from_vector({1.0, 0, 0, 0}),
                            Tensor::from_vector({std::log(4.0), 0, 0, 0})};
    Tensor z3 = model.reparameterize(tape, wide, Tensor::from_vector({1.0, 0, 0, 0}));
    CHECK(z3.at(0) == doctest::Approx(3.0)); // mu + 1 * exp(0.5 ln 4) = 1 + 2

    CHECK_THROWS_AS(model.reparameterize(tape, dist, Tensor::zeros({3})), DimensionError);
}

TEST_CASE("decode_window: zero dynamics give identical hidden states") {
    ModelConfig cfg = small_config();
    OdeForecaster model(cfg);
    for (NamedParam& p : model.params())
        if (p.name.rfind("dynamics", 0) == 0)
            for (double& v : p.tensor.values()) v = 0.0;
    Tape tape(false);
    Tensor z0 = Tensor::from_vector({0.4, -0.2, 0.1, 0.9});
    auto decoded = model.decode_window(tape, z0, TimeGrid::regular(4));
    CHECK(decoded.trajectory.states.size() == 4);
    CHECK(decoded.hidden.size() == 4);
    CHECK(decoded.reconstruction.size() == 4);
    for (std::size_t t = 1; t < 4; ++t)
        CHECK(decoded.hidden[t].values() == decoded.hidden[0].values());
    CHECK(decoded.reconstruction[0].size() == cfg.input_dim);
}

TEST_CASE("til_forward carries state across calls") {
    ModelConfig cfg = small_config();
    OdeForecaster model(cfg);
    Rng rng(3);
    Tensor w1 = random_window(4, 2, rng);
    Tensor w2 = random_window(4, 2, rng);
    Tape tape(false);

    OnlineState s0 = model.initial_state();
    auto [h1, s1] = model.til_forward(tape, w1, s0);
    auto [h2_carried, s2] = model.til_forward(tape, w2, s1);
    auto [h2_fresh, s3] = model.til_forward(tape, w2, s0);
    CHECK(h1.size() == cfg.hidden_dim);
    CHECK(h2_carried.values() != h2_fresh.values());

    // zero weights, zero state: fixed point at zero
    OdeForecaster zero_model(cfg);
    for (NamedParam& p : zero_model.params())
        for (double& v : p.tensor.values()) v = 0.0;
    auto [hz, sz] = zero_model.til_forward(tape, Tensor::zeros({4, 2}), zero_model.initial_state());
    for (double v : hz.values()) CHECK(v == 0.0);
}

TEST_CASE("fuse_and_predict shapes and zero propagation") {
    ModelConfig cfg = small_config();
    cfg.horizon = 24;
    OdeForecaster model(cfg);
    Tape tape(false);
    Tensor h_ode = Tensor::zeros({6});
    Tensor h_til = Tensor::zeros({6});
    Tensor y = model.fuse_and_predict(tape, h_ode, h_til);
    CHECK(y.size() == 24); // target_dim 1 x horizon 24

    OdeForecaster zero_model(cfg);
    for (NamedParam& p : zero_model.params())
        for (double& v : p.tensor.values()) v = 0.0;
    Tensor y0 = zero_model.fuse_and_predict(tape, h_ode, h_til);
    for (double v : y0.values()) CHECK(v == 0.0);
}

TEST_CASE("til-disabled model has no isolation parameters and predicts from h_ode") {
    ModelConfig cfg = small_config();
    cfg.til_enabled = false;
    OdeForecaster model(cfg);
    for (const NamedParam& p : model.params()) {
        CHECK(p.name.rfind("til", 0) != 0);
        CHECK(p.name.rfind("concat_head", 0) != 0);
    }
    Tape tape(false);
    Tensor y = model.fuse_and_predict(tape, Tensor::zeros({6}), Tensor());
    CHECK(y.size() == 1);
    CHECK_THROWS_AS(model.til_forward(tape, Tensor::zeros({4, 2}), model.initial_state()),
                    ContractError);
}

TEST_CASE("til flag keeps shared initial weights unchanged") {
    ModelConfig cfg = small_config();
    OdeForecaster with_til(cfg);
    cfg.til_enabled = false;
    OdeForecaster without(cfg);
    for (const NamedParam& p : without.params()) {
        bool found = false;
        for (const NamedParam& q : with_til.params())
            if (q.name == p.name) {
                CHECK(q.tensor.values() == p.tensor.values());
                found = true;
            }
        CHECK(found);
    }
}

TEST_CASE("gradient of sum(mu) wrt encoder weights matches finite differences") {
    OdeForecaster model(small_config());
    Rng rng(7);
    Tensor window = random_window(4, 2, rng);

    auto forward = [&](Tape& t) {
        LatentDistribution dist = model.encode(t, window);
        return sum(t, dist.mu);
    };
    auto loss_value = [&]() {
        Tape t(false);
        return forward(t).item();
    };
    Tape tape;
    Tensor loss = forward(tape);
    zero_grads(model.params());
    backward(loss, tape);

    std::vector<Tensor> encoder_params;
    for (NamedParam& p : model.params())
        if (p.name.rfind("encoder", 0) == 0 || p.name.rfind("latent_proj", 0) == 0)
            encoder_params.push_back(p.tensor);
    CHECK(check_gradients(loss_value, encoder_params, 1e-3).ok);
}

TEST_CASE("end-to-end gradient through a 4-point decode") {
    OdeForecaster model(small_config());
    Rng rng(11);
    Tensor window = random_window(4, 2, rng);
    Tensor eps = Tensor::zeros({4});
    for (double& v : eps.values()) v = rng.normal();
    const TimeGrid grid = TimeGrid::regular(4);

    auto forward = [&](Tape& t) {
        LatentDistribution dist = model.encode(t, window);
        Tensor z0 = model.reparameterize(t, dist, eps);
        auto decoded = model.decode_window(t, z0, grid);
        Tensor acc;
        for (const Tensor& y : decoded.reconstruction) {
            Tensor term = sum(t, square(t, y));
            acc = acc.defined() ? add(t, acc, term) : term;
        }
        return acc;
    };
    auto loss_value = [&]() {
        Tape t(false);
        return forward(t).item();
    };
    Tape tape;
    Tensor loss = forward(tape);
    zero_grads(model.params());
    backward(loss, tape);

    std::vector<Tensor> params;
    for (NamedParam& p : model.params())
        if (!model.is_warmup_only(p.name) || p.name.rfind("recon_head", 0) == 0)
            params.push_back(p.tensor);
    CHECK(check_gradients(loss_value, params, 1e-3).ok);
}

TEST_CASE("gradient through the fuse path") {
    OdeForecaster model(small_config());
    Rng rng(13);
    Tensor h_ode = Tensor::from_vector({0.1, -0.2, 0.3, 0.4, -0.5, 0.6});
    Tensor h_til = Tensor::from_vector({0.6, 0.5, -0.4, 0.3, 0.2, -0.1});

    auto forward = [&](Tape& t) {
        return sum(t, square(t, model.fuse_and_predict(t, h_ode, h_til)));
    };
    auto loss_value = [&]() {
        Tape t(false);
        return forward(t).item();
    };
    Tape tape;
    Tensor loss = forward(tape);
    zero_grads(model.params());
    backward(loss, tape);

    std::vector<Tensor> params;
    for (NamedParam& p : model.params())
        if (p.name.rfind("concat_head", 0) == 0 || p.name.rfind("output_head", 0) == 0)
            params.push_back(p.tensor);
    CHECK(check_gradients(loss_value, params, 1e-4).ok);
}

TEST_CASE("every online-path parameter receives a gradient in one online step") {
    ModelConfig cfg = small_config();
    OdeForecaster model(cfg);
    Rng rng(17);
    Tensor window = random_window(4, 2, rng);
    Tensor eps = Tensor::zeros({4});
    for (double& v : eps.values()) v = rng.normal();

    Tape tape;
    LatentDistribution dist = model.encode(tape, window);
    Tensor z0 = model.reparameterize(tape, dist, eps);
    auto decoded = model.decode_window(tape, z0, TimeGrid::regular(4), false);
    auto [h_til, state] = model.til_forward(tape, window, model.initial_state());
    Tensor y_hat = model.fuse_and_predict(tape, decoded.hidden.back(), h_til);
    Tensor truth = Tensor::from_vector({0.7});
    Tensor loss = add(tape, add(tape, mse_loss(tape, y_hat, truth), kl_loss(tape, dist)),
                      l1_loss(tape, z0));
    zero_grads(model.params());
    backward(loss, tape);

    for (NamedParam& p : model.params()) {
        if (model.is_warmup_only(p.name)) continue;
        double norm = 0.0;
        for (double g : p.tensor.grad()) norm += g * g;
        INFO("parameter ", p.name);
        CHECK(norm > 0.0);
    }
}

TEST_CASE("checkpoint round-trip is bit-identical and guards config") {
    ModelConfig cfg = small_config();
    OdeForecaster model(cfg);
    const std::string path = odecast::testing::temp_path(".ckpt");

    Rng rng(19);
    Tensor window = random_window(4, 2, rng);
    Tape tape(false);
    LatentDistribution before = model.encode(tape, window);

    model.checkpoint_save(path);
    OdeForecaster loaded = OdeForecaster::checkpoint_load(path);
    LatentDistribution after = loaded.encode(tape, window);
    CHECK(before.mu.values() == after.mu.values());
    CHECK(before.logvar.values() == after.logvar.values());
    CHECK(model.checkpoint_checksum() == loaded.checkpoint_checksum());

    ModelConfig other = cfg;
    other.input_dim = 3;
    OdeForecaster wrong(other);
    CHECK_THROWS_AS(wrong.checkpoint_restore(path), ConfigMismatchError);

    // corrupt one payload byte: checksum must catch it
    {
        std::FILE* f = std::fopen(path.c_str(), "r+b");
        REQUIRE(f);
        std::fseek(f, 64, SEEK_SET);
        const unsigned char junk = 0xA5;
        std::fwrite(&junk, 1, 1, f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(OdeForecaster::checkpoint_load(path), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("forward determinism with eps forced to zero") {
    OdeForecaster model(small_config());
    Rng rng(23);
    Tensor window = random_window(4, 2, rng);
    auto run = [&]() {
        Tape tape(false);
        LatentDistribution dist = model.encode(tape, window);
        return dist.mu.values();
    };
    CHECK(run() == run());
}
