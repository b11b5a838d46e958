#include "odecast/stream.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>

#include <sys/resource.h>

#include "odecast/errors.hpp"
#include "odecast/rng.hpp"

namespace odecast {

namespace {

std::uint64_t fnv1a(const std::vector<double>& values) {
    std::uint64_t h = 1469598103934665603ULL;
    for (double v : values) {
        const unsigned char* p = reinterpret_cast<const unsigned char*>(&v);
        for (std::size_t i = 0; i < sizeof(double); ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    }
    return h;
}



// Weighted squared error of pred vs truth; weights are 0/1 observation
// flags (empty weights = all observed). Returns {sum, weight_total}.
std::pair<double, double> weighted_sq_error(const std::vector<double>& pred,
                                            const std::vector<double>& truth,
                                            const std::vector<double>& weights) {
    double acc = 0.0, wt = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        const double d = pred[i] - truth[i];
        acc += w * d * d;
        wt += w;
    }
    return {acc, wt};
}

struct PendingUpdate {
    std::size_t step_index = 0; // position in report.steps
    const Window* window = nullptr;
    OnlineState state_before;   // isolation state as of the prediction
};

struct Engine {
    OdeForecaster& model;
    const StreamOptions& opts;
    AdamState adam;
    Rng eps_rng;
    OnlineState til_state;
    std::uint64_t event_seq = 0;

    Engine(OdeForecaster& m, const StreamOptions& o, std::uint64_t seed)
        : model(m), opts(o), adam(m.params(), {.lr = o.lr}), eps_rng(Rng(seed).fork(7)),
          til_state(m.initial_state()) {}

    std::size_t retained_state() const {
        // learner state between steps: parameters, Adam moments, TIL state
        return model.retained_value_count() + adam.state_size() +
               til_state.hidden.size() + til_state.cell.size();
    }

    // Forward pass shared by prediction (z0 = mu, no tape) and update
    // (sampled z0, recorded tape).
    Tensor forward(Tape& tape, const Window& w, const OnlineState& state, bool sample,
                   LatentDistribution* dist_out, Tensor* z0_out) {
        LatentDistribution dist = model.encode(tape, w.inputs);
        Tensor z0 = dist.mu;
        if (sample) {
            Tensor eps = Tensor::zeros({model.config().latent_dim});
            for (double& v : eps.values()) v = eps_rng.normal();
            z0 = model.reparameterize(tape, dist, eps);
        }
        auto decoded = model.decode_window(tape, z0, w.grid, /*with_reconstruction=*/false);
        Tensor h_ode = decoded.hidden.back();
        Tensor h_til;
        if (model.config().til_enabled) {
            auto [h, new_state] = model.til_forward(tape, w.inputs, state);
            h_til = h;
        }
        if (dist_out) *dist_out = dist;
        if (z0_out) *z0_out = z0;
        return model.fuse_and_predict(tape, h_ode, h_til);
    }

    void predict(const Window& w, StreamStep& step) {
        Tape tape(false);
        LatentDistribution dist = model.encode(tape, w.inputs);
        auto decoded = model.decode_window(tape, dist.mu, w.grid, false);
        Tensor h_ode = decoded.hidden.back();
        Tensor h_til;
        OnlineState next_state = til_state;
        if (model.config().til_enabled) {
            auto [h, ns] = model.til_forward(tape, w.inputs, til_state);
            h_til = h;
            next_state = ns;
        }
        Tensor y_hat = model.fuse_and_predict(tape, h_ode, h_til);
        if (!y_hat.all_finite()) throw NumericError("stream: non-finite prediction");

        step.prediction = y_hat.values();
        step.prediction_hash = fnv1a(step.prediction);
        step.prediction_seq = ++event_seq;

        til_state = next_state; // advanced exactly once per stream step
    }

    void update(const PendingUpdate& pending, StreamStep& step) {
        const Window& w = *pending.window;
        const std::vector<double> weights =
            w.target_mask.defined() ? w.target_mask.values() : std::vector<double>{};

        // score the logged prediction now that the truth is revealed
        step.truth = w.targets.values();
        auto [sq, wt] = weighted_sq_error(step.prediction, step.truth, weights);
        if (wt > 0.0) {
            step.mse = sq / wt;
            step.scored = true;
        } else {
            step.mse = 0.0;
            step.scored = false;
        }

        if (!opts.update_enabled || wt == 0.0) {
            step.updated = false;
            return;
        }

        Tape tape;
        LatentDistribution dist;
        Tensor z0;
        Tensor y_hat = forward(tape, w, pending.state_before, /*sample=*/true, &dist, &z0);

        step.truth_use_seq = ++event_seq; // truth enters the tape below
        Tensor truth = Tensor::from_matrix(w.targets.rows(), w.targets.cols(),
                                           w.targets.values());
        Tensor pred = reshape(tape, y_hat, w.targets.shape());
        Tensor mse_t;
        if (!weights.empty()) {
            Tensor diff2 = square(tape, sub(tape, pred, truth));
            Tensor mask = Tensor::from_matrix(w.target_mask.rows(), w.target_mask.cols(),
                                              w.target_mask.values());
            mse_t = scale(tape, sum(tape, mul(tape, diff2, mask)), 1.0 / wt);
        } else {
            mse_t = mse_loss(tape, pred, truth);
        }

        Tensor total = mse_t;
        Tensor kl_t, l1_t;
        if (opts.kl_enabled) {
            kl_t = kl_loss(tape, dist);
            total = add(tape, total, kl_t);
        }
        if (opts.l1_enabled) {
            l1_t = l1_loss(tape, z0);
            total = add(tape, total, l1_t);
        }

        step.loss.mse = mse_t.item();
        step.loss.kl = kl_t.defined() ? kl_t.item() : 0.0;
        step.loss.l1 = l1_t.defined() ? l1_t.item() : 0.0;
        step.loss.total = total.item();
        if (!std::isfinite(step.loss.total)) throw NumericError("stream: non-finite loss");

        zero_grads(model.params());
        backward(total, tape);
        adam.step(model.params());
        step.updated = true;
    }
};

StreamReport run_windows(OdeForecaster& model, const std::vector<Window>& windows,
                         std::size_t skipped, const StreamOptions& opts, std::uint64_t seed) {
    if (windows.empty()) throw DataError("stream too short for lag + horizon");

    const std::size_t horizon = model.config().horizon;
    Engine engine(model, opts, seed);

    StreamReport report;
    report.steps.resize(windows.size());
    report.prediction_visits.assign(windows.size(), 0);
    report.update_visits.assign(windows.size(), 0);
    report.skipped_windows = skipped;
    report.retained_state_low = engine.retained_state();
    report.retained_state_high = report.retained_state_low;

    std::deque<PendingUpdate> pending;
    const auto run_start = std::chrono::steady_clock::now();

    auto flush_one = [&]() {
        const PendingUpdate p = pending.front();
        pending.pop_front();
        StreamStep& step = report.steps[p.step_index];
        engine.update(p, step);
        report.update_visits[p.step_index] += step.updated ? 1 : 0;
    };

    for (std::size_t k = 0; k < windows.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        // truth for the oldest pending window completes `horizon` positions
        // after its prediction was emitted
        if (pending.size() >= horizon) flush_one();

        StreamStep& step = report.steps[k];
        step.index = windows[k].end_row;
        PendingUpdate p;
        p.step_index = k;
        p.window = &windows[k];
        p.state_before = engine.til_state;
        engine.predict(windows[k], step);
        report.prediction_visits[k] += 1;
        pending.push_back(std::move(p));

        step.wall_seconds = std::chrono::duration<double>(
            std::chrono::steady_clock::now() - t0).count();

        const std::size_t retained = engine.retained_state();
        report.retained_state_low = std::min(report.retained_state_low, retained);
        report.retained_state_high = std::max(report.retained_state_high, retained);
    }
    // remaining truths arrive as the stream drains past the last window
    while (!pending.empty()) flush_one();

    report.total_runtime_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - run_start).count();
    report.peak_memory_mb = resident_memory_mb();

    double acc = 0.0;
    std::size_t scored = 0;
    for (const StreamStep& s : report.steps)
        if (s.scored) {
            acc += s.mse;
            ++scored;
        }
    report.scored_steps = scored;
    report.cumulative_mse = scored ? acc / static_cast<double>(scored) : 0.0;
    return report;
}

} // namespace

std::vector<double> StreamReport::per_step_mse() const {
    std::vector<double> out;
    out.reserve(steps.size());
    for (const StreamStep& s : steps) out.push_back(s.scored ? s.mse : 0.0);
    return out;
}

double resident_memory_mb() {
    auto from_status = [](const char* key) -> double {
        std::ifstream status("/proc/self/status");
        std::string line;
        const std::size_t klen = std::string(key).size();
        while (std::getline(status, line))
            if (line.rfind(key, 0) == 0) {
                std::istringstream in(line.substr(klen));
                double kb = 0.0;
                in >> kb;
                return kb / 1024.0;
            }
        return 0.0;
    };
    double mb = from_status("VmHWM:");
    if (mb > 0.0) return mb;
    rusage usage{};
    if (getrusage(RUSAGE_SELF, &usage) == 0 && usage.ru_maxrss > 0)
        return static_cast<double>(usage.ru_maxrss) / 1024.0;
    return from_status("VmRSS:");
}

std::vector<std::size_t> target_dims_for(const RawSeries& series, bool multivariate_target) {
    if (!multivariate_target) return {series.target_index};
    std::vector<std::size_t> dims(series.dims());
    std::iota(dims.begin(), dims.end(), 0);
    return dims;
}

StreamReport run_stream(OdeForecaster& model, const RawSeries& stream, const StreamOptions& opts,
                        std::uint64_t seed) {
    const ModelConfig& mc = model.config();
    if (stream.dims() != mc.input_dim)
        throw ConfigMismatchError("stream dimensionality does not match the model");
    if (stream.length() < mc.lag + mc.horizon)
        throw DataError("stream shorter than lag + horizon");
    const std::vector<std::size_t> tdims =
        target_dims_for(stream, mc.target_dim == stream.dims() && stream.dims() > 1);
    if (tdims.size() != mc.target_dim)
        throw ConfigMismatchError("target width does not match the model");
    std::vector<Window> windows = make_windows(stream, mc.lag, mc.horizon, tdims);
    return run_windows(model, windows, 0, opts, seed);
}

StreamReport run_stream_irregular(OdeForecaster& model, const MaskedSeries& stream,
                                  const StreamOptions& opts, std::uint64_t seed) {
    const ModelConfig& mc = model.config();
    if (stream.series.dims() != mc.input_dim)
        throw ConfigMismatchError("stream dimensionality does not match the model");
    if (stream.series.length() < mc.lag + mc.horizon)
        throw DataError("stream shorter than lag + horizon");
    const std::vector<std::size_t> tdims = target_dims_for(
        stream.series, mc.target_dim == stream.series.dims() && stream.series.dims() > 1);
    if (tdims.size() != mc.target_dim)
        throw ConfigMismatchError("target width does not match the model");
    std::vector<Window> windows = make_masked_windows(stream, mc.lag, mc.horizon, tdims);
    const std::size_t total = stream.series.length() - mc.lag - mc.horizon + 1;
    return run_windows(model, windows, total - windows.size(), opts, seed);
}

StreamReport run_naive_baseline(const RawSeries& stream, std::size_t lag, std::size_t horizon,
                                const std::vector<std::size_t>& target_dims) {
    if (stream.length() < lag + horizon) throw DataError("stream shorter than lag + horizon");
    std::vector<Window> windows = make_windows(stream, lag, horizon, target_dims);

    StreamReport report;
    report.steps.resize(windows.size());
    report.prediction_visits.assign(windows.size(), 1);
    report.update_visits.assign(windows.size(), 0);
    const auto run_start = std::chrono::steady_clock::now();

    double acc = 0.0;
    for (std::size_t k = 0; k < windows.size(); ++k) {
        const Window& w = windows[k];
        StreamStep& step = report.steps[k];
        step.index = w.end_row;
        step.updated = false;
        step.prediction.resize(horizon * target_dims.size());
        for (std::size_t h = 0; h < horizon; ++h)
            for (std::size_t d = 0; d < target_dims.size(); ++d)
                step.prediction[h * target_dims.size() + d] =
                    w.inputs.at(w.inputs.rows() - 1, target_dims[d]);
        step.prediction_hash = fnv1a(step.prediction);
        step.prediction_seq = k + 1;
        step.truth = w.targets.values();
        auto [sq, wt] = weighted_sq_error(step.prediction, step.truth, {});
        step.mse = sq / wt;
        step.loss.mse = step.mse;
        step.loss.total = step.mse;
        acc += step.mse;
    }
    report.scored_steps = report.steps.size();
    report.cumulative_mse = report.steps.empty() ? 0.0 : acc / report.steps.size();
    report.total_runtime_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - run_start).count();
    report.peak_memory_mb = resident_memory_mb();
    return report;
}

} // namespace odecast
