#include "odecast/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "odecast/errors.hpp"

namespace odecast {

namespace {

SyntheticKind synthetic_kind(const std::string& name) {
    if (name == "sine") return SyntheticKind::Sine;
    if (name == "constant") return SyntheticKind::Constant;
    if (name == "step") return SyntheticKind::Step;
    if (name == "random_walk") return SyntheticKind::RandomWalk;
    if (name == "mean_shift") return SyntheticKind::MeanShift;
    throw DataError("unknown synthetic kind: " + name);
}

RawSeries select_column(const RawSeries& series, std::size_t column) {
    RawSeries out;
    out.feature_names = {series.feature_names[column]};
    out.target_index = 0;
    out.timestamps = series.timestamps;
    out.values.reserve(series.length());
    for (const auto& row : series.values) out.values.push_back({row[column]});
    return out;
}

MaskedSeries slice_masked(const MaskedSeries& whole, std::size_t from, std::size_t to) {
    MaskedSeries out;
    out.series.feature_names = whole.series.feature_names;
    out.series.target_index = whole.series.target_index;
    out.series.timestamps.assign(whole.series.timestamps.begin() + from,
                                 whole.series.timestamps.begin() + to);
    out.series.values.assign(whole.series.values.begin() + from,
                             whole.series.values.begin() + to);
    out.mask.assign(whole.mask.begin() + from, whole.mask.begin() + to);
    return out;
}

MaskedSeries prepend_masked_tail(const MaskedSeries& head, const MaskedSeries& tail,
                                 std::size_t rows) {
    MaskedSeries out;
    out.series = prepend_tail(head.series, tail.series, rows);
    out.mask.assign(head.mask.end() - static_cast<long>(rows), head.mask.end());
    out.mask.insert(out.mask.end(), tail.mask.begin(), tail.mask.end());
    return out;
}

} // namespace

std::string RunConfig::default_out(const std::string& command) const {
    std::string name = dataset_name;
    if (name.empty()) {
        if (!synthetic.empty()) {
            name = synthetic;
        } else if (!data_path.empty()) {
            name = std::filesystem::path(data_path).stem().string();
        } else {
            name = "run";
        }
    }
    return "runs/" + name + "-" + command + "-seed" + std::to_string(seed);
}

std::string RunConfig::echo_json() const {
    nlohmann::ordered_json j;
    j["data_path"] = data_path;
    j["synthetic"] = synthetic;
    j["synthetic_length"] = synthetic_length;
    j["dataset"] = dataset_name;
    j["task"] = task;
    j["lag"] = lag;
    j["horizon"] = horizon;
    j["hidden_dim"] = hidden_dim;
    j["latent_dim"] = latent_dim;
    j["seed"] = seed;
    j["train_fraction"] = train_fraction;
    j["lr"] = lr;
    j["warmup_batch_size"] = warmup.batch_size;
    j["warmup_max_epochs"] = warmup.max_epochs;
    j["warmup_patience"] = warmup.patience;
    j["til_enabled"] = til_enabled;
    j["kl_enabled"] = kl_enabled;
    j["l1_enabled"] = l1_enabled;
    j["cutout"] = cutout;
    j["adwin_delta"] = adwin_delta;
    j["adwin_max_window"] = adwin_max_window;
    j["baseline_mode"] = baseline_mode;
    return j.dump();
}

PreparedData prepare_data(const RunConfig& config) {
    RawSeries raw;
    std::string name = config.dataset_name;
    if (!config.synthetic.empty()) {
        SyntheticParams params;
        if (config.synthetic == "mean_shift" || config.synthetic == "step") {
            params.noise_std = 0.1;
            params.shift_to = 1.0;
        }
        if (config.synthetic == "sine") params.noise_std = 0.05;
        if (config.synthetic == "constant") params.constant = 0.5;
        raw = synthesize(synthetic_kind(config.synthetic), config.synthetic_length, params,
                         config.seed);
        if (name.empty()) name = config.synthetic;
    } else if (!config.data_path.empty()) {
        raw = load_csv(config.data_path, config.schema);
        if (name.empty()) name = std::filesystem::path(config.data_path).stem().string();
    } else {
        throw DataError("no data source: pass a CSV path or a synthetic kind");
    }

    if (config.task == "uni") {
        // univariate task defaults to the first feature column (the usual
        // single-client pick for client-per-column files); --target-col overrides
        const std::size_t column =
            config.schema.target_column.empty() && raw.dims() > 1 ? 0 : raw.target_index;
        raw = select_column(raw, column);
    }

    auto [train_raw, stream_raw] = split_chronological(raw, config.train_fraction);

    PreparedData data;
    data.dataset_name = name;
    data.stats = fit_scaler(train_raw);
    data.train = apply_scaler(data.stats, train_raw);
    data.stream = apply_scaler(data.stats, prepend_tail(train_raw, stream_raw, config.lag));
    data.input_dim = raw.dims();
    data.target_dim = config.task == "multi-multi" ? raw.dims() : 1;

    if (config.cutout > 0.0) {
        // cutout simulates observations that never arrived; fitted stats come
        // from the full prefix, the mask is applied on the normalised series
        RawSeries norm_full = apply_scaler(data.stats, raw);
        MaskedSeries masked = cutout_irregular(norm_full, config.cutout, config.seed);
        const std::size_t cut = train_raw.length();
        MaskedSeries train_m = slice_masked(masked, 0, cut);
        MaskedSeries stream_m = slice_masked(masked, cut, masked.series.length());
        data.stream_masked = prepend_masked_tail(train_m, stream_m, config.lag);
        data.train_masked = std::move(train_m);
    }
    return data;
}

ModelConfig model_config_for(const RunConfig& config, const PreparedData& data) {
    ModelConfig mc;
    mc.input_dim = data.input_dim;
    mc.hidden_dim = config.hidden_dim;
    mc.latent_dim = config.latent_dim;
    mc.lag = config.lag;
    mc.horizon = config.horizon;
    mc.target_dim = data.target_dim;
    mc.seed = config.seed;
    mc.til_enabled = config.til_enabled;
    return mc;
}

namespace {

std::vector<std::size_t> target_dims(const PreparedData& data) {
    if (data.target_dim == data.input_dim && data.input_dim > 1) {
        std::vector<std::size_t> dims(data.input_dim);
        for (std::size_t i = 0; i < dims.size(); ++i) dims[i] = i;
        return dims;
    }
    return {data.stream.target_index};
}

WarmupResult run_warmup(OdeForecaster& model, const RunConfig& config,
                        const PreparedData& data) {
    if (data.irregular()) {
        std::vector<Window> windows =
            make_masked_windows(*data.train_masked, config.lag, 0, target_dims(data));
        return warmup_train_windows(model, windows, config.warmup, config.seed);
    }
    return warmup_train(model, data.train, config.warmup, config.seed);
}

std::string checkpoint_path(const RunConfig& config, const std::string& out_dir) {
    return config.checkpoint.empty() ? out_dir + "/warmup.ckpt" : config.checkpoint;
}

void verify_compatibility(const OdeForecaster& model, const RunConfig& config,
                          const PreparedData& data) {
    const ModelConfig expected = model_config_for(config, data);
    ModelConfig actual = model.config();
    // til flag may legitimately differ between checkpoint and run request
    if (actual.input_dim != expected.input_dim || actual.lag != expected.lag ||
        actual.horizon != expected.horizon || actual.target_dim != expected.target_dim ||
        actual.hidden_dim != expected.hidden_dim || actual.latent_dim != expected.latent_dim)
        throw ConfigMismatchError("checkpoint was built for a different configuration");
}

} // namespace

StreamReport run_configured_stream(OdeForecaster& model, const RunConfig& config,
                                   const PreparedData& data, const StreamOptions& opts) {
    StreamReport report = data.irregular()
                              ? run_stream_irregular(model, *data.stream_masked, opts, config.seed)
                              : run_stream(model, data.stream, opts, config.seed);
    annotate_report(report, config.adwin_delta, config.adwin_max_window);
    return report;
}

void cmd_warmup(const RunConfig& config) {
    const std::string out_dir =
        config.out_dir.empty() ? config.default_out("warmup") : config.out_dir;
    std::filesystem::create_directories(out_dir);

    PreparedData data = prepare_data(config);
    OdeForecaster model(model_config_for(config, data));
    WarmupResult result = run_warmup(model, config, data);

    model.checkpoint_save(checkpoint_path(config, out_dir));
    write_training_log_csv(result, out_dir + "/training_log.csv");
    save_series_cache(data.train, data.stats, out_dir + "/normalized.cache");

    std::cout << "warmup: " << data.dataset_name << " epochs=" << result.log.size()
              << " best_epoch=" << result.best_epoch << " best_val=" << result.best_val_loss
              << " checkpoint=" << checkpoint_path(config, out_dir) << "\n";
}

void cmd_stream(const RunConfig& config) {
    if (config.checkpoint.empty()) throw DataError("stream: --checkpoint is required");
    const std::string out_dir =
        config.out_dir.empty() ? config.default_out("stream") : config.out_dir;

    PreparedData data = prepare_data(config);
    OdeForecaster model = OdeForecaster::checkpoint_load(config.checkpoint);
    verify_compatibility(model, config, data);

    StreamOptions opts;
    opts.kl_enabled = config.kl_enabled;
    opts.l1_enabled = config.l1_enabled;
    opts.lr = config.lr;

    StreamReport report = run_configured_stream(model, config, data, opts);

    nlohmann::ordered_json echo = nlohmann::json::parse(config.echo_json());
    echo["checkpoint_checksum"] = model.checkpoint_checksum();
    report.config_echo = echo.dump();
    emit_outputs(report, out_dir);

    std::cout << "stream: " << data.dataset_name << " steps=" << report.steps.size()
              << " cumulative_mse=" << cumulative_mse(report) << " out=" << out_dir << "\n";
}

void cmd_baseline(const RunConfig& config) {
    const std::string out_dir =
        config.out_dir.empty() ? config.default_out("baseline-" + config.baseline_mode)
                               : config.out_dir;
    PreparedData data = prepare_data(config);

    StreamReport report;
    nlohmann::ordered_json echo = nlohmann::json::parse(config.echo_json());
    if (config.baseline_mode == "persistence") {
        report = run_naive_baseline(data.stream, config.lag, config.horizon, target_dims(data));
    } else if (config.baseline_mode == "frozen") {
        if (config.checkpoint.empty())
            throw DataError("baseline --mode frozen needs --checkpoint");
        OdeForecaster model = OdeForecaster::checkpoint_load(config.checkpoint);
        verify_compatibility(model, config, data);
        const std::uint64_t before = model.checkpoint_checksum();
        StreamOptions opts;
        opts.update_enabled = false;
        report = run_configured_stream(model, config, data, opts);
        if (model.checkpoint_checksum() != before)
            throw ContractError("frozen baseline modified the model");
        echo["checkpoint_checksum"] = before;
    } else {
        throw DataError("unknown baseline mode: " + config.baseline_mode);
    }
    annotate_report(report, config.adwin_delta, config.adwin_max_window);
    report.config_echo = echo.dump();
    emit_outputs(report, out_dir);
    std::cout << "baseline(" << config.baseline_mode << "): " << data.dataset_name
              << " cumulative_mse=" << cumulative_mse(report) << " out=" << out_dir << "\n";
}

void cmd_ablate(const RunConfig& config) {
    const std::string out_dir =
        config.out_dir.empty() ? config.default_out("ablate") : config.out_dir;
    std::filesystem::create_directories(out_dir);
    PreparedData data = prepare_data(config);

    struct Variant {
        const char* method;
        bool til, kl, l1;
    };
    const Variant variants[] = {
        {"wo_til_mse", false, false, false},
        {"wo_til_msekl", false, true, false},
        {"w_til_mse", true, false, false},
        {"full", true, true, true},
    };

    MetricsTable table;
    for (const Variant& v : variants) {
        RunConfig variant_config = config;
        variant_config.til_enabled = v.til;
        variant_config.kl_enabled = v.kl;
        variant_config.l1_enabled = v.l1;

        OdeForecaster model(model_config_for(variant_config, data));
        run_warmup(model, variant_config, data);

        StreamOptions opts;
        opts.kl_enabled = v.kl;
        opts.l1_enabled = v.l1;
        opts.lr = config.lr;
        StreamReport report = run_configured_stream(model, variant_config, data, opts);

        table.set(data.dataset_name, config.task, v.method, config.horizon,
                  cumulative_mse(report));
        std::cout << "ablate " << v.method << ": cumulative_mse=" << cumulative_mse(report)
                  << "\n";
    }
    table.write_csv(out_dir + "/ablation.csv");
    std::cout << "ablate: table written to " << out_dir << "/ablation.csv\n";
}

void cmd_cutout(const RunConfig& config) {
    const std::string out_dir =
        config.out_dir.empty() ? config.default_out("cutout") : config.out_dir;
    std::filesystem::create_directories(out_dir);
    RunConfig with_cutout = config;
    if (with_cutout.cutout <= 0.0) with_cutout.cutout = 0.3;
    PreparedData data = prepare_data(with_cutout);

    const MaskedSeries& masked = *data.stream_masked;
    nlohmann::ordered_json j;
    j["fraction"] = with_cutout.cutout;
    j["rows"] = masked.series.length();
    nlohmann::ordered_json per_attr = nlohmann::ordered_json::array();
    for (std::size_t d = 0; d < masked.series.dims(); ++d) {
        nlohmann::ordered_json a;
        a["feature"] = masked.series.feature_names[d];
        a["observed"] = masked.observed_count(d);
        a["observed_fraction"] = static_cast<double>(masked.observed_count(d)) /
                                 static_cast<double>(masked.series.length());
        per_attr.push_back(a);
    }
    j["attributes"] = per_attr;
    std::ofstream out(out_dir + "/mask.json");
    if (!out) throw DataError("cannot write mask stats");
    out << j.dump(2) << '\n';
    std::cout << "cutout: mask stats written to " << out_dir << "/mask.json\n";
}

void cmd_rerender(const RunConfig& config) {
    if (config.out_dir.empty()) throw DataError("report: --out with an existing run is required");
    const std::string trace_path = config.out_dir + "/trace.csv";
    std::ifstream in(trace_path);
    if (!in) throw DataError("cannot open trace: " + trace_path);

    StreamReport report;
    std::string line;
    std::getline(in, line); // header
    auto parse_multi = [](const std::string& field) {
        std::vector<double> out;
        std::stringstream ss(field);
        std::string part;
        while (std::getline(ss, part, ';'))
            if (!part.empty()) out.push_back(std::stod(part));
        return out;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        StreamStep step;
        std::getline(ss, field, ',');
        step.index = std::stoul(field);
        std::getline(ss, field, ',');
        step.prediction = parse_multi(field);
        std::getline(ss, field, ',');
        step.truth = parse_multi(field);
        std::getline(ss, field, ',');
        step.mse = std::stod(field);
        std::getline(ss, field, ',');
        step.loss.kl = std::stod(field);
        std::getline(ss, field, ',');
        step.loss.l1 = std::stod(field);
        std::getline(ss, field, ',');
        step.drift_flag = field == "1";
        std::getline(ss, field, ',');
        step.wall_seconds = std::stod(field) / 1000.0;
        step.loss.mse = step.mse;
        step.loss.total = step.loss.mse + step.loss.kl + step.loss.l1;
        report.steps.push_back(std::move(step));
    }
    report.scored_steps = report.steps.size();
    for (const StreamStep& s : report.steps) report.total_runtime_seconds += s.wall_seconds;
    report.peak_memory_mb = resident_memory_mb();
    emit_outputs(report, config.out_dir);
    std::cout << "report: re-rendered " << report.steps.size() << " steps in " << config.out_dir
              << "\n";
}

} // namespace odecast
